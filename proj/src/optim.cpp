#include "dsg/optim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>

#include "dsg/error.hpp"
#include "le_io.hpp"

namespace dsg {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw InvalidArgument("Rng::index: empty range");
  // rejection sampling removes modulo bias
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % n);
}

Tensor2 glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor2 w(fan_in, fan_out);
  for (double& v : w.values()) v = rng.uniform(-a, a);
  return w;
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    Tensor2& m = m_[k];
    Tensor2& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p.value[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::load_state(std::uint64_t steps, std::vector<Tensor2> m, std::vector<Tensor2> v) {
  if (m.size() != params_.size() || v.size() != params_.size())
    throw InvalidArgument("Adam::load_state: moment count mismatch");
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!m[k].same_shape(params_[k]->value) || !v[k].same_shape(params_[k]->value))
      throw ShapeError("Adam::load_state: moment shape mismatch for '" + params_[k]->name + "'");
  }
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'S', 'G', 'W'};
constexpr std::uint16_t kCheckpointVersion = 1;

using detail::get_f32;
using detail::get_le;
using detail::put_f32;
using detail::put_le;

}  // namespace

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, 4);
  put_le<std::uint16_t>(os, kCheckpointVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  for (const NamedTensor& r : records) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.value.rows()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.value.cols()));
    for (double v : r.value.values()) put_f32(os, v);
  }
  if (!os) throw FormatError("failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  const std::string what = "checkpoint " + path.string();
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError(what + ": bad magic, expected DSGW");
  const auto version = get_le<std::uint16_t>(is, what);
  if (version != kCheckpointVersion)
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(is, what);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get_le<std::uint32_t>(is, what);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError(what + ": truncated record name");
    const auto rows = get_le<std::uint32_t>(is, what);
    const auto cols = get_le<std::uint32_t>(is, what);
    Tensor2 t(rows, cols);
    for (double& v : t.values()) v = get_f32(is, what + " record '" + name + "'");
    out.push_back({std::move(name), std::move(t)});
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError(what + ": trailing bytes");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, std::span<Parameter* const> params,
                     const Adam* optimizer) {
  std::vector<NamedTensor> records;
  for (const Parameter* p : params) records.push_back({p->name, p->value});
  if (optimizer != nullptr) {
    const auto& ps = optimizer->parameters();
    for (std::size_t k = 0; k < ps.size(); ++k)
      records.push_back({"adam.m/" + ps[k]->name, optimizer->first_moments()[k]});
    for (std::size_t k = 0; k < ps.size(); ++k)
      records.push_back({"adam.v/" + ps[k]->name, optimizer->second_moments()[k]});
    records.push_back({"adam.step", Tensor2::scalar(static_cast<double>(optimizer->steps()))});
  }
  write_checkpoint(path, records);
}

void load_checkpoint(const std::filesystem::path& path, std::span<Parameter* const> params,
                     Adam* optimizer) {
  std::map<std::string, Tensor2> by_name;
  for (auto& r : read_checkpoint(path)) by_name[r.name] = std::move(r.value);
  auto take = [&](const std::string& name, const Tensor2& like) -> Tensor2 {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw FormatError("checkpoint " + path.string() + ": missing record '" + name + "'");
    if (!it->second.same_shape(like))
      throw FormatError("checkpoint " + path.string() + ": record '" + name + "' has shape " +
                        std::to_string(it->second.rows()) + "x" +
                        std::to_string(it->second.cols()));
    return it->second;
  };
  for (Parameter* p : params) p->value = take(p->name, p->value);
  if (optimizer != nullptr) {
    std::vector<Tensor2> m, v;
    for (Parameter* p : optimizer->parameters()) m.push_back(take("adam.m/" + p->name, p->value));
    for (Parameter* p : optimizer->parameters()) v.push_back(take("adam.v/" + p->name, p->value));
    const Tensor2 step = take("adam.step", Tensor2::scalar(0));
    optimizer->load_state(static_cast<std::uint64_t>(step[0]), std::move(m), std::move(v));
  }
}

}  // namespace dsg
