#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dsg/tape.hpp"

namespace dsg {

/// Seeded generator whose derived draws are identical on every platform
/// (std:: distributions are implementation-defined, the engine is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Uniform Glorot initialization: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
Tensor2 glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are kept per parameter in the
/// order the parameters were registered.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  /// Applies one update from the current Parameter::grad values.
  void step();
  void zero_grad();

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::uint64_t steps() const { return steps_; }
  const std::vector<Parameter*>& parameters() const { return params_; }
  const std::vector<Tensor2>& first_moments() const { return m_; }
  const std::vector<Tensor2>& second_moments() const { return v_; }

  /// Restores moment state, e.g. from a checkpoint.
  void load_state(std::uint64_t steps, std::vector<Tensor2> m, std::vector<Tensor2> v);

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
  std::uint64_t steps_ = 0;
};

// DSGW checkpoint: "DSGW", u16 version, u32 record count, then per record a
// u32 name length, UTF-8 name, u32 rows, u32 cols and rows·cols f32 values,
// all little-endian. Adam moments follow the parameters as records named
// "adam.m/<name>" and "adam.v/<name>", with the step counter as "adam.step".

struct NamedTensor {
  std::string name;
  Tensor2 value;
};

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> records);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, std::span<Parameter* const> params,
                     const Adam* optimizer = nullptr);
/// Loads values by name into `params`; every parameter must be present with a
/// matching shape. Restores optimizer moments when `optimizer` is given.
void load_checkpoint(const std::filesystem::path& path, std::span<Parameter* const> params,
                     Adam* optimizer = nullptr);

}  // namespace dsg
