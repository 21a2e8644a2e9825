#include "dsg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dsg/error.hpp"
#include "dsg/ops.hpp"

namespace dsg {

namespace {

double evaluate(const TapeFunction& f, const std::vector<Tensor2>& inputs,
                const Tensor2* projection) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor2& in : inputs) vars.push_back(tape.constant(in));
  Var out = f(tape, vars);
  if (projection != nullptr) return weighted_sum(out, *projection).value()[0];
  return out.value()[0];
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

Tensor2 numeric_gradient(const std::function<double(const Tensor2&)>& f, const Tensor2& at,
                         double step) {
  Tensor2 grad(at.rows(), at.cols());
  Tensor2 x = at;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

GradcheckResult check_gradient(std::string name, const TapeFunction& f,
                               std::vector<Tensor2> inputs, Rng& rng,
                               const GradcheckOptions& options) {
  GradcheckResult result;
  result.name = std::move(name);

  std::vector<Parameter> params;
  params.reserve(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k)
    params.emplace_back("input" + std::to_string(k), inputs[k]);

  Tape tape;
  std::vector<Var> vars;
  for (Parameter& p : params) vars.push_back(tape.parameter(p));
  Var out = f(tape, vars);

  Tensor2 projection;
  const bool scalar = out.rows() == 1 && out.cols() == 1;
  if (!scalar) {
    projection = Tensor2(out.rows(), out.cols());
    for (double& v : projection.values()) v = rng.uniform(-1.0, 1.0);
    out = weighted_sum(out, projection);
  }
  tape.backward(out);
  tape.flush_gradients();

  const Tensor2* proj = scalar ? nullptr : &projection;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<Tensor2> probe = inputs;
    const Tensor2 numeric = numeric_gradient(
        [&](const Tensor2& x) {
          probe[k] = x;
          return evaluate(f, probe, proj);
        },
        inputs[k], options.step);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      result.max_relative_error =
          std::max(result.max_relative_error,
                   relative_error(params[k].grad[i], numeric[i], options.denominator_floor));
    }
    result.coordinates += numeric.size();
  }
  result.passed = result.max_relative_error <= options.tolerance;
  return result;
}

GradcheckResult check_parameter_gradient(std::string name,
                                         const std::function<Var(Tape& tape)>& build,
                                         const std::vector<Parameter*>& params, Rng& rng,
                                         const GradcheckOptions& options) {
  GradcheckResult result;
  result.name = std::move(name);
  for (Parameter* p : params) p->zero_grad();

  Tensor2 projection;
  bool scalar = true;
  {
    Tape tape;
    Var out = build(tape);
    scalar = out.rows() == 1 && out.cols() == 1;
    if (!scalar) {
      projection = Tensor2(out.rows(), out.cols());
      for (double& v : projection.values()) v = rng.uniform(-1.0, 1.0);
      out = weighted_sum(out, projection);
    }
    tape.backward(out);
    tape.flush_gradients();
  }

  auto value = [&] {
    Tape tape;
    Var out = build(tape);
    return scalar ? out.value()[0] : weighted_sum(out, projection).value()[0];
  };
  for (Parameter* p : params) {
    const Tensor2 analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + options.step;
      const double up = value();
      p->value[i] = orig - options.step;
      const double down = value();
      p->value[i] = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      result.max_relative_error =
          std::max(result.max_relative_error,
                   relative_error(analytic[i], numeric, options.denominator_floor));
    }
    result.coordinates += p->value.size();
    p->zero_grad();
  }
  result.passed = result.max_relative_error <= options.tolerance;
  return result;
}

}  // namespace dsg
