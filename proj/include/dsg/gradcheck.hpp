#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dsg/optim.hpp"
#include "dsg/tape.hpp"

namespace dsg {

/// Builds a forward pass on `tape` from leaf Vars bound to the inputs.
using TapeFunction = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Lower bound on the relative-error denominator so coordinates whose true
  /// gradient is ~0 are compared absolutely.
  double denominator_floor = 1e-6;
};

struct GradcheckResult {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Compares tape gradients of f against central finite differences of the
/// forward values. Non-scalar outputs are contracted with a random projection
/// drawn from `rng`. Every coordinate of every input is checked.
GradcheckResult check_gradient(std::string name, const TapeFunction& f,
                               std::vector<Tensor2> inputs, Rng& rng,
                               const GradcheckOptions& options = {});

/// Same check for a forward pass that binds model parameters itself. Every
/// coordinate of every tensor in `params` is perturbed in place and restored.
GradcheckResult check_parameter_gradient(std::string name,
                                         const std::function<Var(Tape& tape)>& build,
                                         const std::vector<Parameter*>& params, Rng& rng,
                                         const GradcheckOptions& options = {});

/// Central finite-difference gradient of a scalar function of one tensor.
Tensor2 numeric_gradient(const std::function<double(const Tensor2&)>& f, const Tensor2& at,
                         double step);

double relative_error(double analytic, double numeric, double floor);

/// Runs every differentiable op, both clustering losses and the joint model
/// through check_gradient, once per seed.
std::vector<GradcheckResult> run_gradient_suite(std::uint64_t first_seed, int seeds,
                                                const GradcheckOptions& options = {});

}  // namespace dsg
