#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "mmfusion/param_store.hpp"

namespace mmfusion {

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluates the model loss. When `with_grad` is true it must also run the
/// backward pass, accumulating into the store's gradients. Any randomness
/// (dropout masks, reparameterization noise) has to be frozen so repeated
/// calls see the same function.
using LossClosure = std::function<double(bool with_grad)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates sampled per parameter; 0 checks every coordinate.
  std::size_t coords_per_param = 0;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

/// Compares analytic gradients with central differences
/// (L(theta + h) - L(theta - h)) / 2h. Parameters are restored afterwards and
/// the store's gradients hold the analytic values on return.
GradCheckResult gradient_check(const LossClosure& loss, ParamStore& store,
                               const GradCheckOptions& options = {});

}  // namespace mmfusion
