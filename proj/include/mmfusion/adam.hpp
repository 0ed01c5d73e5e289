#pragma once

#include <map>
#include <string>

#include "mmfusion/param_store.hpp"

namespace mmfusion {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip applied before the update; <= 0 disables it.
  double clip_norm = 0.0;
};

/// Bias-corrected Adam. Moment buffers are keyed by parameter name and
/// created lazily on the first step that sees a parameter.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// theta -= lr * m_hat / (sqrt(v_hat) + eps), then zeroes every gradient.
  void step(ParamStore& store);

  long step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const Matrix* first_moment(const std::string& name) const;
  const Matrix* second_moment(const std::string& name) const;

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };

  AdamConfig config_;
  long t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace mmfusion
