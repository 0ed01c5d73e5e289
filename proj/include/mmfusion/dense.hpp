#pragma once

#include <string>

#include "mmfusion/activation.hpp"
#include "mmfusion/param_store.hpp"
#include "mmfusion/rng.hpp"

namespace mmfusion {

/// Fully connected layer y = act(W x + b) over a column batch.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(const std::string& name, std::size_t in_dim, std::size_t out_dim,
             Activation act);

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) for W, zeros for b.
  void init(Rng& rng);

  /// Caches input and pre-activation for backward().
  Matrix forward(const Matrix& x);
  /// Same result as forward() without touching the cache; safe to call
  /// concurrently on a frozen layer.
  Matrix infer(const Matrix& x) const;
  /// Accumulates dW and db, returns the gradient with respect to the input.
  Matrix backward(const Matrix& grad_out);

  void collect(ParamStore& store);
  void clear_cache();

  std::size_t in_dim() const { return weight.value.cols(); }
  std::size_t out_dim() const { return weight.value.rows(); }
  Activation activation_kind() const { return act_; }

  Param weight;
  Param bias;

 private:
  Matrix pre_activation(const Matrix& x) const;

  Activation act_ = Activation::kIdentity;
  Matrix cached_input_;
  Matrix cached_pre_;
};

}  // namespace mmfusion
