#pragma once

#include <span>

#include "mmfusion/matrix.hpp"

namespace mmfusion {

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Mean categorical cross-entropy over the columns of a C x N probability
/// batch. `grad` is taken with respect to the pre-softmax logits:
/// (P - onehot(y)) / N. The log argument is clamped at 1e-12.
///
/// `normalizer` overrides N when a batch is split across several calls
/// (whole-video batches); it defaults to the column count.
LossAndGrad cross_entropy(const Matrix& probs, std::span<const int> targets,
                          double normalizer = 0.0);

/// 0.5 * ||pred - target||^2 averaged over columns; grad is w.r.t. pred.
LossAndGrad half_squared_error(const Matrix& pred, const Matrix& target);

}  // namespace mmfusion
