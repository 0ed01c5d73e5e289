#include "mmfusion/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mmfusion {

LossAndGrad cross_entropy(const Matrix& probs, std::span<const int> targets,
                          double normalizer) {
  const std::size_t n = probs.cols();
  const std::size_t c = probs.rows();
  if (targets.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(n) + " predictions");
  }
  const double denom = normalizer > 0.0 ? normalizer : static_cast<double>(n);
  LossAndGrad out{0.0, probs};
  for (std::size_t j = 0; j < n; ++j) {
    const int y = targets[j];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(y) +
                              " outside [0, " + std::to_string(c) + ")");
    }
    out.loss -= std::log(std::max(probs(y, j), 1e-12));
    out.grad(y, j) -= 1.0;
  }
  out.loss /= denom;
  out.grad *= 1.0 / denom;
  return out;
}

LossAndGrad half_squared_error(const Matrix& pred, const Matrix& target) {
  require_same_shape(pred, target, "half_squared_error");
  const double n = static_cast<double>(pred.cols());
  LossAndGrad out{0.0, pred - target};
  for (double d : out.grad.data()) out.loss += 0.5 * d * d;
  out.loss /= n;
  out.grad *= 1.0 / n;
  return out;
}

}  // namespace mmfusion
