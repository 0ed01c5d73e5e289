#include "mmfusion/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mmfusion/rng.hpp"

namespace mmfusion {

namespace {

double checked(double value, const char* where, const std::string& param, std::size_t index) {
  if (!std::isfinite(value)) {
    throw NonFiniteLossError(std::string("gradient_check: non-finite loss ") + where +
                             (param.empty() ? "" : " perturbing " + param + "[" +
                                                       std::to_string(index) + "]"));
  }
  return value;
}

}  // namespace

GradCheckResult gradient_check(const LossClosure& loss, ParamStore& store,
                               const GradCheckOptions& options) {
  store.zero_grads();
  checked(loss(true), "at base point", "", 0);
  std::vector<Matrix> analytic;
  analytic.reserve(store.size());
  for (const Param* p : store) analytic.push_back(p->grad);

  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    Param& p = store[pi];
    std::vector<std::size_t> coords(p.value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.coords_per_param > 0 && options.coords_per_param < coords.size()) {
      // Partial Fisher-Yates: first k entries become a uniform sample.
      for (std::size_t i = 0; i < options.coords_per_param; ++i) {
        std::swap(coords[i], coords[i + rng.uniform_index(coords.size() - i)]);
      }
      coords.resize(options.coords_per_param);
    }
    auto theta = p.value.data();
    for (std::size_t idx : coords) {
      const double saved = theta[idx];
      theta[idx] = saved + options.step;
      const double plus = checked(loss(false), "", p.name, idx);
      theta[idx] = saved - options.step;
      const double minus = checked(loss(false), "", p.name, idx);
      theta[idx] = saved;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[pi].data()[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coords_checked;
      if (rel > result.max_relative_error || result.worst_param.empty()) {
        result.max_relative_error = std::max(rel, result.max_relative_error);
        result.worst_param = p.name;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  for (std::size_t pi = 0; pi < store.size(); ++pi) store[pi].grad = analytic[pi];
  return result;
}

}  // namespace mmfusion
