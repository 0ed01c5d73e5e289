#include "mmfusion/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mmfusion/errors.hpp"

namespace mmfusion {

Metrics evaluate(std::span<const int> predictions, std::span<const int> targets, int classes) {
  if (predictions.empty()) throw std::invalid_argument("evaluate: empty prediction list");
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(targets.size()) + " targets");
  }
  if (classes < 1) throw std::invalid_argument("evaluate: class count must be positive");
  const auto C = static_cast<std::size_t>(classes);
  Metrics m;
  m.classes = classes;
  m.count = targets.size();
  m.confusion.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int y = targets[i], p = predictions[i];
    if (y < 0 || y >= classes || p < 0 || p >= classes) {
      throw std::out_of_range("evaluate: label out of range at position " + std::to_string(i));
    }
    ++m.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }

  std::size_t correct = 0;
  std::size_t present = 0;
  m.per_class.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t support = 0, predicted = 0;
    for (std::size_t k = 0; k < C; ++k) {
      support += m.confusion[c][k];
      predicted += m.confusion[k][c];
    }
    const std::size_t tp = m.confusion[c][c];
    correct += tp;
    ClassMetrics& cm = m.per_class[c];
    cm.support = support;
    cm.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    cm.recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    const double pr = cm.precision + cm.recall;
    cm.f1 = pr > 0.0 ? 2.0 * cm.precision * cm.recall / pr : 0.0;
    m.weighted_f1 += cm.f1 * static_cast<double>(support);
    if (support > 0 || predicted > 0) {
      m.macro_f1 += cm.f1;
      ++present;
    }
  }
  const double n = static_cast<double>(m.count);
  m.weighted_f1 /= n;
  m.macro_f1 /= static_cast<double>(present);
  m.accuracy = static_cast<double>(correct) / n;
  return m;
}

double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
  // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) on the other side.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(1.0 - x, b, a);

  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 10000; ++m) {
    const double md = m;
    double num = md * (b - md) * x / ((a + 2 * md - 1.0) * (a + 2 * md));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    f *= d * c;

    num = -(a + md) * (a + b + md) * x / ((a + 2 * md) * (a + 2 * md + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_front) * f / a;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw DomainError("student_t_cdf: df must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(df / (df + t * t), 0.5 * df, 0.5);
  return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("paired_t_test: samples differ in length (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
  }
  if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least two pairs");
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (a[i] - b[i]) - mean;
    ss += e * e;
  }
  TTestResult r;
  r.df = n - 1;
  r.mean_difference = mean;
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) {
    if (mean == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = mean > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double df = static_cast<double>(r.df);
  r.p = incomplete_beta(df / (df + r.t * r.t), 0.5 * df, 0.5);
  return r;
}

}  // namespace mmfusion
