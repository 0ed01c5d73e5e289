#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mmfusion {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  int classes = 0;
  std::size_t count = 0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<ClassMetrics> per_class;
  double weighted_f1 = 0.0;
  /// Unweighted mean over classes that occur in the targets or predictions.
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

/// Per-class F1 is 2PR/(P+R), or 0 when P+R = 0; weighted F1 averages it
/// by class support. Throws on empty or unequal inputs and out-of-range
/// labels.
Metrics evaluate(std::span<const int> predictions, std::span<const int> targets, int classes);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double mean_difference = 0.0;
  std::size_t df = 0;
};

/// Paired two-sided t-test on a - b with n - 1 degrees of freedom.
/// Differences with zero spread give t = +inf (or -inf) and p = 0 when their
/// mean is nonzero, and t = 0, p = 1 when they are all zero.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double x, double a, double b);

/// CDF of Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

}  // namespace mmfusion
