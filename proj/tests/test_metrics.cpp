#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mmfusion/metrics.hpp"
#include "mmfusion/rng.hpp"

using namespace mmfusion;

namespace {

struct Counted {
  double weighted = 0, macro = 0, accuracy = 0;
  std::vector<double> f1;
};

// Independent recount: per class, tally TP/FP/FN straight from the pairs.
Counted brute_force(const std::vector<int>& pred, const std::vector<int>& target, int classes) {
  Counted out;
  const double n = static_cast<double>(pred.size());
  double correct = 0, present = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == target[i];
  for (int c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && target[i] == c) tp += 1;
      if (pred[i] == c && target[i] != c) fp += 1;
      if (pred[i] != c && target[i] == c) fn += 1;
      if (target[i] == c) support += 1;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    out.f1.push_back(f1);
    out.weighted += support / n * f1;
    if (tp + fp + fn > 0) {
      out.macro += f1;
      present += 1;
    }
  }
  out.macro /= present;
  out.accuracy = correct / n;
  return out;
}

// Two-sided p by Simpson integration of the Student-t density over [0, |t|].
double reference_p(double t, double df) {
  const double logc = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) -
                      0.5 * std::log(df * std::numbers::pi);
  auto density = [&](double x) { return std::exp(logc - (df + 1) / 2 * std::log1p(x * x / df)); };
  const double a = std::fabs(t);
  const int n = 200000;
  const double h = a / n;
  double s = density(0) + density(a);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * density(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

}  // namespace

TEST(Evaluate, AllCorrect) {
  const std::vector<int> y{0, 1, 2, 1, 0};
  const Metrics m = evaluate(y, y, 3);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.weighted_f1, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
  EXPECT_EQ(m.count, 5u);
}

TEST(Evaluate, MajorityPredictorOnBalancedBinary) {
  const std::vector<int> target{0, 0, 1, 1}, pred{0, 0, 0, 0};
  const Metrics m = evaluate(pred, target, 2);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.per_class[0].f1, 2.0 / 3.0);
  EXPECT_EQ(m.per_class[1].f1, 0.0);
  EXPECT_DOUBLE_EQ(m.weighted_f1, 1.0 / 3.0);
  EXPECT_EQ(m.per_class[0].precision, 0.5);
  EXPECT_EQ(m.per_class[0].recall, 1.0);
}

TEST(Evaluate, SingleClassPresent) {
  const std::vector<int> y{2, 2, 2};
  const Metrics m = evaluate(y, y, 4);
  EXPECT_EQ(m.weighted_f1, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
  EXPECT_EQ(m.per_class[0].support, 0u);
  EXPECT_EQ(m.per_class[2].support, 3u);
}

TEST(Evaluate, ConfusionRowsSumToSupport) {
  const std::vector<int> target{0, 1, 1, 2, 2, 2}, pred{1, 1, 0, 2, 2, 1};
  const Metrics m = evaluate(pred, target, 3);
  EXPECT_EQ(m.confusion[0][1], 1u);
  EXPECT_EQ(m.confusion[1][0], 1u);
  EXPECT_EQ(m.confusion[2][2], 2u);
  for (int c = 0; c < 3; ++c) {
    std::size_t row = 0;
    for (std::size_t v : m.confusion[static_cast<std::size_t>(c)]) row += v;
    EXPECT_EQ(row, m.per_class[static_cast<std::size_t>(c)].support);
  }
}

TEST(Evaluate, MatchesBruteForceOnRandomSets) {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const int classes = 2 + static_cast<int>(rng.uniform_index(5));
    const std::size_t n = 1 + rng.uniform_index(200);
    std::vector<int> pred(n), target(n);
    for (std::size_t i = 0; i < n; ++i) {
      target[i] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
      // Bias toward agreement so every regime shows up.
      pred[i] = rng.uniform() < 0.6 ? target[i]
                                    : static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
    }
    const Metrics m = evaluate(pred, target, classes);
    const Counted ref = brute_force(pred, target, classes);
    EXPECT_EQ(m.accuracy, ref.accuracy);
    EXPECT_NEAR(m.weighted_f1, ref.weighted, 1e-15);
    EXPECT_NEAR(m.macro_f1, ref.macro, 1e-15);
    for (int c = 0; c < classes; ++c) EXPECT_EQ(m.per_class[static_cast<std::size_t>(c)].f1, ref.f1[static_cast<std::size_t>(c)]);
    EXPECT_GE(m.weighted_f1, 0.0);
    EXPECT_LE(m.weighted_f1, 1.0);
  }
}

TEST(Evaluate, RejectsBadInput) {
  const std::vector<int> a{0, 1}, b{0}, empty, bad{0, 3};
  EXPECT_THROW(evaluate(a, b, 2), std::invalid_argument);
  EXPECT_THROW(evaluate(empty, empty, 2), std::invalid_argument);
  EXPECT_THROW(evaluate(bad, a, 2), std::out_of_range);
  EXPECT_THROW(evaluate(a, bad, 2), std::out_of_range);
}

TEST(TTest, ReferenceExample) {
  const std::vector<double> a{1, 2, 3}, b{0, 0, 0};
  const TTestResult r = paired_t_test(a, b);
  EXPECT_NEAR(r.t, 3.4641, 1e-4);
  EXPECT_NEAR(r.p, 0.0742, 1e-4);
  EXPECT_EQ(r.df, 2u);
  EXPECT_EQ(r.mean_difference, 2.0);
  // Closed form for two degrees of freedom.
  EXPECT_NEAR(r.p, 1.0 - r.t / std::sqrt(2.0 + r.t * r.t), 1e-12);
}

TEST(TTest, SignFollowsDirection) {
  const std::vector<double> a{0.71, 0.74, 0.69, 0.73}, b{0.70, 0.72, 0.70, 0.70};
  const TTestResult ab = paired_t_test(a, b), ba = paired_t_test(b, a);
  EXPECT_GT(ab.t, 0.0);
  EXPECT_DOUBLE_EQ(ab.t, -ba.t);
  EXPECT_DOUBLE_EQ(ab.p, ba.p);
}

TEST(TTest, DegenerateSpread) {
  const std::vector<double> a{1, 2, 3}, same{1, 2, 3}, shifted{0, 1, 2};
  TTestResult r = paired_t_test(a, same);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
  r = paired_t_test(a, shifted);
  EXPECT_TRUE(std::isinf(r.t));
  EXPECT_GT(r.t, 0.0);
  EXPECT_EQ(r.p, 0.0);
  const std::vector<double> one{1.0}, two{1.0, 2.0};
  EXPECT_THROW(paired_t_test(one, one), std::invalid_argument);
  EXPECT_THROW(paired_t_test(a, two), std::invalid_argument);
}

TEST(TTest, CauchyClosedForm) {
  for (double t : {0.1, 1.0, 3.0, 12.0, 100.0}) {
    EXPECT_NEAR(student_t_cdf(t, 1.0), 0.5 + std::atan(t) / std::numbers::pi, 1e-12);
    EXPECT_NEAR(student_t_cdf(-t, 1.0), 0.5 - std::atan(t) / std::numbers::pi, 1e-12);
  }
  EXPECT_EQ(student_t_cdf(0.0, 7.0), 0.5);
}

TEST(TTest, PMatchesNumericalIntegration) {
  Rng rng(8);
  for (std::size_t n = 2; n <= 50; ++n) {
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.normal() + 0.3;
      b[i] = rng.normal();
    }
    const TTestResult r = paired_t_test(a, b);
    EXPECT_NEAR(r.p, reference_p(r.t, static_cast<double>(n - 1)), 1e-6) << "n=" << n;
  }
}

TEST(IncompleteBeta, KnownValues) {
  EXPECT_EQ(incomplete_beta(0.0, 2.0, 3.0), 0.0);
  EXPECT_EQ(incomplete_beta(1.0, 2.0, 3.0), 1.0);
  EXPECT_NEAR(incomplete_beta(0.3, 1.0, 1.0), 0.3, 1e-14);
  // I_x(a, 1) = x^a and I_x(1, b) = 1 - (1 - x)^b.
  EXPECT_NEAR(incomplete_beta(0.4, 3.5, 1.0), std::pow(0.4, 3.5), 1e-13);
  EXPECT_NEAR(incomplete_beta(0.4, 1.0, 2.5), 1.0 - std::pow(0.6, 2.5), 1e-13);
  // Symmetry.
  EXPECT_NEAR(incomplete_beta(0.7, 2.0, 5.0), 1.0 - incomplete_beta(0.3, 5.0, 2.0), 1e-14);
}
