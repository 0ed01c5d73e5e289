#include "mmfusion/kernels.hpp"

#include <cstdint>

namespace mmfusion {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::int64_t kParallelWork = 1 << 16;

std::int64_t work(std::size_t m, std::size_t k, std::size_t n) {
  return static_cast<std::int64_t>(m) * static_cast<std::int64_t>(k) *
         static_cast<std::int64_t>(n);
}

void check_inner(std::size_t lhs, std::size_t rhs, const Matrix& a, const Matrix& b,
                 const char* op) {
  if (lhs != rhs) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " and " +
                     b.shape_str());
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), a, b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix c(m, n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (work(m, k, n) > kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    double* crow = cd + i * n;
    const double* arow = ad + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), a, b, "matmul_tn");
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  Matrix c(m, n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (work(m, k, n) > kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    double* crow = cd + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[p * m + i];
      const double* brow = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), a, b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix c(m, n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (work(m, k, n) > kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* arow = ad + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = bd + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      cd[i * n + j] = s;
    }
  }
  return c;
}

void add_col_broadcast(Matrix& m, const Matrix& column) {
  if (column.rows() != m.rows() || column.cols() != 1) {
    throw ShapeError("add_col_broadcast: " + column.shape_str() + " onto " + m.shape_str());
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double v = column(r, 0);
    for (double& x : m.row(r)) x += v;
  }
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), a, b, "matmul");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), a, b, "matmul_tn");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.rows(); ++p) s += a(p, i) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), a, b, "matmul_nt");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(j, p);
      c(i, j) = s;
    }
  return c;
}

}  // namespace serial

}  // namespace mmfusion
