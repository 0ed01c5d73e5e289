#pragma once

#include "mmfusion/matrix.hpp"

namespace mmfusion {

// Matrix products used by every layer. The default entry points split the
// output rows across OpenMP threads; each output element is still summed in
// ascending inner-index order, so results do not depend on the thread count.

/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// transpose(a) * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * transpose(b)
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Adds a column vector to every column of m.
void add_col_broadcast(Matrix& m, const Matrix& column);

namespace serial {

// Textbook triple loops, kept as the reference for tests and the benchmark.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

}  // namespace serial

}  // namespace mmfusion
