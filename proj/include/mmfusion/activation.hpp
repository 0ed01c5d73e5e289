#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mmfusion/matrix.hpp"

namespace mmfusion {

enum class Activation { kIdentity, kRelu, kSoftplus, kSigmoid, kTanh };

std::string_view activation_name(Activation kind);

double relu(double x);
/// log(1 + e^x) without overflow for large |x|.
double softplus(double x);
double sigmoid(double x);

double apply_activation(Activation kind, double x);
/// Derivative with respect to the pre-activation x.
double activation_derivative(Activation kind, double x);

Matrix activation(Activation kind, const Matrix& x);
Matrix activation_derivative(Activation kind, const Matrix& x);

/// Softmax with max-subtraction; entries are strictly positive and sum to 1.
std::vector<double> softmax_stable(std::span<const double> logits);
/// Column-wise softmax over a C x N logits batch.
Matrix softmax_columns(const Matrix& logits);

}  // namespace mmfusion
