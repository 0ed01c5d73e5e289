#include "mmfusion/dense.hpp"

#include <cmath>

#include "mmfusion/kernels.hpp"

namespace mmfusion {

DenseLayer::DenseLayer(const std::string& name, std::size_t in_dim, std::size_t out_dim,
                       Activation act)
    : weight(name + ".W", out_dim, in_dim), bias(name + ".b", out_dim, 1), act_(act) {}

void DenseLayer::init(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
  for (double& w : weight.value.data()) w = (2.0 * rng.uniform() - 1.0) * limit;
  bias.value.fill(0.0);
}

Matrix DenseLayer::pre_activation(const Matrix& x) const {
  if (x.rows() != in_dim()) {
    throw ShapeError("dense layer '" + weight.name + "': input " + x.shape_str() +
                     " but layer expects " + std::to_string(in_dim()) + " rows");
  }
  Matrix z = matmul(weight.value, x);
  add_col_broadcast(z, bias.value);
  return z;
}

Matrix DenseLayer::forward(const Matrix& x) {
  cached_pre_ = pre_activation(x);
  cached_input_ = x;
  return activation(act_, cached_pre_);
}

Matrix DenseLayer::infer(const Matrix& x) const { return activation(act_, pre_activation(x)); }

Matrix DenseLayer::backward(const Matrix& grad_out) {
  if (cached_input_.empty()) {
    throw StateError("dense layer '" + weight.name + "': backward called before forward");
  }
  if (!grad_out.same_shape(cached_pre_)) {
    throw ShapeError("dense layer '" + weight.name + "': grad " + grad_out.shape_str() +
                     " does not match forward output " + cached_pre_.shape_str());
  }
  Matrix grad_pre = act_ == Activation::kIdentity
                        ? grad_out
                        : hadamard(grad_out, activation_derivative(act_, cached_pre_));
  weight.grad += matmul_nt(grad_pre, cached_input_);
  bias.grad += row_sums(grad_pre);
  return matmul_tn(weight.value, grad_pre);
}

void DenseLayer::collect(ParamStore& store) {
  store.add(weight);
  store.add(bias);
}

void DenseLayer::clear_cache() {
  cached_input_ = Matrix();
  cached_pre_ = Matrix();
}

}  // namespace mmfusion
