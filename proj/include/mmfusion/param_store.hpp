#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmfusion/matrix.hpp"

namespace mmfusion {

/// A trainable tensor and its accumulated gradient.
struct Param {
  Param() = default;
  Param(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.fill(0.0); }
};

/// Non-owning view over the parameters of one model, in registration order.
///
/// Models own their Params; a store is rebuilt from the model on demand and
/// must not outlive it.
class ParamStore {
 public:
  /// Throws if the name is already registered or the grad shape differs.
  void add(Param& p);

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return *params_[i]; }
  const Param& operator[](std::size_t i) const { return *params_[i]; }
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grads();
  std::size_t scalar_count() const;
  double grad_norm() const;

 private:
  std::vector<Param*> params_;
};

}  // namespace mmfusion
