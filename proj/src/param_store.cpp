#include "mmfusion/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace mmfusion {

void ParamStore::add(Param& p) {
  if (find(p.name) != nullptr) {
    throw std::invalid_argument("duplicate parameter name '" + p.name + "'");
  }
  if (!p.grad.same_shape(p.value)) {
    throw ShapeError("parameter '" + p.name + "': grad " + p.grad.shape_str() +
                     " vs value " + p.value.shape_str());
  }
  params_.push_back(&p);
}

Param* ParamStore::find(const std::string& name) {
  for (Param* p : params_)
    if (p->name == name) return p;
  return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
  for (const Param* p : params_)
    if (p->name == name) return p;
  return nullptr;
}

void ParamStore::zero_grads() {
  for (Param* p : params_) p->zero_grad();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Param* p : params_) n += p->value.size();
  return n;
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const Param* p : params_)
    for (double g : p->grad.data()) s += g * g;
  return std::sqrt(s);
}

}  // namespace mmfusion
