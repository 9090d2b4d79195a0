#include "mmt/optim.hpp"

#include <cmath>

#include "mmt/error.hpp"

namespace mmt {

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.values()) sq += g * g;
  }
  return std::sqrt(sq);
}

void sgd_step(std::span<Parameter* const> params, double learning_rate, std::optional<double> clip_norm) {
  if (!(learning_rate > 0.0)) {
    throw Error(Errc::invalid_argument, "sgd_step: learning rate must be positive");
  }
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) throw Error(Errc::non_finite, "sgd_step: non-finite gradient in " + p->name);
  }
  if (clip_norm) {
    const double norm = global_grad_norm(params);
    if (norm > *clip_norm) {
      const double factor = *clip_norm / norm;
      for (Parameter* p : params) {
        for (double& g : p->grad.values()) g *= factor;
      }
    }
  }
  for (Parameter* p : params) {
    auto value = p->value.values();
    auto grad = p->grad.values();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= learning_rate * grad[i];
  }
}

}  // namespace mmt
