#pragma once

#include <optional>
#include <span>

#include "mmt/tape.hpp"

namespace mmt {

void zero_grads(std::span<Parameter* const> params);

/// L2 norm of all gradients taken together.
double global_grad_norm(std::span<Parameter* const> params);

/// Plain SGD. When `clip_norm` is set and the global gradient norm exceeds it,
/// every gradient is rescaled by clip_norm / norm before the update. Gradients
/// are left in place (already rescaled, if clipping applied).
void sgd_step(std::span<Parameter* const> params, double learning_rate, std::optional<double> clip_norm = std::nullopt);

}  // namespace mmt
