#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "mmt/tape.hpp"

namespace mmt {

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Coordinates sampled per parameter; parameters with fewer entries are checked exhaustively.
  std::size_t coords_per_param = 20;
  std::uint64_t seed = 0;
  /// Seed for the dropout stream of every tape the loss is built on, so
  /// repeated evaluations see identical masks.
  std::uint64_t dropout_seed = 0;
};

using LossBuilder = std::function<Var(Tape&)>;

/// Compares backward() against central differences of the loss built by
/// `loss`. Returns the largest |analytic - numeric| / max(1e-8, |numeric|)
/// over the sampled coordinates. Parameter values are restored on return.
double finite_difference_check(const LossBuilder& loss, std::span<Parameter* const> params,
                               const GradCheckOptions& options = {});

}  // namespace mmt
