#include "mmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmt/error.hpp"
#include "mmt/optim.hpp"

namespace mmt {

namespace {

double evaluate(const LossBuilder& loss, std::uint64_t dropout_seed) {
  Tape tape(Mode::training, dropout_seed);
  const double v = loss(tape).value()[0];
  if (!std::isfinite(v)) throw Error(Errc::non_finite, "finite_difference_check: loss evaluated to a non-finite value");
  return v;
}

}  // namespace

double finite_difference_check(const LossBuilder& loss, std::span<Parameter* const> params,
                               const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0 && options.epsilon <= 1e-2)) {
    throw Error(Errc::invalid_argument, "finite_difference_check: epsilon must lie in (0, 1e-2]");
  }
  zero_grads(params);
  {
    Tape tape(Mode::training, options.dropout_seed);
    tape.track(params);
    Var out = loss(tape);
    if (!std::isfinite(out.value()[0])) {
      throw Error(Errc::non_finite, "finite_difference_check: loss evaluated to a non-finite value");
    }
    tape.backward(out);
  }

  Rng rng(options.seed, "gradcheck");
  double worst = 0.0;
  for (Parameter* p : params) {
    std::vector<std::size_t> coords(p->value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > options.coords_per_param) {
      rng.shuffle(coords);
      coords.resize(options.coords_per_param);
    }
    for (std::size_t i : coords) {
      const double original = p->value[i];
      p->value[i] = original + options.epsilon;
      const double up = evaluate(loss, options.dropout_seed);
      p->value[i] = original - options.epsilon;
      const double down = evaluate(loss, options.dropout_seed);
      p->value[i] = original;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double analytic = p->grad[i];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1e-8, std::abs(numeric)));
    }
  }
  return worst;
}

}  // namespace mmt
