#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmt/rng.hpp"
#include "mmt/tensor.hpp"

namespace mmt {

/// Trainable weight with its gradient accumulator.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
};

enum class Mode { training, inference };

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Records executed operations so gradients can be propagated back to
/// parameter leaves. In inference mode nothing is recorded for backward and
/// dropout is the identity; values are still kept so nodes can be reused.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(Mode mode = Mode::training, std::uint64_t dropout_seed = 0);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training() const noexcept { return mode_ == Mode::training; }
  Rng& dropout_rng() noexcept { return dropout_rng_; }

  /// Parameters whose gradients backward() accumulates into.
  void track(std::span<Parameter* const> params);

  Var constant(Tensor value);
  /// Leaf that refers to the parameter value without copying it. The same
  /// parameter always maps to the same node.
  Var parameter(const Parameter& param);

  /// Appends an op output. `backward` may be empty for non-differentiable results.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Propagates d(loss)/d(node) through the tape and adds the result into the
  /// grad of every tracked parameter reachable from `loss`.
  void backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* target = nullptr;
    Tensor grad;
    bool needs_grad = false;
  };

  Mode mode_;
  Rng dropout_rng_;
  std::deque<Node> nodes_;  // deque: Var::value() references stay valid as the tape grows
  std::unordered_map<const Parameter*, Parameter*> tracked_;
  std::unordered_map<const Parameter*, std::size_t> leaves_;
};

}  // namespace mmt
