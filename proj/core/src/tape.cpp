#include "mmt/tape.hpp"

#include "mmt/error.hpp"

namespace mmt {

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

const Tensor& Var::value() const {
  if (tape == nullptr) throw Error(Errc::not_on_tape, "variable is not bound to a tape");
  return tape->value(id);
}

Tape::Tape(Mode mode, std::uint64_t dropout_seed) : mode_(mode), dropout_rng_(dropout_seed, "dropout") {}

void Tape::track(std::span<Parameter* const> params) {
  for (Parameter* p : params) tracked_[p] = p;
}

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(const Parameter& param) {
  if (auto it = leaves_.find(&param); it != leaves_.end()) return {this, it->second};
  Node node;
  node.external = &param.value;
  if (training()) {
    if (auto it = tracked_.find(&param); it != tracked_.end()) {
      node.target = it->second;
      node.needs_grad = true;
    }
  }
  nodes_.push_back(std::move(node));
  leaves_.emplace(&param, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node node;
  node.owned = std::move(value);
  if (training() && backward) {
    for (std::size_t in : inputs) {
      if (in >= nodes_.size()) {
        throw Error(Errc::not_on_tape, "op input " + std::to_string(in) + " is not on the tape");
      }
      node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
    }
    if (node.needs_grad) {
      node.inputs = std::move(inputs);
      node.backward = std::move(backward);
    }
  }
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  if (id >= nodes_.size()) throw Error(Errc::not_on_tape, "node " + std::to_string(id) + " is not on the tape");
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this || loss.id >= nodes_.size()) {
    throw Error(Errc::not_on_tape, "loss was not produced on this tape");
  }
  if (value(loss.id).size() != 1) {
    throw Error(Errc::shape_mismatch, "backward needs a scalar loss, got " + to_string(value(loss.id).shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id].needs_grad) return;

  grad(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, i);
    } else if (n.target != nullptr) {
      auto dst = n.target->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

}  // namespace mmt
