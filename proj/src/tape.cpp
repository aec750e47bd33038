#include "chordvae/tape.hpp"

#include "chordvae/error.hpp"

namespace chordvae {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(const ParamStore& store, std::size_t index) {
  if (store_ != nullptr && store_ != &store) {
    throw ValidationError("tape already bound to a different parameter store");
  }
  store_ = &store;
  Node n;
  n.external = &store.value(index);
  n.requires_grad = true;
  Var v = push(std::move(n));
  param_bindings_.emplace_back(v.id(), index);
  return v;
}

Var Tape::param(const ParamStore& store, std::string_view name) {
  return param(store, store.index(name));
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) throw ValidationError("node has no gradient; call backward() first");
  return n.grad;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ValidationError("operands recorded on different tapes");
    if (nodes_[in.id()].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ValidationError("loss recorded on a different tape");
  if (value(loss.id()).size() != 1) {
    throw ValidationError("backward() needs a scalar loss, got shape " +
                          value(loss.id()).shape_string());
  }
  if (swept_) throw ValidationError("backward() already called on this tape");
  swept_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.has_grad && n.backward) n.backward(*this, id);
  }
}

void Tape::accumulate_param_grads(Gradients& out) const {
  for (const auto& [node, index] : param_bindings_) {
    const Node& n = nodes_[node];
    if (!n.has_grad) continue;
    if (index >= out.size() || !out[index].same_shape(n.grad)) {
      throw ValidationError("gradient buffer does not match parameter store");
    }
    auto dst = out[index].data();
    auto src = n.grad.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

}  // namespace chordvae
