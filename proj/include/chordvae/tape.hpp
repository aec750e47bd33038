#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string_view>
#include <vector>

#include "chordvae/param_store.hpp"
#include "chordvae/tensor.hpp"

namespace chordvae {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  double item() const { return value().item(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode computation tape. Nodes are appended in evaluation order, so
// a reverse sweep visits every consumer before its producers.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  // Binds a parameter by reference; the store must outlive the tape.
  Var param(const ParamStore& store, std::size_t index);
  Var param(const ParamStore& store, std::string_view name);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }
  Tensor& grad(std::size_t id);
  const Tensor& grad(Var v) const;

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once.
  void backward(Var loss);

  // Adds the gradients of every bound parameter into `out` (indexed like the
  // store passed to param()).
  void accumulate_param_grads(Gradients& out) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> param_bindings_;
  const ParamStore* store_ = nullptr;
  bool swept_ = false;
};

}  // namespace chordvae
