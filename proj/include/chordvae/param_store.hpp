#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chordvae/tensor.hpp"

namespace chordvae {

using Gradients = std::vector<Tensor>;

// Named parameter tensors with paired gradient accumulators. Indices are
// stable for the lifetime of the store.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor init);

  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;
  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;

  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& grad(std::size_t i) const { return grads_[i]; }
  Tensor& grad(std::size_t i) { return grads_[i]; }
  Gradients& grads() { return grads_; }
  const Gradients& grads() const { return grads_; }

  // Zero-filled buffers shaped like the parameters.
  Gradients zero_gradients() const;
  void zero_grad();
  void accumulate(const Gradients& g);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  Gradients grads_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

}  // namespace chordvae
