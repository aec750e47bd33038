#include "chordvae/param_store.hpp"

#include "chordvae/error.hpp"

namespace chordvae {

std::size_t ParamStore::add(std::string name, Tensor init) {
  if (lookup_.count(name)) throw ValidationError("duplicate parameter name '" + name + "'");
  const std::size_t i = values_.size();
  lookup_.emplace(name, i);
  names_.push_back(std::move(name));
  grads_.emplace_back(init.shape(), 0.0);
  values_.push_back(std::move(init));
  return i;
}

bool ParamStore::contains(std::string_view name) const {
  return lookup_.count(std::string(name)) > 0;
}

std::size_t ParamStore::index(std::string_view name) const {
  auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) throw ValidationError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

Gradients ParamStore::zero_gradients() const {
  Gradients g;
  g.reserve(values_.size());
  for (const auto& v : values_) g.emplace_back(v.shape(), 0.0);
  return g;
}

void ParamStore::zero_grad() {
  for (auto& g : grads_) g.fill(0.0);
}

void ParamStore::accumulate(const Gradients& g) {
  if (g.size() != grads_.size()) throw ValidationError("gradient set size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto dst = grads_[i].data();
    auto src = g[i].data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

}  // namespace chordvae
