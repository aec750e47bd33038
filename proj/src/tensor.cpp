#include "chordvae/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "chordvae/error.hpp"

namespace chordvae {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 3) {
    throw ValidationError("tensor rank must be 1..3, got " + std::to_string(shape_.size()));
  }
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                        std::multiplies<>());
  data_.assign(n, fill);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : Tensor(std::vector<std::size_t>{rows, cols}, fill) {}

Tensor Tensor::from_values(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) {
    throw ValidationError("tensor value count " + std::to_string(values.size()) +
                          " does not match shape [" + std::to_string(rows) + "," +
                          std::to_string(cols) + "]");
  }
  Tensor t;
  t.shape_ = {rows, cols};
  t.data_ = std::move(values);
  return t;
}

double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ValidationError("item() on tensor of shape " + shape_string());
  }
  return data_[0];
}

}  // namespace chordvae
