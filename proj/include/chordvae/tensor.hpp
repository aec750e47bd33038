#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace chordvae {

// Dense row-major array of doubles with up to three axes. Most of the code
// works with rank-2 tensors (frames x features).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Tensor from_values(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor scalar(double value) { return Tensor(1, 1, value); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors. A rank-1 tensor is viewed as a single row.
  std::size_t rows() const { return shape_.size() == 1 ? 1 : shape_[0]; }
  std::size_t cols() const {
    if (shape_.size() == 1) return shape_[0];
    return shape_.size() == 2 ? shape_[1] : shape_[1] * shape_[2];
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t i, std::size_t j, std::size_t k);
  double at(std::size_t i, std::size_t j, std::size_t k) const;
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

  void fill(double value);
  double item() const;  // value of a single-element tensor

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace chordvae
