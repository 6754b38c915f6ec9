#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "agmax/error.hpp"
#include "agmax/rng.hpp"

namespace agmax::diff {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

/**
 * Dense row-major tensor. The scalar type is double on the default loss and
 * gradient path; float is available behind the same interface for the
 * single-precision configuration.
 */
template <typename T>
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(shape_numel(shape_), T{0}) {}

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw Error("Tensor: data length " + std::to_string(data_.size()) +
                  " does not match shape " + ShapeError::to_string(shape_));
    }
  }

  static Tensor scalar(T value) { return Tensor({}, {value}); }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor uniform(Shape shape, RngStream& rng, T lo, T hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) {
      v = lo + static_cast<T>(rng.next_double()) * (hi - lo);
    }
    return t;
  }

  static Tensor gaussian(Shape shape, RngStream& rng, T sigma) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = sigma * static_cast<T>(rng.next_gaussian());
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const T& at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool is_scalar() const { return numel() == 1 && shape_.empty(); }

  T scalar_value() const {
    if (numel() != 1) {
      throw Error("Tensor: scalar_value on tensor with " +
                  std::to_string(numel()) + " elements");
    }
    return data_[0];
  }

  /// All values finite. NaN/Inf anywhere is an error state for the engine.
  bool all_finite() const {
    for (const T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace agmax::diff
