#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nstate/errors.hpp"

namespace nstate {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape);

// Row-major offset of a multi-index.
std::size_t ravel(const Shape& shape, std::span<const std::size_t> index);
std::vector<std::size_t> unravel(const Shape& shape, std::size_t offset);

// Dense row-major tensor. float is used for training, double for gradient
// verification.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    check_shape();
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_size(shape_))
      throw ContractError("tensor data size " + std::to_string(data_.size()) +
                          " does not match shape " + shape_str(shape_));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  template <typename... I>
  T& at(I... idx) {
    return data_[offset_of(idx...)];
  }
  template <typename... I>
  const T& at(I... idx) const {
    return data_[offset_of(idx...)];
  }

  // Same data, new shape of equal size.
  void reshape(Shape shape) {
    if (shape_size(shape) != data_.size())
      throw ContractError("cannot reshape " + shape_str(shape_) + " to " +
                          shape_str(shape));
    shape_ = std::move(shape);
    check_shape();
  }
  Tensor reshaped(Shape shape) const {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  void check_shape() const {
    for (auto d : shape_)
      if (d == 0) throw ContractError("tensor dims must be >= 1, got " + shape_str(shape_));
  }

  template <typename... I>
  std::size_t offset_of(I... idx) const {
    const std::size_t ix[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t a = 0; a < sizeof...(I); ++a) off = off * shape_[a] + ix[a];
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace nstate
