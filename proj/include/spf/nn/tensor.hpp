#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spf/common/errors.hpp"

namespace spf::nn {

// Extents of a rank-4 tensor in N (batch), C (channels), H (rows), W (cols)
// order.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t size() const noexcept { return n * c * h * w; }
  constexpr std::size_t plane() const noexcept { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string to_string() const;
};

// Dense row-major N->C->H->W array. A plain value type: copies are deep and
// the element count always equals shape().size().
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(shape), data_(shape.size(), fill) {}
  BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.to_string());
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[offset(n, c, h, w)];
  }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[offset(n, c, h, w)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  T operator[](std::size_t i) const noexcept { return data_[i]; }

  // Contiguous view of one batch item (C*H*W values).
  std::span<T> item(std::size_t n) noexcept {
    const std::size_t stride = shape_.c * shape_.h * shape_.w;
    return std::span<T>(data_).subspan(n * stride, stride);
  }
  std::span<const T> item(std::size_t n) const noexcept {
    const std::size_t stride = shape_.c * shape_.h * shape_.w;
    return std::span<const T>(data_).subspan(n * stride, stride);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool all_finite() const noexcept;

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

// Stacks rank-4 tensors of identical per-item shape along the batch axis.
template <typename T>
BasicTensor<T> stack_batch(std::span<const BasicTensor<T>> items);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace spf::nn
