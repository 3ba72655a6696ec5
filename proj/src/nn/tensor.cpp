#include "spf/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace spf::nn {

std::string Shape::to_string() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + "]";
}

template <typename T>
bool BasicTensor<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
BasicTensor<T> stack_batch(std::span<const BasicTensor<T>> items) {
  if (items.empty()) throw ShapeError("stack_batch: no tensors");
  const Shape first = items.front().shape();
  Shape out_shape = first;
  out_shape.n = 0;
  for (const auto& t : items) {
    const Shape s = t.shape();
    if (s.c != first.c || s.h != first.h || s.w != first.w) {
      throw ShapeError("stack_batch: " + s.to_string() + " incompatible with " +
                       first.to_string());
    }
    out_shape.n += s.n;
  }
  std::vector<T> data;
  data.reserve(out_shape.size());
  for (const auto& t : items) data.insert(data.end(), t.data().begin(), t.data().end());
  return BasicTensor<T>(out_shape, std::move(data));
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> stack_batch(std::span<const BasicTensor<float>>);
template BasicTensor<double> stack_batch(std::span<const BasicTensor<double>>);

}  // namespace spf::nn
