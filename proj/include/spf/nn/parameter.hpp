#pragma once

#include <span>
#include <string>

#include "spf/nn/tensor.hpp"

namespace spf::nn {

// A trainable tensor and its gradient accumulator. The gradient always has
// the value's shape.
template <typename T>
class BasicParameter {
 public:
  BasicParameter(std::string name, BasicTensor<T> value)
      : name_(std::move(name)), value_(std::move(value)), grad_(value_.shape()) {}

  const std::string& name() const noexcept { return name_; }
  const Shape& shape() const noexcept { return value_.shape(); }

  BasicTensor<T>& value() noexcept { return value_; }
  const BasicTensor<T>& value() const noexcept { return value_; }
  BasicTensor<T>& grad() noexcept { return grad_; }
  const BasicTensor<T>& grad() const noexcept { return grad_; }

  // Replaces the value; the new tensor must keep the shape.
  void assign(BasicTensor<T> value) {
    if (value.shape() != value_.shape()) {
      throw ShapeError("parameter " + name_ + ": cannot assign " + value.shape().to_string() +
                       " to " + value_.shape().to_string());
    }
    value_ = std::move(value);
  }

  void zero_grad() noexcept {
    for (T& g : grad_.data()) g = T{0};
  }

 private:
  std::string name_;
  BasicTensor<T> value_;
  BasicTensor<T> grad_;
};

using Parameter = BasicParameter<float>;

// value <- value - learning_rate * grad. Gradients are left untouched.
template <typename T>
void sgd_step(std::span<BasicParameter<T>* const> params, T learning_rate) {
  for (BasicParameter<T>* p : params) {
    auto value = p->value().data();
    auto grad = p->grad().data();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= learning_rate * grad[i];
  }
}

template <typename T>
void zero_grad(std::span<BasicParameter<T>* const> params) {
  for (BasicParameter<T>* p : params) p->zero_grad();
}

}  // namespace spf::nn
