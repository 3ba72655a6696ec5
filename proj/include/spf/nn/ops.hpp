#pragma once

// Forward and backward kernels for the layer set the classifier uses. These
// are plain functions over tensors; Graph wires them into a tape.

#include <cstddef>
#include <span>
#include <vector>

#include "spf/nn/tensor.hpp"

namespace spf::nn {

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
};

// Output extent of a convolution along one axis.
constexpr std::size_t conv_out_extent(std::size_t in, std::size_t kernel, int stride, int padding) {
  return (in + 2 * static_cast<std::size_t>(padding) - kernel) / static_cast<std::size_t>(stride) + 1;
}

// Cross-correlation of input [N,C,H,W] with weight [F,C,kh,kw] plus a per
// filter bias of length F.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      std::span<const T> bias, ConvGeometry geom);

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> input;  // empty when not requested
  BasicTensor<T> weight;
  std::vector<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_output, ConvGeometry geom,
                               bool need_input_grad);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

// 2x2 window, stride 2. H and W must be even.
template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input);

// Routes each window's gradient to its first maximal element.
template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_output);

// input [N,D,1,1], weight [Dout,D,1,1], bias length Dout -> [N,Dout,1,1].
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      std::span<const T> bias);

template <typename T>
struct LinearGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  std::vector<T> bias;
};

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_output);

// Concatenates along the channel axis; all inputs share N, H, W.
template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>* const> inputs);

// Numerically stable softmax (max subtraction). Requires at least 2 logits.
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

// -log(probabilities[target]).
template <typename T>
T cross_entropy(std::span<const T> probabilities, std::size_t target);

template <typename T>
struct SoftmaxCrossEntropy {
  T loss{};                      // mean over the batch
  BasicTensor<T> probabilities;  // [N,K,1,1]
  BasicTensor<T> grad_logits;    // (p - onehot) / N
};

// logits [N,K,1,1]; one target class per batch row.
template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                             std::span<const int> targets);

}  // namespace spf::nn
