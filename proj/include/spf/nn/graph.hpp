#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spf/nn/ops.hpp"
#include "spf/nn/parameter.hpp"
#include "spf/nn/tensor.hpp"

namespace spf::nn {

// Handle to a value recorded on a Graph.
struct Var {
  std::size_t index = 0;
};

// Tape of executed forward ops. Every op saves the activations its backward
// needs; backward() walks the tape once in reverse and accumulates
// d(loss)/d(parameter) into each Parameter::grad(). Gradients accumulate, so
// callers zero them between steps. A graph supports exactly one backward.
template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Input data; no gradient is propagated into it.
  Var constant(BasicTensor<T> value);
  // Read-only view of a tensor owned elsewhere (e.g. frozen weights).
  Var constant_ref(const BasicTensor<T>& value);
  // Trainable leaf; backward accumulates into param.grad().
  Var parameter(BasicParameter<T>& param);

  Var conv2d(Var input, Var weight, Var bias, ConvGeometry geom);
  Var relu(Var input);
  Var maxpool2d(Var input);
  Var global_avg_pool(Var input);
  Var linear(Var input, Var weight, Var bias);
  Var concat_channels(std::span<const Var> inputs);
  // Mean softmax cross-entropy over the batch; a [1,1,1,1] scalar.
  Var softmax_cross_entropy(Var logits, std::vector<int> targets);

  const BasicTensor<T>& value(Var v) const { return nodes_.at(v.index).value(); }
  std::size_t size() const noexcept { return nodes_.size(); }

  void backward(Var loss);

  // Identifies the linear piece of the recorded function: the sign of every
  // ReLU input and the argmax of every pooling window. Two forward passes
  // with equal signatures lie on the same piece.
  std::vector<std::uint8_t> region_signature() const;

 private:
  enum class Kind : std::uint8_t { Leaf, Relu, MaxPool, Other };

  struct Node {
    Kind kind = Kind::Other;
    Var input{};
    BasicTensor<T> owned;
    const BasicTensor<T>* ref = nullptr;
    BasicParameter<T>* param = nullptr;
    bool requires_grad = false;
    BasicTensor<T> grad;
    std::function<void(Graph&, const BasicTensor<T>& grad)> backward;

    const BasicTensor<T>& value() const { return ref != nullptr ? *ref : owned; }
  };

  Var push(Node node);
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  void accumulate(Var v, const BasicTensor<T>& grad);
  void accumulate(Var v, std::span<const T> grad);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace spf::nn
