#include "spf/nn/graph.hpp"

namespace spf::nn {

template <typename T>
Var Graph<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
void Graph<T>::accumulate(Var v, const BasicTensor<T>& grad) {
  accumulate(v, grad.data());
}

template <typename T>
void Graph<T>::accumulate(Var v, std::span<const T> grad) {
  Node& node = nodes_[v.index];
  if (!node.requires_grad) return;
  if (node.grad.empty()) node.grad = BasicTensor<T>(node.value().shape());
  auto dst = node.grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += grad[i];
}

template <typename T>
Var Graph<T>::constant(BasicTensor<T> value) {
  Node node;
  node.owned = std::move(value);
  return push(std::move(node));
}

template <typename T>
Var Graph<T>::constant_ref(const BasicTensor<T>& value) {
  Node node;
  node.ref = &value;
  return push(std::move(node));
}

template <typename T>
Var Graph<T>::parameter(BasicParameter<T>& param) {
  Node node;
  node.ref = &param.value();
  node.param = &param;
  node.requires_grad = true;
  return push(std::move(node));
}

template <typename T>
Var Graph<T>::conv2d(Var input, Var weight, Var bias, ConvGeometry geom) {
  Node node;
  node.owned = nn::conv2d(value(input), value(weight), value(bias).data(), geom);
  node.requires_grad = requires_grad(input) || requires_grad(weight) || requires_grad(bias);
  node.backward = [input, weight, bias, geom](Graph& g, const BasicTensor<T>& grad) {
    auto grads = conv2d_backward(g.value(input), g.value(weight), grad, geom, g.requires_grad(input));
    g.accumulate(weight, grads.weight);
    g.accumulate(bias, std::span<const T>(grads.bias));
    if (g.requires_grad(input)) g.accumulate(input, grads.input);
  };
  return push(std::move(node));
}

template <typename T>
Var Graph<T>::relu(Var input) {
  Node node;
  node.kind = Kind::Relu;
  node.input = input;
  node.owned = nn::relu(value(input));
  node.requires_grad = requires_grad(input);
  node.backward = [input](Graph& g, const BasicTensor<T>& grad) {
    g.accumulate(input, relu_backward(g.value(input), grad));
  };
  return push(std::move(node));
}

template <typename T>
Var Graph<T>::maxpool2d(Var input) {
  Node node;
  node.kind = Kind::MaxPool;
  node.input = input;
  node.owned = nn::maxpool2d(value(input));
  node.requires_grad = requires_grad(input);
  node.backward = [input](Graph& g, const BasicTensor<T>& grad) {
    g.accumulate(input, maxpool2d_backward(g.value(input), grad));
  };
  return push(std::move(node));
}

template <typename T>
Var Graph<T>::global_avg_pool(Var input) {
  Node node;
  node.owned = nn::global_avg_pool(value(input));
  node.requires_grad = requires_grad(input);
  node.backward = [input](Graph& g, const BasicTensor<T>& grad) {
    g.accumulate(input, global_avg_pool_backward(g.value(input).shape(), grad));
  };
  return push(std::move(node));
}

template <typename T>
Var Graph<T>::linear(Var input, Var weight, Var bias) {
  Node node;
  node.owned = nn::linear(value(input), value(weight), value(bias).data());
  node.requires_grad = requires_grad(input) || requires_grad(weight) || requires_grad(bias);
  node.backward = [input, weight, bias](Graph& g, const BasicTensor<T>& grad) {
    auto grads = linear_backward(g.value(input), g.value(weight), grad);
    g.accumulate(weight, grads.weight);
    g.accumulate(bias, std::span<const T>(grads.bias));
    g.accumulate(input, grads.input);
  };
  return push(std::move(node));
}

template <typename T>
Var Graph<T>::concat_channels(std::span<const Var> inputs) {
  std::vector<const BasicTensor<T>*> values;
  values.reserve(inputs.size());
  Node node;
  for (Var v : inputs) {
    values.push_back(&value(v));
    node.requires_grad = node.requires_grad || requires_grad(v);
  }
  node.owned = nn::concat_channels<T>(values);
  std::vector<Var> parts(inputs.begin(), inputs.end());
  node.backward = [parts](Graph& g, const BasicTensor<T>& grad) {
    const Shape out = grad.shape();
    const std::size_t plane = out.plane();
    std::size_t channel_offset = 0;
    for (Var part : parts) {
      const Shape s = g.value(part).shape();
      if (g.requires_grad(part)) {
        BasicTensor<T> slice(s);
        for (std::size_t n = 0; n < s.n; ++n) {
          auto src = grad.item(n).subspan(channel_offset * plane, s.c * plane);
          std::copy(src.begin(), src.end(), slice.item(n).begin());
        }
        g.accumulate(part, slice);
      }
      channel_offset += s.c;
    }
  };
  return push(std::move(node));
}

template <typename T>
Var Graph<T>::softmax_cross_entropy(Var logits, std::vector<int> targets) {
  auto result = nn::softmax_cross_entropy<T>(value(logits), targets);
  Node node;
  node.owned = BasicTensor<T>(Shape{1, 1, 1, 1}, result.loss);
  node.requires_grad = requires_grad(logits);
  node.backward = [logits, grad_logits = std::move(result.grad_logits)](
                      Graph& g, const BasicTensor<T>& grad) {
    BasicTensor<T> scaled = grad_logits;
    for (T& v : scaled.data()) v *= grad[0];
    g.accumulate(logits, scaled);
  };
  return push(std::move(node));
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (backward_done_) throw GraphError("backward already invoked on this graph");
  if (value(loss).size() != 1) {
    throw GraphError("backward needs a scalar loss, got " + value(loss).shape().to_string());
  }
  backward_done_ = true;
  if (!requires_grad(loss)) return;
  nodes_[loss.index].grad = BasicTensor<T>(Shape{1, 1, 1, 1}, T{1});
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.param != nullptr) {
      auto dst = node.param->grad().data();
      auto src = node.grad.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    } else if (node.backward) {
      node.backward(*this, node.grad);
    }
    // Activations below this node are still needed; only the gradient is dropped.
    node.grad = BasicTensor<T>{};
  }
}

template <typename T>
std::vector<std::uint8_t> Graph<T>::region_signature() const {
  std::vector<std::uint8_t> sig;
  for (const Node& node : nodes_) {
    if (node.kind == Kind::Relu) {
      for (T v : value(node.input).data()) sig.push_back(v > T{0} ? 1 : 0);
    } else if (node.kind == Kind::MaxPool) {
      const BasicTensor<T>& in = value(node.input);
      const Shape s = in.shape();
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
          for (std::size_t y = 0; y < s.h; y += 2)
            for (std::size_t x = 0; x < s.w; x += 2) {
              std::uint8_t best = 0;
              T best_v = in.at(n, c, y, x);
              for (std::uint8_t k = 1; k < 4; ++k) {
                const T v = in.at(n, c, y + k / 2, x + k % 2);
                if (v > best_v) {
                  best_v = v;
                  best = k;
                }
              }
              sig.push_back(best);
            }
    }
  }
  return sig;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace spf::nn
