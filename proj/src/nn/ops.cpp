#include "spf/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace spf::nn {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvDims {
  std::size_t channels, height, width;
  std::size_t kernel_h, kernel_w;
  std::size_t out_h, out_w;
  std::ptrdiff_t stride, padding;

  std::size_t patch_len() const { return channels * kernel_h * kernel_w; }
  std::size_t out_plane() const { return out_h * out_w; }
};

template <typename T>
ConvDims check_conv(const BasicTensor<T>& input, const BasicTensor<T>& weight, ConvGeometry geom) {
  const Shape in = input.shape();
  const Shape wt = weight.shape();
  if (geom.stride < 1 || geom.padding < 0) {
    throw ShapeError("conv2d: stride must be positive and padding non-negative");
  }
  const auto pad2 = 2 * static_cast<std::size_t>(geom.padding);
  if (in.c != wt.c || in.h + pad2 < wt.h || in.w + pad2 < wt.w || wt.n == 0) {
    throw ShapeError("conv2d: input " + in.to_string() + " incompatible with weight " +
                     wt.to_string());
  }
  return ConvDims{in.c,
                  in.h,
                  in.w,
                  wt.h,
                  wt.w,
                  conv_out_extent(in.h, wt.h, geom.stride, geom.padding),
                  conv_out_extent(in.w, wt.w, geom.stride, geom.padding),
                  geom.stride,
                  geom.padding};
}

// Unfolds one batch item into a [C*kh*kw, out_h*out_w] block of a row-major
// matrix whose rows are `ld` long.
template <typename T>
void im2col(std::span<const T> item, const ConvDims& d, T* cols, std::size_t ld) {
  std::size_t row = 0;
  for (std::size_t c = 0; c < d.channels; ++c) {
    const T* channel = item.data() + c * d.height * d.width;
    for (std::size_t ky = 0; ky < d.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < d.kernel_w; ++kx, ++row) {
        T* dst = cols + row * ld;
        for (std::size_t oy = 0; oy < d.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * d.stride - d.padding +
                                    static_cast<std::ptrdiff_t>(ky);
          T* out_row = dst + oy * d.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.height)) {
            std::fill(out_row, out_row + d.out_w, T{0});
            continue;
          }
          const T* src_row = channel + static_cast<std::size_t>(iy) * d.width;
          for (std::size_t ox = 0; ox < d.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * d.stride - d.padding +
                                      static_cast<std::ptrdiff_t>(kx);
            out_row[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.width))
                              ? T{0}
                              : src_row[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds columns back into an item buffer.
template <typename T>
void col2im(const T* cols, std::size_t ld, const ConvDims& d, std::span<T> item) {
  std::size_t row = 0;
  for (std::size_t c = 0; c < d.channels; ++c) {
    T* channel = item.data() + c * d.height * d.width;
    for (std::size_t ky = 0; ky < d.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < d.kernel_w; ++kx, ++row) {
        const T* src = cols + row * ld;
        for (std::size_t oy = 0; oy < d.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * d.stride - d.padding +
                                    static_cast<std::ptrdiff_t>(ky);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.height)) continue;
          T* dst_row = channel + static_cast<std::size_t>(iy) * d.width;
          const T* src_row = src + oy * d.out_w;
          for (std::size_t ox = 0; ox < d.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * d.stride - d.padding +
                                      static_cast<std::ptrdiff_t>(kx);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.width)) continue;
            dst_row[static_cast<std::size_t>(ix)] += src_row[ox];
          }
        }
      }
    }
  }
}

// Batch items are unfolded side by side so each chunk is a single GEMM; the
// chunk is capped to keep the column buffer modest.
std::size_t chunk_items(const ConvDims& d, std::size_t batch) {
  constexpr std::size_t kMaxColumnElements = std::size_t{1} << 22;
  const std::size_t per_item = std::max<std::size_t>(1, d.patch_len() * d.out_plane());
  return std::clamp<std::size_t>(kMaxColumnElements / per_item, 1, std::max<std::size_t>(batch, 1));
}

void check_linear(const Shape& in, const Shape& wt) {
  if (in.h != 1 || in.w != 1 || wt.h != 1 || wt.w != 1 || in.c != wt.c) {
    throw ShapeError("linear: input " + in.to_string() + " incompatible with weight " +
                     wt.to_string());
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      std::span<const T> bias, ConvGeometry geom) {
  const ConvDims d = check_conv(input, weight, geom);
  const std::size_t filters = weight.shape().n;
  if (bias.size() != filters) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) +
                     " does not match weight " + weight.shape().to_string());
  }
  const std::size_t batch = input.shape().n;
  BasicTensor<T> output(Shape{batch, filters, d.out_h, d.out_w});
  const std::size_t plane = d.out_plane();
  const std::size_t chunk = chunk_items(d, batch);
  std::vector<T> cols(d.patch_len() * plane * chunk);
  RowMatrix<T> out(filters, plane * chunk);
  const ConstMatrixMap<T> w(weight.data().data(), filters, d.patch_len());
  for (std::size_t first = 0; first < batch; first += chunk) {
    const std::size_t count = std::min(chunk, batch - first);
    const std::size_t ld = plane * count;
    for (std::size_t i = 0; i < count; ++i) {
      im2col<T>(input.item(first + i), d, cols.data() + i * plane, ld);
    }
    const ConstMatrixMap<T> col_mat(cols.data(), d.patch_len(), ld);
    auto block = out.leftCols(ld);
    block.noalias() = w * col_mat;
    for (std::size_t i = 0; i < count; ++i) {
      MatrixMap<T> dst(output.item(first + i).data(), filters, plane);
      dst = block.middleCols(i * plane, plane);
      for (std::size_t f = 0; f < filters; ++f) dst.row(f).array() += bias[f];
    }
  }
  return output;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_output, ConvGeometry geom,
                               bool need_input_grad) {
  const ConvDims d = check_conv(input, weight, geom);
  const std::size_t filters = weight.shape().n;
  const std::size_t batch = input.shape().n;
  if (grad_output.shape() != Shape{batch, filters, d.out_h, d.out_w}) {
    throw ShapeError("conv2d_backward: grad " + grad_output.shape().to_string() +
                     " does not match output of input " + input.shape().to_string());
  }
  Conv2dGrads<T> grads{need_input_grad ? BasicTensor<T>(input.shape()) : BasicTensor<T>{},
                       BasicTensor<T>(weight.shape()), std::vector<T>(filters, T{0})};
  const std::size_t plane = d.out_plane();
  const std::size_t chunk = chunk_items(d, batch);
  std::vector<T> cols(d.patch_len() * plane * chunk);
  std::vector<T> grad_cols(need_input_grad ? cols.size() : 0);
  RowMatrix<T> dy(filters, plane * chunk);
  const ConstMatrixMap<T> w(weight.data().data(), filters, d.patch_len());
  MatrixMap<T> grad_w(grads.weight.data().data(), filters, d.patch_len());
  for (std::size_t first = 0; first < batch; first += chunk) {
    const std::size_t count = std::min(chunk, batch - first);
    const std::size_t ld = plane * count;
    for (std::size_t i = 0; i < count; ++i) {
      im2col<T>(input.item(first + i), d, cols.data() + i * plane, ld);
      dy.middleCols(i * plane, plane) =
          ConstMatrixMap<T>(grad_output.item(first + i).data(), filters, plane);
    }
    const auto dy_block = dy.leftCols(ld);
    const ConstMatrixMap<T> col_mat(cols.data(), d.patch_len(), ld);
    grad_w.noalias() += dy_block * col_mat.transpose();
    for (std::size_t f = 0; f < filters; ++f) grads.bias[f] += dy_block.row(f).sum();
    if (need_input_grad) {
      MatrixMap<T> dcols(grad_cols.data(), d.patch_len(), ld);
      dcols.noalias() = w.transpose() * dy_block;
      for (std::size_t i = 0; i < count; ++i) {
        col2im<T>(grad_cols.data() + i * plane, ld, d, grads.input.item(first + i));
      }
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output) {
  if (input.shape() != grad_output.shape()) {
    throw ShapeError("relu_backward: " + input.shape().to_string() + " vs " +
                     grad_output.shape().to_string());
  }
  BasicTensor<T> grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    grad[i] = input[i] > T{0} ? grad_output[i] : T{0};
  }
  return grad;
}

namespace {

void check_pool(const Shape& s) {
  if (s.h % 2 != 0 || s.w % 2 != 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("maxpool2d: spatial extent of " + s.to_string() + " must be even");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input) {
  const Shape s = input.shape();
  check_pool(s);
  BasicTensor<T> out(Shape{s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h / 2; ++y)
        for (std::size_t x = 0; x < s.w / 2; ++x) {
          const T a = input.at(n, c, 2 * y, 2 * x);
          const T b = input.at(n, c, 2 * y, 2 * x + 1);
          const T e = input.at(n, c, 2 * y + 1, 2 * x);
          const T f = input.at(n, c, 2 * y + 1, 2 * x + 1);
          out.at(n, c, y, x) = std::max(std::max(a, b), std::max(e, f));
        }
  return out;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output) {
  const Shape s = input.shape();
  check_pool(s);
  if (grad_output.shape() != Shape{s.n, s.c, s.h / 2, s.w / 2}) {
    throw ShapeError("maxpool2d_backward: grad " + grad_output.shape().to_string() +
                     " for input " + s.to_string());
  }
  BasicTensor<T> grad(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h / 2; ++y)
        for (std::size_t x = 0; x < s.w / 2; ++x) {
          std::size_t best_y = 2 * y;
          std::size_t best_x = 2 * x;
          T best = input.at(n, c, best_y, best_x);
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const T v = input.at(n, c, 2 * y + dy, 2 * x + dx);
              if (v > best) {
                best = v;
                best_y = 2 * y + dy;
                best_x = 2 * x + dx;
              }
            }
          grad.at(n, c, best_y, best_x) += grad_output.at(n, c, y, x);
        }
  return grad;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input) {
  const Shape s = input.shape();
  if (s.plane() == 0) throw ShapeError("global_avg_pool: empty spatial extent " + s.to_string());
  BasicTensor<T> out(Shape{s.n, s.c, 1, 1});
  const auto plane = s.plane();
  for (std::size_t i = 0; i < s.n * s.c; ++i) {
    const T* src = input.data().data() + i * plane;
    T sum{0};
    for (std::size_t j = 0; j < plane; ++j) sum += src[j];
    out[i] = sum / static_cast<T>(plane);
  }
  return out;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_output) {
  if (grad_output.shape() != Shape{input_shape.n, input_shape.c, 1, 1}) {
    throw ShapeError("global_avg_pool_backward: grad " + grad_output.shape().to_string() +
                     " for input " + input_shape.to_string());
  }
  BasicTensor<T> grad(input_shape);
  const auto plane = input_shape.plane();
  const T scale = T{1} / static_cast<T>(plane);
  for (std::size_t i = 0; i < input_shape.n * input_shape.c; ++i) {
    T* dst = grad.data().data() + i * plane;
    std::fill(dst, dst + plane, grad_output[i] * scale);
  }
  return grad;
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      std::span<const T> bias) {
  const Shape in = input.shape();
  const Shape wt = weight.shape();
  check_linear(in, wt);
  if (bias.size() != wt.n) {
    throw ShapeError("linear: bias length " + std::to_string(bias.size()) +
                     " does not match weight " + wt.to_string());
  }
  BasicTensor<T> out(Shape{in.n, wt.n, 1, 1});
  const ConstMatrixMap<T> x(input.data().data(), in.n, in.c);
  const ConstMatrixMap<T> w(weight.data().data(), wt.n, wt.c);
  MatrixMap<T> y(out.data().data(), in.n, wt.n);
  y.noalias() = x * w.transpose();
  for (std::size_t r = 0; r < in.n; ++r)
    for (std::size_t o = 0; o < wt.n; ++o) y(r, o) += bias[o];
  return out;
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_output) {
  const Shape in = input.shape();
  const Shape wt = weight.shape();
  check_linear(in, wt);
  if (grad_output.shape() != Shape{in.n, wt.n, 1, 1}) {
    throw ShapeError("linear_backward: grad " + grad_output.shape().to_string() + " for input " +
                     in.to_string());
  }
  LinearGrads<T> grads{BasicTensor<T>(in), BasicTensor<T>(wt), std::vector<T>(wt.n, T{0})};
  const ConstMatrixMap<T> x(input.data().data(), in.n, in.c);
  const ConstMatrixMap<T> w(weight.data().data(), wt.n, wt.c);
  const ConstMatrixMap<T> dy(grad_output.data().data(), in.n, wt.n);
  MatrixMap<T>(grads.input.data().data(), in.n, in.c).noalias() = dy * w;
  MatrixMap<T>(grads.weight.data().data(), wt.n, wt.c).noalias() = dy.transpose() * x;
  for (std::size_t r = 0; r < in.n; ++r)
    for (std::size_t o = 0; o < wt.n; ++o) grads.bias[o] += dy(r, o);
  return grads;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>* const> inputs) {
  if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape first = inputs.front()->shape();
  Shape out_shape = first;
  out_shape.c = 0;
  for (const auto* t : inputs) {
    const Shape s = t->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.to_string() + " incompatible with " +
                       first.to_string());
    }
    out_shape.c += s.c;
  }
  BasicTensor<T> out(out_shape);
  const std::size_t plane = first.plane();
  for (std::size_t n = 0; n < first.n; ++n) {
    T* dst = out.item(n).data();
    for (const auto* t : inputs) {
      auto src = t->item(n);
      std::copy(src.begin(), src.end(), dst);
      dst += t->shape().c * plane;
    }
  }
  return out;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.size() < 2) throw ShapeError("softmax: need at least two logits");
  const T peak = *std::max_element(logits.begin(), logits.end());
  std::vector<T> out(logits.size());
  T sum{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (T& v : out) v /= sum;
  return out;
}

template <typename T>
T cross_entropy(std::span<const T> probabilities, std::size_t target) {
  if (target >= probabilities.size()) {
    throw IndexError("cross_entropy: target " + std::to_string(target) + " out of range for " +
                     std::to_string(probabilities.size()) + " classes");
  }
  return -std::log(probabilities[target]);
}

template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                             std::span<const int> targets) {
  const Shape s = logits.shape();
  if (s.h != 1 || s.w != 1 || s.c < 2 || s.n != targets.size() || s.n == 0) {
    throw ShapeError("softmax_cross_entropy: logits " + s.to_string() + " with " +
                     std::to_string(targets.size()) + " targets");
  }
  SoftmaxCrossEntropy<T> result{T{0}, BasicTensor<T>(s), BasicTensor<T>(s)};
  const T inv_n = T{1} / static_cast<T>(s.n);
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto target = targets[n];
    if (target < 0 || static_cast<std::size_t>(target) >= s.c) {
      throw IndexError("softmax_cross_entropy: target " + std::to_string(target) +
                       " out of range for " + std::to_string(s.c) + " classes");
    }
    auto row = logits.item(n);
    const T peak = *std::max_element(row.begin(), row.end());
    T sum{0};
    for (T v : row) sum += std::exp(v - peak);
    const T log_sum = std::log(sum) + peak;
    result.loss += (log_sum - row[static_cast<std::size_t>(target)]) * inv_n;
    auto probs = result.probabilities.item(n);
    auto grad = result.grad_logits.item(n);
    for (std::size_t k = 0; k < s.c; ++k) {
      probs[k] = std::exp(row[k] - log_sum);
      const T onehot = static_cast<std::size_t>(target) == k ? T{1} : T{0};
      grad[k] = (probs[k] - onehot) * inv_n;
    }
  }
  return result;
}

#define SPF_INSTANTIATE_OPS(T)                                                                   \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, std::span<const T>, \
                                 ConvGeometry);                                                  \
  template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                          const BasicTensor<T>&, ConvGeometry, bool);            \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                           \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> maxpool2d(const BasicTensor<T>&);                                      \
  template BasicTensor<T> maxpool2d_backward(const BasicTensor<T>&, const BasicTensor<T>&);      \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                \
  template BasicTensor<T> global_avg_pool_backward(const Shape&, const BasicTensor<T>&);         \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, std::span<const T>); \
  template LinearGrads<T> linear_backward(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                          const BasicTensor<T>&);                                \
  template BasicTensor<T> concat_channels(std::span<const BasicTensor<T>* const>);               \
  template std::vector<T> softmax(std::span<const T>);                                           \
  template T cross_entropy(std::span<const T>, std::size_t);                                     \
  template SoftmaxCrossEntropy<T> softmax_cross_entropy(const BasicTensor<T>&, std::span<const int>);

SPF_INSTANTIATE_OPS(float)
SPF_INSTANTIATE_OPS(double)

#undef SPF_INSTANTIATE_OPS

}  // namespace spf::nn
