#pragma once

// Forward and backward kernels for the sequential network.
//
// Activations are NCHW. Convolution is valid cross-correlation computed as
// im2col followed by a GEMM; every routine is single-threaded and therefore
// bit-reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "neuralogram/errors.hpp"
#include "neuralogram/rng.hpp"
#include "neuralogram/tensor.hpp"

namespace nlg {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using CMapMat = Eigen::Map<const RowMat<T>>;

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride) {
  if (k > in) throw ShapeError("kernel larger than input");
  return (in - k) / stride + 1;
}

namespace detail {

// col is (C*kh*kw) x (Ho*Wo), row-major.
template <class T>
void im2col(const T* in, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t ho, std::size_t wo, T* col) {
  const std::size_t p = ho * wo;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        T* row = col + ((ch * kh + i) * kw + j) * p;
        for (std::size_t y = 0; y < ho; ++y) {
          const T* src = in + (ch * h + y * stride + i) * w + j;
          T* dst = row + y * wo;
          if (stride == 1) {
            std::copy(src, src + wo, dst);
          } else {
            for (std::size_t x = 0; x < wo; ++x) dst[x] = src[x * stride];
          }
        }
      }
}

template <class T>
void col2im_add(const T* col, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                std::size_t stride, std::size_t ho, std::size_t wo, T* in) {
  const std::size_t p = ho * wo;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        const T* row = col + ((ch * kh + i) * kw + j) * p;
        for (std::size_t y = 0; y < ho; ++y) {
          T* dst = in + (ch * h + y * stride + i) * w + j;
          const T* src = row + y * wo;
          for (std::size_t x = 0; x < wo; ++x) dst[x * stride] += src[x];
        }
      }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, std::size_t stride = 1) {
  if (input.rank() != 4 || kernel.rank() != 4) throw ShapeError("conv2d expects NCHW input and FCkhkw kernel");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t f = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != c) throw ShapeError("conv2d channel mismatch: input " + shape_str(input.shape) +
                                           ", kernel " + shape_str(kernel.shape));
  if (bias.size() != f) throw ShapeError("conv2d bias length mismatch");
  if (stride == 0) throw ShapeError("conv2d stride must be positive");
  const std::size_t ho = conv_out_dim(h, kh, stride), wo = conv_out_dim(w, kw, stride);
  const std::size_t p = ho * wo, ckk = c * kh * kw;

  Tensor<T> out({n, f, ho, wo});
  std::vector<T> col(ckk * p);
  CMapMat<T> k(kernel.data.data(), f, ckk);
  for (std::size_t s = 0; s < n; ++s) {
    detail::im2col(input.data.data() + s * c * h * w, c, h, w, kh, kw, stride, ho, wo, col.data());
    MapMat<T> o(out.data.data() + s * f * p, f, p);
    o.noalias() = k * CMapMat<T>(col.data(), ckk, p);
    for (std::size_t ch = 0; ch < f; ++ch) o.row(ch).array() += bias[ch];
  }
  return out;
}

template <class T>
struct Conv2dGrads {
  Tensor<T> input;  // empty when not requested
  Tensor<T> kernel;
  Tensor<T> bias;
};

template <class T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& grad_out,
                               std::size_t stride = 1, bool want_input_grad = true) {
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t f = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const std::size_t ho = grad_out.dim(2), wo = grad_out.dim(3);
  const std::size_t p = ho * wo, ckk = c * kh * kw;

  Conv2dGrads<T> g{want_input_grad ? Tensor<T>(input.shape) : Tensor<T>{}, Tensor<T>(kernel.shape),
                   Tensor<T>({f})};
  std::vector<T> col(ckk * p);
  std::vector<T> dcol(want_input_grad ? ckk * p : 0);
  MapMat<T> dk(g.kernel.data.data(), f, ckk);
  CMapMat<T> k(kernel.data.data(), f, ckk);
  for (std::size_t s = 0; s < n; ++s) {
    CMapMat<T> go(grad_out.data.data() + s * f * p, f, p);
    detail::im2col(input.data.data() + s * c * h * w, c, h, w, kh, kw, stride, ho, wo, col.data());
    dk.noalias() += go * CMapMat<T>(col.data(), ckk, p).transpose();
    for (std::size_t ch = 0; ch < f; ++ch) g.bias[ch] += go.row(ch).sum();
    if (want_input_grad) {
      MapMat<T>(dcol.data(), ckk, p).noalias() = k.transpose() * go;
      detail::col2im_add(dcol.data(), c, h, w, kh, kw, stride, ho, wo, g.input.data.data() + s * c * h * w);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// maxpool2d (stride = pool size; ragged edges behave as if padded with -inf)

template <class T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

template <class T>
PoolResult<T> maxpool2d(const Tensor<T>& input, std::size_t ph, std::size_t pw) {
  if (input.rank() != 4) throw ShapeError("maxpool2d expects NCHW input");
  if (ph == 0 || pw == 0) throw ShapeError("pool size must be positive");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t ho = (h + ph - 1) / ph, wo = (w + pw - 1) / pw;
  PoolResult<T> r{Tensor<T>({n, c, ho, wo}), std::vector<std::size_t>(n * c * ho * wo)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t x = 0; x < wo; ++x, ++o) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = base + (y * ph) * w + x * pw;
        for (std::size_t i = y * ph; i < std::min(h, (y + 1) * ph); ++i)
          for (std::size_t j = x * pw; j < std::min(w, (x + 1) * pw); ++j) {
            const std::size_t idx = base + i * w + j;
            if (input.data[idx] > best) {
              best = input.data[idx];
              best_idx = idx;
            }
          }
        r.output.data[o] = best;
        r.argmax[o] = best_idx;
      }
  }
  return r;
}

template <class T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                             const Shape& input_shape) {
  Tensor<T> g(input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) g.data[argmax[o]] += grad_out.data[o];
  return g;
}

// ---------------------------------------------------------------------------
// dense: input [N, D] (any trailing shape is flattened), weight [D, U], bias [U]

template <class T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  const std::size_t n = input.dim(0), d = input.size() / n;
  if (weight.rank() != 2 || weight.dim(0) != d)
    throw ShapeError("dense weight " + shape_str(weight.shape) + " does not accept input " +
                     shape_str(input.shape));
  const std::size_t u = weight.dim(1);
  if (bias.size() != u) throw ShapeError("dense bias length mismatch");
  Tensor<T> out({n, u});
  MapMat<T> o(out.data.data(), n, u);
  o.noalias() = CMapMat<T>(input.data.data(), n, d) * CMapMat<T>(weight.data.data(), d, u);
  o.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data.data(), u);
  return out;
}

template <class T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <class T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out) {
  const std::size_t n = input.dim(0), d = input.size() / n, u = weight.dim(1);
  DenseGrads<T> g{Tensor<T>(input.shape), Tensor<T>(weight.shape), Tensor<T>({u})};
  CMapMat<T> x(input.data.data(), n, d);
  CMapMat<T> go(grad_out.data.data(), n, u);
  MapMat<T>(g.input.data.data(), n, d).noalias() = go * CMapMat<T>(weight.data.data(), d, u).transpose();
  MapMat<T>(g.weight.data.data(), d, u).noalias() = x.transpose() * go;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.bias.data.data(), u) = go.colwise().sum();
  return g;
}

// ---------------------------------------------------------------------------
// elementwise

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <class T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(x.data[i] > T(0))) g.data[i] = T(0);
  return g;
}

/// Inverted dropout. `mask` receives the per-element scale (0 or 1/(1-p)).
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng, std::vector<T>* mask = nullptr) {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("dropout rate must lie in [0, 1)");
  if (!training || p == 0.0) {
    if (mask) mask->assign(x.size(), T(1));
    return x;
  }
  const T keep_scale = T(1.0 / (1.0 - p));
  Tensor<T> y = x;
  std::vector<T> local;
  std::vector<T>& m = mask ? *mask : local;
  m.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = rng.uniform() < p ? T(0) : keep_scale;
    y.data[i] *= m[i];
  }
  return y;
}

/// Row-wise softmax over the last axis of an [N, K] tensor.
template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
  const std::size_t n = logits.dim(0), k = logits.size() / n;
  Tensor<T> p({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    const T* z = logits.data.data() + r * k;
    T* out = p.data.data() + r * k;
    const T mx = *std::max_element(z, z + k);
    T sum = 0;
    for (std::size_t j = 0; j < k; ++j) sum += (out[j] = std::exp(z[j] - mx));
    for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
  }
  return p;
}

/// Gradient wrt logits given softmax output p and dL/dp.
template <class T>
Tensor<T> softmax_backward(const Tensor<T>& p, const Tensor<T>& grad_out) {
  const std::size_t n = p.dim(0), k = p.size() / n;
  Tensor<T> g({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    T dot = 0;
    for (std::size_t j = 0; j < k; ++j) dot += grad_out.data[r * k + j] * p.data[r * k + j];
    for (std::size_t j = 0; j < k; ++j)
      g.data[r * k + j] = p.data[r * k + j] * (grad_out.data[r * k + j] - dot);
  }
  return g;
}

// ---------------------------------------------------------------------------
// loss

template <class T>
struct LossResult {
  T loss;
  Tensor<T> grad;  // same shape as the tensor the loss was taken of
};

/// (1/N) sum_n ||p_n - y_n||^2 on probabilities p; gradient wrt p.
template <class T>
LossResult<T> euclid_loss_on_probs(const Tensor<T>& probs, const Tensor<T>& targets) {
  if (probs.shape != targets.shape)
    throw ShapeError("loss shape mismatch: " + shape_str(probs.shape) + " vs " + shape_str(targets.shape));
  const std::size_t n = probs.dim(0);
  LossResult<T> r{T(0), Tensor<T>(probs.shape)};
  const T inv_n = T(1) / static_cast<T>(n);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const T d = probs.data[i] - targets.data[i];
    r.loss += d * d;
    r.grad.data[i] = T(2) * d * inv_n;
  }
  r.loss *= inv_n;
  return r;
}

/// Squared Euclidean distance between softmax(logits) and multi-hot targets,
/// averaged over the batch; gradient wrt the logits.
template <class T>
LossResult<T> euclid_softmax_loss(const Tensor<T>& logits, const Tensor<T>& targets) {
  const Tensor<T> p = softmax(logits);
  auto onp = euclid_loss_on_probs(p, targets);
  return {onp.loss, softmax_backward(p, onp.grad)};
}

}  // namespace nlg
