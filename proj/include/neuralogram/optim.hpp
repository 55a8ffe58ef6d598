#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "neuralogram/errors.hpp"
#include "neuralogram/rng.hpp"
#include "neuralogram/tensor.hpp"

namespace nlg {

struct FanInOut {
  std::size_t fan_in;
  std::size_t fan_out;
};

/// conv [F, C, kh, kw]: fan_in = C*kh*kw, fan_out = F*kh*kw; dense [D, U]: D and U.
inline FanInOut fans(const Shape& shape) {
  switch (shape.size()) {
    case 1:
      return {shape[0], shape[0]};
    case 2:
      return {shape[0], shape[1]};
    case 4: {
      const std::size_t receptive = shape[2] * shape[3];
      return {shape[1] * receptive, shape[0] * receptive};
    }
    default:
      throw ShapeError("cannot derive fans for shape " + shape_str(shape));
  }
}

/// Glorot uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <class T = float>
Tensor<T> xavier_init(const Shape& shape, Rng& rng) {
  const auto [fi, fo] = fans(shape);
  const double a = std::sqrt(6.0 / static_cast<double>(fi + fo));
  Tensor<T> t(shape);
  for (T& v : t.data) v = static_cast<T>(rng.uniform(-a, a));
  return t;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  AdamConfig cfg;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  long t = 0;

  AdamState() = default;
  AdamState(AdamConfig c, std::span<const Tensor<T>* const> params) : cfg(c) {
    for (const auto* p : params) {
      m.emplace_back(p->shape);
      v.emplace_back(p->shape);
    }
  }
};

/// One bias-corrected Adam update: theta -= lr * m_hat / (sqrt(v_hat) + eps).
template <class T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& st) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw ShapeError("adam: parameter, gradient and state counts differ");
  ++st.t;
  const auto& c = st.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = *grads[i];
    if (p.shape != g.shape || p.shape != st.m[i].shape) throw ShapeError("adam: shape mismatch");
    auto& m = st.m[i].data;
    auto& v = st.v[i].data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = static_cast<double>(g.data[k]);
      const double mk = c.beta1 * static_cast<double>(m[k]) + (1.0 - c.beta1) * gk;
      const double vk = c.beta2 * static_cast<double>(v[k]) + (1.0 - c.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / bc1;
      const double v_hat = vk / bc2;
      p.data[k] = static_cast<T>(static_cast<double>(p.data[k]) - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

}  // namespace nlg
