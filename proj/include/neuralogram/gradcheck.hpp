#pragma once

// Central-difference verification of backpropagated gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "neuralogram/network.hpp"
#include "neuralogram/rng.hpp"
#include "neuralogram/tensor.hpp"

namespace nlg {

struct GradCheckEntry {
  std::size_t tensor;
  std::size_t index;
  double analytic;
  double numeric;
  double rel_error;
  bool frozen_regime;  // probe crossed a kink and was redone with gates held
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
};

/// |a - n| / max(|a|, |n|, floor). The floor absorbs float64 roundoff on
/// gradients that are zero or vanishingly small (dead units).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

template <class Model>
struct RegimeOf {
  using type = int;
};

template <class Model>
  requires requires(const Model& m) { m.regime(); }
struct RegimeOf<Model> {
  using type = decltype(std::declval<const Model&>().regime());
};

}  // namespace detail

/// Compares backprop against (f(theta+eps) - f(theta-eps)) / 2eps on
/// `samples` parameters picked round-robin over the parameter tensors.
///
/// Model needs parameters(), gradients(), loss(x, y) and
/// loss_and_grad(x, y, Mode). Dropout must be inactive, so the check runs in
/// eval mode. When the model also exposes activation_signature(), regime()
/// and loss_on_regime(), a probe whose +/-eps evaluation crosses a ReLU or
/// max-pool kink is redone on the regime at theta: the same central
/// difference, with the gates held fixed so the quotient measures the slope of
/// the piece backprop differentiates. Shrinking eps instead runs into float64
/// roundoff before it clears kinks near units fed by thousands of positions.
template <class Model, class T>
GradCheckResult gradient_check(Model& model, const Tensor<T>& input, const Tensor<T>& targets, double eps,
                               std::size_t samples, Rng& rng) {
  constexpr bool kRegime = requires(const Model& m) {
    m.activation_signature();
    m.regime();
    m.loss_on_regime(input, targets, m.regime());
  };
  model.loss_and_grad(input, targets, Mode::eval);
  std::uint64_t base_sig = 0;
  typename detail::RegimeOf<Model>::type base{};
  if constexpr (kRegime) {
    base_sig = model.activation_signature();
    base = model.regime();
  }
  std::vector<Tensor<T>> analytic;
  for (const auto* g : model.gradients()) analytic.push_back(*g);
  auto params = model.parameters();

  GradCheckResult r;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t ti = s % params.size();
    Tensor<T>& p = *params[ti];
    const std::size_t idx = static_cast<std::size_t>(rng.below(p.size()));
    const T saved = p.data[idx];
    bool smooth = true;
    p.data[idx] = saved + static_cast<T>(eps);
    double up = static_cast<double>(model.loss(input, targets));
    if constexpr (kRegime) smooth = smooth && model.activation_signature() == base_sig;
    p.data[idx] = saved - static_cast<T>(eps);
    double down = static_cast<double>(model.loss(input, targets));
    if constexpr (kRegime) {
      smooth = smooth && model.activation_signature() == base_sig;
      if (!smooth) {
        down = static_cast<double>(model.loss_on_regime(input, targets, base));
        p.data[idx] = saved + static_cast<T>(eps);
        up = static_cast<double>(model.loss_on_regime(input, targets, base));
      }
    }
    p.data[idx] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = static_cast<double>(analytic[ti].data[idx]);
    const double err = relative_error(a, numeric);
    r.entries.push_back({ti, idx, a, numeric, err, !smooth});
    r.max_rel_error = std::max(r.max_rel_error, err);
  }
  return r;
}

}  // namespace nlg
