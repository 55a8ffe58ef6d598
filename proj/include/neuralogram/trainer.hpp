#pragma once

// Training and evaluation of the classifier on a labeled clip corpus.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralogram/checkpoint.hpp"
#include "neuralogram/corpus.hpp"
#include "neuralogram/errors.hpp"
#include "neuralogram/features.hpp"
#include "neuralogram/network.hpp"
#include "neuralogram/optim.hpp"
#include "neuralogram/rng.hpp"

namespace nlg {

/// Precomputed network inputs and multi-hot targets for a corpus.
struct FeatureSet {
  Shape sample_shape;  // [1, bins, frames]
  std::size_t n = 0;
  std::size_t n_classes = 0;
  std::vector<float> inputs;
  std::vector<float> targets;

  std::size_t sample_size() const { return shape_size(sample_shape); }

  /// Gathers samples `idx` into a batch [B, 1, bins, frames] and targets [B, K].
  std::pair<Tensor<float>, Tensor<float>> batch(std::span<const std::size_t> idx) const {
    const std::size_t b = idx.size(), d = sample_size();
    Tensor<float> x({b, sample_shape[0], sample_shape[1], sample_shape[2]});
    Tensor<float> y({b, n_classes});
    for (std::size_t i = 0; i < b; ++i) {
      std::copy_n(inputs.begin() + static_cast<long>(idx[i] * d), d, x.data.begin() + static_cast<long>(i * d));
      std::copy_n(targets.begin() + static_cast<long>(idx[i] * n_classes), n_classes,
                  y.data.begin() + static_cast<long>(i * n_classes));
    }
    return {std::move(x), std::move(y)};
  }
};

inline FeatureSet make_feature_set(const std::vector<LabeledClip>& clips, const FeatureConfig& fc) {
  if (clips.empty()) throw InvalidArgument("empty corpus");
  FeatureSet fs;
  fs.sample_shape = feature_shape(fc);
  fs.n = clips.size();
  fs.n_classes = clips.front().labels.size();
  const std::size_t d = fs.sample_size();
  fs.inputs.resize(fs.n * d);
  fs.targets.resize(fs.n * fs.n_classes);
  for (std::size_t i = 0; i < fs.n; ++i) {
    if (clips[i].wave.sample_rate != fc.sample_rate) throw InvalidArgument("clip sample rate differs from features");
    clip_features(clips[i].wave.samples, fc, std::span<float>(fs.inputs).subspan(i * d, d));
    for (std::size_t k = 0; k < fs.n_classes; ++k) fs.targets[i * fs.n_classes + k] = clips[i].labels.at(k);
  }
  return fs;
}

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 16;
  std::size_t steps = 3000;
  std::uint64_t seed = 42;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr}, {"batch", c.batch}, {"steps", c.steps}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.lr = j.value("lr", d.lr);
  c.batch = j.value("batch", d.batch);
  c.steps = j.value("steps", d.steps);
  c.seed = j.value("seed", d.seed);
}

/// Mean of the first `window` losses.
inline double initial_loss(const std::vector<double>& h, std::size_t window = 20) {
  if (h.empty()) return 0.0;
  const std::size_t n = std::min(window, h.size());
  return std::accumulate(h.begin(), h.begin() + static_cast<long>(n), 0.0) / static_cast<double>(n);
}

/// Trailing mean over the last `window` losses.
inline double final_smoothed_loss(const std::vector<double>& h, std::size_t window = 100) {
  if (h.empty()) return 0.0;
  const std::size_t n = std::min(window, h.size());
  return std::accumulate(h.end() - static_cast<long>(n), h.end(), 0.0) / static_cast<double>(n);
}

struct TrainResult {
  ModelCheckpoint checkpoint;
  std::vector<double> loss_history;
};

using ProgressFn = std::function<void(std::size_t step, double loss)>;

/// Adam over shuffled minibatches with dropout active. Initialization,
/// shuffling and dropout draw from independent streams derived from the seed;
/// the loop is single-threaded, so equal seeds give bit-identical results.
inline TrainResult train(const FeatureSet& data, const std::vector<std::string>& classes, Architecture arch,
                         const FeatureConfig& features, const TrainConfig& cfg, const ProgressFn& progress = {}) {
  if (data.n == 0) throw InvalidArgument("empty corpus");
  if (cfg.batch == 0) throw InvalidArgument("batch size must be positive");
  arch.input_shape = data.sample_shape;
  Network<float> net(arch);
  if (net.num_classes() != data.n_classes)
    throw ShapeError("architecture predicts " + std::to_string(net.num_classes()) + " classes, corpus has " +
                     std::to_string(data.n_classes));

  Rng init_rng = Rng::derive(cfg.seed, 1);
  Rng shuffle_rng = Rng::derive(cfg.seed, 2);
  Rng dropout_rng = Rng::derive(cfg.seed, 3);
  net.init(init_rng);
  auto params = net.parameters();
  auto grads_mut = net.gradients();
  std::vector<const Tensor<float>*> grads(grads_mut.begin(), grads_mut.end());
  std::vector<const Tensor<float>*> cparams(params.begin(), params.end());
  AdamState<float> adam(AdamConfig{.lr = cfg.lr}, cparams);

  std::vector<std::size_t> order(data.n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = data.n;  // forces a shuffle on the first step
  std::vector<double> history;
  history.reserve(cfg.steps);
  std::vector<std::size_t> idx(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& i : idx) {
      if (cursor == data.n) {
        for (std::size_t k = data.n; k > 1; --k) std::swap(order[k - 1], order[shuffle_rng.below(k)]);
        cursor = 0;
      }
      i = order[cursor++];
    }
    auto [x, y] = data.batch(idx);
    const double loss = net.loss_and_grad(x, y, Mode::train, &dropout_rng);
    if (!std::isfinite(loss))
      throw DivergenceError("loss became " + std::to_string(loss) + " at step " + std::to_string(step) +
                            "; lower the learning rate");
    adam_step<float>(params, grads, adam);
    history.push_back(loss);
    if (progress) progress(step, loss);
  }

  const std::size_t tail = std::min<std::size_t>(100, history.size());
  nlohmann::json meta = {{"seed", cfg.seed},
                         {"steps", cfg.steps},
                         {"train_config", cfg},
                         {"n_clips", data.n},
                         {"loss_history_tail", std::vector<double>(history.end() - static_cast<long>(tail), history.end())},
                         {"initial_loss", initial_loss(history)},
                         {"final_smoothed_loss", final_smoothed_loss(history)}};
  return {ModelCheckpoint::from_network(net, features, classes, std::move(meta)), std::move(history)};
}

/// ROC AUC via the rank-sum statistic with mid-ranks for ties; empty when
/// either class is absent.
inline std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (truth[order[k]]) {
        pos_rank_sum += mid;
        ++n_pos;
      }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

struct EvalResult {
  std::vector<std::optional<double>> per_class_auc;
  double mean_auc = 0.0;  // over classes with a defined AUC
};

/// Per-class AUC of `scores` [N, K] against multi-hot truth [N, K].
inline EvalResult evaluate_scores(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth,
                                  std::size_t n_classes) {
  const std::size_t n = scores.size() / n_classes;
  EvalResult r;
  double sum = 0.0;
  std::size_t defined = 0;
  std::vector<double> s(n);
  std::vector<std::uint8_t> t(n);
  for (std::size_t k = 0; k < n_classes; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = scores[i * n_classes + k];
      t[i] = truth[i * n_classes + k];
    }
    auto auc = roc_auc(s, t);
    r.per_class_auc.push_back(auc);
    if (auc) {
      sum += *auc;
      ++defined;
    }
  }
  r.mean_auc = defined ? sum / static_cast<double>(defined) : std::nan("");
  return r;
}

inline EvalResult evaluate(const ModelCheckpoint& ckpt, const FeatureSet& heldout, std::size_t batch = 16) {
  Network<float> net = ckpt.network();
  if (net.num_classes() != heldout.n_classes) throw ShapeError("class count mismatch between model and data");
  std::vector<double> scores;
  std::vector<std::uint8_t> truth;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < heldout.n; start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(heldout.n, start + batch); ++i) idx.push_back(i);
    auto [x, y] = heldout.batch(idx);
    const Tensor<float> p = net.forward(x, Mode::eval);
    scores.insert(scores.end(), p.data.begin(), p.data.end());
    for (float v : y.data) truth.push_back(v > 0.5f ? 1 : 0);
  }
  return evaluate_scores(scores, truth, heldout.n_classes);
}

}  // namespace nlg
