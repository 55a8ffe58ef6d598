#pragma once

// Neuralogram: slide a fixed context window over a signal, run the network to
// its embedding layer on each window, and stack the embeddings over time.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralogram/checkpoint.hpp"
#include "neuralogram/errors.hpp"
#include "neuralogram/features.hpp"
#include "neuralogram/matrix.hpp"
#include "neuralogram/network.hpp"
#include "neuralogram/waveform.hpp"

namespace nlg {

struct NeuralogramConfig {
  double window_s = 2.0;
  double hop_s = 0.5;
  std::optional<std::size_t> layer;  // defaults to the checkpoint's embedding layer
};

/// N x n_frames embedding matrix with its windowing metadata.
struct Neuralogram {
  Matrix data;
  double hop_s = 0.5;
  double window_s = 2.0;
  std::size_t layer = 0;
  nlohmann::json source = nlohmann::json::object();

  std::size_t embedding_size() const { return data.rows; }
  std::size_t n_frames() const { return data.cols; }
  /// Centre time of frame j in seconds.
  double frame_time(std::size_t j) const { return static_cast<double>(j) * hop_s + 0.5 * window_s; }
};

/// Valid windowing: floor((dur - window) / hop) + 1.
inline std::size_t frame_count(double dur, double window_s, double hop_s) {
  if (!(window_s > 0.0) || !(hop_s > 0.0)) throw InvalidArgument("window and hop must be positive");
  if (dur + 1e-9 < window_s) throw InvalidArgument("signal shorter than the context window");
  return static_cast<std::size_t>(std::floor((dur - window_s) / hop_s + 1e-9)) + 1;
}

/// Worker count from NLG_THREADS (0 or unset means hardware concurrency).
inline std::size_t thread_budget() {
  std::size_t n = 0;
  if (const char* env = std::getenv("NLG_THREADS")) n = static_cast<std::size_t>(std::strtoul(env, nullptr, 10));
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Embedding of one standalone clip of exactly the network's context length.
inline std::vector<double> embed_clip(Network<float>& net, const FeatureConfig& fc, std::span<const double> clip,
                                      std::optional<std::size_t> layer = std::nullopt) {
  const Tensor<float> e = net.embed(clip_tensor(clip, fc), layer);
  return {e.data.begin(), e.data.end()};
}

inline Neuralogram extract(const Waveform& input, const ModelCheckpoint& ckpt, const NeuralogramConfig& cfg = {}) {
  const FeatureConfig& fc = ckpt.features;
  if (!(cfg.hop_s > 0.0) || cfg.hop_s > cfg.window_s) throw InvalidArgument("hop must lie in (0, window]");
  if (std::abs(cfg.window_s - fc.clip_s) > 1e-9)
    throw InvalidArgument("window of " + std::to_string(cfg.window_s) + " s does not match the network's " +
                          std::to_string(fc.clip_s) + " s context");
  Waveform wave = input;
  if (wave.sample_rate != fc.sample_rate) {
    std::cerr << "warning: resampling input from " << wave.sample_rate << " Hz to " << fc.sample_rate << " Hz\n";
    wave = resample(wave, fc.sample_rate);
  }
  const std::size_t layer = cfg.layer.value_or(ckpt.architecture.embedding_layer);
  if (layer >= ckpt.architecture.layers.size())
    throw InvalidArgument("layer " + std::to_string(layer) + " out of range (network has " +
                          std::to_string(ckpt.architecture.layers.size()) + " layers)");

  const std::size_t win = fc.clip_samples();
  const auto hop = static_cast<std::size_t>(std::llround(cfg.hop_s * fc.sample_rate));
  if (wave.samples.size() < win) throw InvalidArgument("signal shorter than the context window");
  const std::size_t frames = (wave.samples.size() - win) / hop + 1;

  const Network<float> proto = ckpt.network();
  const std::size_t n = shape_size(proto.output_shape(layer));
  Neuralogram ng{Matrix(n, frames), cfg.hop_s, cfg.window_s, layer,
                 {{"duration_s", wave.duration()}, {"sample_rate", wave.sample_rate}}};

  // Windows are independent; each worker owns a network copy and fills its own columns.
  const std::size_t workers = std::min(thread_budget(), frames);
  auto run = [&](std::size_t w) {
    Network<float> net = proto;
    for (std::size_t j = w; j < frames; j += workers) {
      const auto col = embed_clip(net, fc, std::span<const double>(wave.samples).subspan(j * hop, win), layer);
      for (std::size_t r = 0; r < n; ++r) ng.data(r, j) = col[r];
    }
  };
  if (workers <= 1) {
    run(0);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return ng;
}

}  // namespace nlg
