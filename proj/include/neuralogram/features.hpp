#pragma once

// Network input: log-compressed power spectrogram of one fixed-length clip.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "neuralogram/errors.hpp"
#include "neuralogram/stft.hpp"
#include "neuralogram/tensor.hpp"
#include "neuralogram/waveform.hpp"

namespace nlg {

inline const char* to_string(WindowFn w) { return w == WindowFn::hann ? "hann" : "rectangular"; }
inline const char* to_string(Padding p) { return p == Padding::center ? "center" : "valid"; }

inline void to_json(nlohmann::json& j, const StftConfig& c) {
  j = {{"window_ms", c.window_ms}, {"hop_ms", c.hop_ms}, {"fft_size", c.fft_size},
       {"window_fn", to_string(c.window_fn)}, {"padding", to_string(c.padding)}};
}

inline void from_json(const nlohmann::json& j, StftConfig& c) {
  c.window_ms = j.at("window_ms").get<double>();
  c.hop_ms = j.at("hop_ms").get<double>();
  c.fft_size = j.at("fft_size").get<std::size_t>();
  const auto w = j.at("window_fn").get<std::string>();
  if (w != "hann" && w != "rectangular") throw FormatError("unknown window function " + w);
  c.window_fn = w == "hann" ? WindowFn::hann : WindowFn::rectangular;
  const auto p = j.at("padding").get<std::string>();
  if (p != "center" && p != "valid") throw FormatError("unknown padding " + p);
  c.padding = p == "center" ? Padding::center : Padding::valid;
}

/// How a clip becomes a network input: x = scale * log(1 + power).
struct FeatureConfig {
  int sample_rate = 8000;
  double clip_s = 2.0;
  StftConfig stft{};
  double scale = 0.25;

  std::size_t clip_samples() const { return static_cast<std::size_t>(std::llround(clip_s * sample_rate)); }

  friend bool operator==(const FeatureConfig& a, const FeatureConfig& b) {
    return a.sample_rate == b.sample_rate && a.clip_s == b.clip_s && a.scale == b.scale &&
           a.stft.window_ms == b.stft.window_ms && a.stft.hop_ms == b.stft.hop_ms &&
           a.stft.fft_size == b.stft.fft_size && a.stft.window_fn == b.stft.window_fn &&
           a.stft.padding == b.stft.padding;
  }
};

inline void to_json(nlohmann::json& j, const FeatureConfig& f) {
  j = {{"sample_rate", f.sample_rate}, {"clip_s", f.clip_s}, {"stft", f.stft}, {"transform", "log1p"},
       {"scale", f.scale}};
}

inline void from_json(const nlohmann::json& j, FeatureConfig& f) {
  f.sample_rate = j.at("sample_rate").get<int>();
  f.clip_s = j.at("clip_s").get<double>();
  f.stft = j.at("stft").get<StftConfig>();
  f.scale = j.at("scale").get<double>();
  if (j.value("transform", std::string("log1p")) != "log1p") throw FormatError("unsupported feature transform");
}

/// Writes the features of one clip into `out` (n_bins * n_frames floats, bin-major).
inline void clip_features(std::span<const double> samples, const FeatureConfig& fc, std::span<float> out) {
  if (samples.size() != fc.clip_samples())
    throw InvalidArgument("clip has " + std::to_string(samples.size()) + " samples, expected " +
                          std::to_string(fc.clip_samples()));
  Waveform w{std::vector<double>(samples.begin(), samples.end()), fc.sample_rate};
  const Spectrogram s = power_spectrogram(w, fc.stft);
  if (out.size() != s.data.data.size()) throw ShapeError("feature buffer size mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(fc.scale * std::log1p(s.data.data[i]));
}

/// Per-sample input shape [1, n_bins, n_frames] implied by the feature config.
inline Shape feature_shape(const FeatureConfig& fc) {
  const std::size_t len = fc.clip_samples();
  const std::size_t win = fc.stft.window_samples(fc.sample_rate);
  const std::size_t hop = fc.stft.hop_samples(fc.sample_rate);
  return {1, fc.stft.fft_size / 2 + 1, stft_frame_count(len, win, hop, fc.stft.padding)};
}

inline Tensor<float> clip_tensor(std::span<const double> samples, const FeatureConfig& fc) {
  Shape s = feature_shape(fc);
  Tensor<float> t({1, s[0], s[1], s[2]});
  clip_features(samples, fc, t.data);
  return t;
}

}  // namespace nlg
