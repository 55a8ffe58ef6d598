#pragma once

// Short-time power spectrogram: frame m is |FFT(w * x_m)|^2 over bins 0..N/2.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "neuralogram/errors.hpp"
#include "neuralogram/fft.hpp"
#include "neuralogram/matrix.hpp"
#include "neuralogram/waveform.hpp"

namespace nlg {

enum class WindowFn { rectangular, hann };
enum class Padding { center, valid };

struct StftConfig {
  double window_ms = 30.0;
  double hop_ms = 10.0;
  std::size_t fft_size = 256;
  WindowFn window_fn = WindowFn::hann;
  Padding padding = Padding::center;

  std::size_t window_samples(int sample_rate) const {
    return static_cast<std::size_t>(std::llround(window_ms * sample_rate / 1000.0));
  }
  std::size_t hop_samples(int sample_rate) const {
    return static_cast<std::size_t>(std::llround(hop_ms * sample_rate / 1000.0));
  }

  void validate(int sample_rate) const {
    if (!(window_ms > 0.0) || !(hop_ms > 0.0)) throw InvalidArgument("window and hop must be positive");
    if (hop_ms > window_ms) throw InvalidArgument("hop longer than window");
    if (!is_power_of_two(fft_size)) throw InvalidArgument("fft_size must be a power of two");
    if (window_samples(sample_rate) > fft_size) throw InvalidArgument("window longer than fft_size");
    if (hop_samples(sample_rate) == 0) throw InvalidArgument("hop rounds to zero samples");
  }
};

/// n_bins x n_frames power matrix (row = frequency bin, column = frame).
struct Spectrogram {
  Matrix data;
  double bin_hz = 0.0;
  double hop_s = 0.0;

  std::size_t n_bins() const { return data.rows; }
  std::size_t n_frames() const { return data.cols; }
};

inline std::vector<double> make_window(WindowFn fn, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (fn == WindowFn::hann) {
    // Periodic Hann.
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

inline std::size_t stft_frame_count(std::size_t len, std::size_t win, std::size_t hop, Padding padding) {
  if (padding == Padding::center) return (len + hop - 1) / hop;
  if (len < win) throw InvalidArgument("signal shorter than the analysis window in valid mode");
  return (len - win) / hop + 1;
}

namespace detail {

// Reflect about the edges (numpy "reflect": the edge sample is not repeated).
inline double reflected(const std::vector<double>& x, long i) {
  const long n = static_cast<long>(x.size());
  if (n == 1) return x[0];
  const long period = 2 * (n - 1);
  long j = i % period;
  if (j < 0) j += period;
  if (j >= n) j = period - j;
  return x[static_cast<std::size_t>(j)];
}

}  // namespace detail

inline Spectrogram power_spectrogram(const Waveform& wav, const StftConfig& cfg) {
  cfg.validate(wav.sample_rate);
  const std::size_t win = cfg.window_samples(wav.sample_rate);
  const std::size_t hop = cfg.hop_samples(wav.sample_rate);
  const std::size_t len = wav.samples.size();
  if (len == 0) throw InvalidArgument("empty waveform");
  const std::size_t frames = stft_frame_count(len, win, hop, cfg.padding);
  const std::size_t bins = cfg.fft_size / 2 + 1;
  const auto window = make_window(cfg.window_fn, win);

  Spectrogram spec{Matrix(bins, frames), static_cast<double>(wav.sample_rate) / cfg.fft_size,
                   static_cast<double>(hop) / wav.sample_rate};
  std::vector<std::complex<double>> buf(cfg.fft_size);
  const long offset = cfg.padding == Padding::center ? static_cast<long>(win / 2) : 0;
  for (std::size_t m = 0; m < frames; ++m) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    const long start = static_cast<long>(m * hop) - offset;
    for (std::size_t i = 0; i < win; ++i) {
      const long idx = start + static_cast<long>(i);
      const double s = (idx >= 0 && idx < static_cast<long>(len)) ? wav.samples[static_cast<std::size_t>(idx)]
                                                                  : detail::reflected(wav.samples, idx);
      buf[i] = s * window[i];
    }
    fft_inplace(buf);
    for (std::size_t k = 0; k < bins; ++k) spec.data(k, m) = std::norm(buf[k]);
  }
  return spec;
}

/// Bin index holding the most power in frame m.
inline std::size_t argmax_bin(const Spectrogram& s, std::size_t m) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < s.n_bins(); ++k)
    if (s.data(k, m) > s.data(best, m)) best = k;
  return best;
}

}  // namespace nlg
