#pragma once

// Mono waveforms and the probe/corpus signal generators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "neuralogram/errors.hpp"

namespace nlg {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 8000;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

namespace detail {

inline std::size_t sample_count(double dur, int sample_rate) {
  if (!(dur > 0.0)) throw InvalidArgument("duration must be positive");
  if (sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
  return static_cast<std::size_t>(std::llround(dur * sample_rate));
}

inline double nyquist(int sample_rate) { return 0.5 * sample_rate; }

// Shared by gen_sine and gen_linear_chirp so a zero-rate chirp is bit-identical to a sine.
inline double sweep_phase(double f0, double half_rate, double t) {
  return 2.0 * std::numbers::pi * (f0 * t + half_rate * t * t);
}

}  // namespace detail

inline double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

inline Waveform gen_sine(double freq, double dur, int sample_rate, double amp = 1.0) {
  if (freq < 0.0) throw InvalidArgument("frequency must be non-negative");
  if (freq >= detail::nyquist(sample_rate))
    throw AliasingError("sine at " + std::to_string(freq) + " Hz aliases at sample rate " +
                        std::to_string(sample_rate));
  const std::size_t n = detail::sample_count(dur, sample_rate);
  Waveform w{std::vector<double>(n), sample_rate};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    w.samples[i] = amp * std::sin(detail::sweep_phase(freq, 0.0, t));
  }
  return w;
}

/// Linear sweep with instantaneous frequency f0 + (f1 - f0) t / dur.
/// Endpoints may sit exactly at Nyquist (the classic 4000 Hz -> 1 Hz probe at 8 kHz).
inline Waveform gen_linear_chirp(double f0, double f1, double dur, int sample_rate, double amp = 1.0) {
  const double nyq = detail::nyquist(sample_rate);
  if (!(f0 > 0.0) || !(f1 > 0.0)) throw InvalidArgument("chirp endpoints must be positive");
  if (f0 > nyq || f1 > nyq) throw AliasingError("chirp endpoint above Nyquist");
  const std::size_t n = detail::sample_count(dur, sample_rate);
  const double half_rate = (f1 - f0) / (2.0 * dur);
  Waveform w{std::vector<double>(n), sample_rate};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    w.samples[i] = amp * std::sin(detail::sweep_phase(f0, half_rate, t));
  }
  return w;
}

/// Accumulated impulse count  integral_0^t ds / p(s)  for p(s) = p0 + (p1 - p0) s / dur.
inline double impulse_phase(double p0, double p1, double dur, double t) {
  const double slope = (p1 - p0) / dur;
  if (std::abs(slope) < 1e-15) return t / p0;
  return std::log1p(slope * t / p0) / slope;
}

/// Time at which impulse_phase reaches k.
inline double impulse_time(double p0, double p1, double dur, double k) {
  const double slope = (p1 - p0) / dur;
  if (std::abs(slope) < 1e-15) return k * p0;
  return p0 * std::expm1(slope * k) / slope;
}

/// Instantaneous rate (Hz) of the accelerating impulse train at time t.
inline double impulse_rate(double p0, double p1, double dur, double t) {
  return 1.0 / (p0 + (p1 - p0) * t / dur);
}

/// Unit impulses at t = 0 and wherever the accumulated rate crosses an integer.
inline Waveform gen_impulse_train(double p0, double p1, double dur, int sample_rate) {
  const double min_period = 2.0 / sample_rate;
  if (p0 < min_period || p1 < min_period)
    throw InvalidArgument("impulse period below two samples");
  const std::size_t n = detail::sample_count(dur, sample_rate);
  Waveform w{std::vector<double>(n, 0.0), sample_rate};
  for (long k = 0;; ++k) {
    const double t = impulse_time(p0, p1, dur, static_cast<double>(k));
    if (t > dur) break;
    const auto idx = static_cast<std::size_t>(std::llround(t * sample_rate));
    if (idx < n) w.samples[idx] = 1.0;
  }
  return w;
}

inline Waveform concat(const Waveform& a, const Waveform& b) {
  if (a.sample_rate != b.sample_rate) throw InvalidArgument("sample rates differ");
  Waveform out = a;
  out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
  return out;
}

namespace detail {

inline double kaiser(double u, double beta) {
  if (std::abs(u) > 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - u * u)) / std::cyl_bessel_i(0.0, beta);
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace detail

/// Kaiser-windowed sinc resampling to an arbitrary rate.
///
/// The low-pass sits at 0.9 of the lower Nyquist with the stopband starting at
/// that Nyquist; the Kaiser design targets 80 dB of stopband attenuation.
inline Waveform resample(const Waveform& wav, int target_rate) {
  if (target_rate <= 0) throw InvalidArgument("target rate must be positive");
  if (target_rate == wav.sample_rate) return wav;

  constexpr double kAttenDb = 80.0;
  const double ratio = static_cast<double>(target_rate) / wav.sample_rate;
  const double scale = std::min(1.0, ratio);
  const double cutoff = 0.45 * scale;      // cycles per input sample
  const double transition = 0.1 * scale;  // cycles per input sample
  const double beta = 0.1102 * (kAttenDb - 8.7);
  const double half_width = std::ceil((kAttenDb - 7.95) / (14.36 * transition) / 2.0);

  const std::size_t in_len = wav.samples.size();
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(in_len) * ratio));
  Waveform out{std::vector<double>(out_len, 0.0), target_rate};
  if (in_len == 0) return out;
  const auto& x = wav.samples;
  // samples outside the signal count as silence
  auto sample = [&](long n) {
    return n < 0 || n >= static_cast<long>(in_len) ? 0.0 : x[static_cast<std::size_t>(n)];
  };
  for (std::size_t j = 0; j < out_len; ++j) {
    const double pos = static_cast<double>(j) / ratio;
    const auto lo = static_cast<long>(std::ceil(pos - half_width));
    const auto hi = static_cast<long>(std::floor(pos + half_width));
    double acc = 0.0;
    for (long n = lo; n <= hi; ++n) {
      const double d = pos - static_cast<double>(n);
      acc += sample(n) * 2.0 * cutoff * detail::sinc(2.0 * cutoff * d) * detail::kaiser(d / half_width, beta);
    }
    out.samples[j] = acc;
  }
  return out;
}

/// Scale so that max |x| equals `peak` (no-op on silence).
inline void peak_normalize(Waveform& w, double peak) {
  double m = 0.0;
  for (double v : w.samples) m = std::max(m, std::abs(v));
  if (m <= 0.0) return;
  const double g = peak / m;
  for (double& v : w.samples) v *= g;
}

}  // namespace nlg
