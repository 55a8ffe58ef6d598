#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "neuralogram/fft.hpp"
#include "neuralogram/rng.hpp"
#include "neuralogram/stft.hpp"
#include "neuralogram/wav_io.hpp"
#include "neuralogram/waveform.hpp"

using namespace nlg;

namespace {

// O(n^2) DFT, kept apart from the radix-2 code it checks.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x, std::size_t n) {
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < x.size() && j < n; ++j)
      acc += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * j) / static_cast<double>(n));
    out[k] = acc;
  }
  return out;
}

Waveform noise(std::size_t n, std::uint64_t seed, int sr = 8000) {
  Rng rng(seed);
  Waveform w{std::vector<double>(n), sr};
  for (auto& v : w.samples) v = rng.uniform(-1.0, 1.0);
  return w;
}

}  // namespace

TEST(Sine, LengthFollowsDuration) { EXPECT_EQ(gen_sine(440, 1.0, 8000).size(), 8000u); }

TEST(Sine, ZeroFrequencyIsSilent) {
  for (double v : gen_sine(0, 1.0, 8000).samples) EXPECT_EQ(v, 0.0);
}

TEST(Sine, UnitRms) { EXPECT_NEAR(rms(gen_sine(440, 1.0, 8000).samples), 1.0 / std::sqrt(2.0), 1e-3); }

TEST(Sine, SampleFormula) {
  const auto w = gen_sine(123.0, 0.01, 8000, 0.7);
  for (std::size_t n = 0; n < w.size(); ++n)
    EXPECT_NEAR(w.samples[n], 0.7 * std::sin(2 * std::numbers::pi * 123.0 * n / 8000.0), 1e-12);
}

TEST(Sine, AboveNyquistIsAliasing) {
  EXPECT_THROW(gen_sine(4000, 1.0, 8000), AliasingError);
  EXPECT_THROW(gen_sine(5000, 1.0, 8000), AliasingError);
  EXPECT_THROW(gen_sine(440, 0.0, 8000), InvalidArgument);
}

TEST(Chirp, ZeroSweepEqualsSine) {
  EXPECT_EQ(gen_linear_chirp(440, 440, 1.0, 8000).samples, gen_sine(440, 1.0, 8000).samples);
}

TEST(Chirp, MidpointFrequency) {
  const auto w = gen_linear_chirp(100, 200, 10.0, 8000);
  const auto s = power_spectrogram(w, StftConfig{});
  const std::size_t frame = static_cast<std::size_t>(std::llround(5.0 / s.hop_s));
  const double expect_bin = 150.0 / s.bin_hz;
  EXPECT_NEAR(static_cast<double>(argmax_bin(s, frame)), expect_bin, 1.0);
}

TEST(Chirp, DefaultProbeLength) {
  const auto w = concat(gen_linear_chirp(4000, 1, 30, 8000), gen_linear_chirp(1, 4000, 30, 8000));
  EXPECT_EQ(w.size(), 480000u);
  EXPECT_THROW(gen_linear_chirp(0, 100, 1, 8000), InvalidArgument);
  EXPECT_THROW(gen_linear_chirp(100, 4001, 1, 8000), AliasingError);
}

TEST(Chirp, ArgmaxNonDecreasing) {
  const auto s = power_spectrogram(gen_linear_chirp(50, 3500, 4.0, 8000), StftConfig{});
  std::size_t prev = 0;
  for (std::size_t m = 2; m + 2 < s.n_frames(); ++m) {
    const std::size_t b = argmax_bin(s, m);
    EXPECT_GE(b + 1, prev) << "frame " << m;
    prev = std::max(prev, b);
  }
}

TEST(ImpulseTrain, ConstantPeriod) {
  const auto w = gen_impulse_train(0.1, 0.1, 1.05, 8000);
  std::vector<std::size_t> at;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w.samples[i] != 0.0) at.push_back(i);
  ASSERT_EQ(at.size(), 11u);
  for (std::size_t k = 0; k < at.size(); ++k) EXPECT_EQ(at[k], k * 800);
}

TEST(ImpulseTrain, CountMatchesIntegratedRate) {
  const double p0 = 0.1, p1 = 0.05, dur = 1.0;
  // midpoint rule on 1/p(t)
  const int steps = 1000000;
  double integral = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double t = (i + 0.5) * dur / steps;
    integral += 1.0 / (p0 + (p1 - p0) * t / dur) * dur / steps;
  }
  const auto w = gen_impulse_train(p0, p1, dur, 8000);
  std::size_t count = 0;
  for (double v : w.samples) count += v != 0.0;
  EXPECT_EQ(count, 1 + static_cast<std::size_t>(std::floor(integral)));
}

TEST(ImpulseTrain, DefaultProbeReachesOneMillisecond) {
  const auto w = gen_impulse_train(0.1, 0.001, 300, 8000);
  EXPECT_EQ(w.size(), 2400000u);
  std::size_t last = 0, prev = 0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w.samples[i] != 0.0) {
      prev = last;
      last = i;
    }
  EXPECT_LE(last - prev, 9u);  // ~1 ms at the end
  EXPECT_THROW(gen_impulse_train(0.1, 0.0002, 1, 8000), InvalidArgument);
}

TEST(Resample, KeepsToneBin) {
  const auto w = resample(gen_sine(440, 1.0, 16000), 8000);
  EXPECT_EQ(w.sample_rate, 8000);
  EXPECT_EQ(w.size(), 8000u);
  const auto s = power_spectrogram(w, StftConfig{});
  EXPECT_NEAR(static_cast<double>(argmax_bin(s, 50)), 440.0 / s.bin_hz, 1.0);
}

TEST(Resample, IdentityRate) {
  const auto w = noise(1000, 3);
  const auto r = resample(w, 8000);
  ASSERT_EQ(r.size(), w.size());
  std::vector<double> diff(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) diff[i] = r.samples[i] - w.samples[i];
  EXPECT_LT(rms(diff), 1e-6);
}

TEST(Resample, RejectsAboveNewNyquist) {
  // steady state only: the hard onset and cutoff of the tone itself have
  // in-band content within one kernel half-width of either end
  const auto r = resample(gen_sine(6000, 1.0, 16000), 8000);
  const std::vector<double> inner(r.samples.begin() + 32, r.samples.end() - 32);
  EXPECT_LT(rms(inner), 1e-3);
  EXPECT_LT(rms(inner), 0.7071 * 1e-3);  // >= 60 dB below the input tone
  EXPECT_THROW(resample(r, 0), InvalidArgument);
}

TEST(Resample, LengthRounding) {
  EXPECT_EQ(resample(noise(1001, 4, 44100), 8000).size(), static_cast<std::size_t>(std::llround(1001 * 8000.0 / 44100)));
}

TEST(Fft, MatchesNaiveDft) {
  const auto w = noise(200, 9);
  const auto a = fft(w.samples, 256);
  const auto b = naive_dft(w.samples, 256);
  for (std::size_t k = 0; k < 256; ++k) EXPECT_LT(std::abs(a[k] - b[k]), 1e-9);
  EXPECT_THROW(fft(w.samples, 200), InvalidArgument);
}

TEST(Stft, DeskClipShape) {
  const auto s = power_spectrogram(noise(16000, 1), StftConfig{});
  EXPECT_EQ(s.n_bins(), 129u);
  EXPECT_EQ(s.n_frames(), 200u);
  EXPECT_DOUBLE_EQ(s.bin_hz, 8000.0 / 256);
  EXPECT_DOUBLE_EQ(s.hop_s, 0.01);
}

TEST(Stft, ZeroInZeroOut) {
  const auto s = power_spectrogram(Waveform{std::vector<double>(4000, 0.0), 8000}, StftConfig{});
  for (double v : s.data.data) EXPECT_EQ(v, 0.0);
}

TEST(Stft, RectangularToneBin) {
  StftConfig c;
  c.window_fn = WindowFn::rectangular;
  c.padding = Padding::valid;
  const auto s = power_spectrogram(gen_sine(1000, 1.0, 8000), c);
  for (std::size_t m = 0; m < s.n_frames(); ++m) EXPECT_EQ(argmax_bin(s, m), 32u);
  // center padding: the reflected first and last frames are not a pure tone
  c.padding = Padding::center;
  const auto t = power_spectrogram(gen_sine(1000, 1.0, 8000), c);
  for (std::size_t m = 2; m + 2 < t.n_frames(); ++m) EXPECT_EQ(argmax_bin(t, m), 32u);
}

TEST(Stft, ParsevalPerFrame) {
  StftConfig c;
  c.window_fn = WindowFn::rectangular;
  c.padding = Padding::valid;
  const auto w = noise(2000, 5);
  const auto s = power_spectrogram(w, c);
  const std::size_t win = c.window_samples(8000), hop = c.hop_samples(8000);
  for (std::size_t m = 0; m < s.n_frames(); ++m) {
    std::vector<double> frame(w.samples.begin() + m * hop, w.samples.begin() + m * hop + win);
    double energy = 0.0;
    for (double v : frame) energy += v * v;
    const auto full = naive_dft(frame, c.fft_size);
    double spec = 0.0;
    for (const auto& x : full) spec += std::norm(x);
    EXPECT_NEAR(energy, spec / c.fft_size, 1e-6 * energy);
    // the one-sided power rows are the first half of the full spectrum
    EXPECT_NEAR(s.data(5, m), std::norm(full[5]), 1e-9 * (1 + std::norm(full[5])));
  }
}

TEST(Stft, CenterFrameCountLaw) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    StftConfig c;
    c.hop_ms = 1.0 + static_cast<double>(rng.below(30));
    const std::size_t len = 1 + rng.below(5000);
    const std::size_t hop = c.hop_samples(8000);
    const auto s = power_spectrogram(noise(len, trial), c);
    EXPECT_EQ(s.n_frames(), (len + hop - 1) / hop) << len << " " << hop;
  }
}

TEST(Stft, ValidModeCountAndError) {
  StftConfig c;
  c.padding = Padding::valid;
  EXPECT_EQ(power_spectrogram(noise(1000, 2), c).n_frames(), (1000 - 240) / 80 + 1);
  EXPECT_THROW(power_spectrogram(noise(100, 2), c), InvalidArgument);
}

TEST(Stft, NonNegative) {
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (double v : power_spectrogram(noise(3000, seed), StftConfig{}).data.data) EXPECT_GE(v, 0.0);
}

TEST(Stft, ConfigValidation) {
  StftConfig c;
  c.fft_size = 128;  // 240-sample window does not fit
  EXPECT_THROW(power_spectrogram(noise(1000, 1), c), InvalidArgument);
  c = {};
  c.hop_ms = 40;
  EXPECT_THROW(power_spectrogram(noise(1000, 1), c), InvalidArgument);
}

TEST(Wav, RoundTripWithinQuantization) {
  auto w = noise(500, 8);
  w.samples[0] = 1.5;  // saturates
  w.samples[1] = -1.5;
  const auto back = decode_wav(encode_wav(w));
  ASSERT_EQ(back.size(), w.size());
  EXPECT_EQ(back.sample_rate, 8000);
  EXPECT_EQ(encode_wav(w).size(), 44 + 2 * w.size());
  EXPECT_DOUBLE_EQ(back.samples[0], 1.0);
  EXPECT_DOUBLE_EQ(back.samples[1], -32768.0 / 32767.0);
  for (std::size_t i = 2; i < w.size(); ++i) EXPECT_NEAR(back.samples[i], w.samples[i], 0.5 / 32767 + 1e-12);
}

TEST(Wav, QuantizeRounds) {
  EXPECT_EQ(quantize_pcm16(0.5), 16384);
  EXPECT_EQ(quantize_pcm16(-0.5), -16384);
  EXPECT_EQ(quantize_pcm16(2.0), 32767);
  EXPECT_EQ(quantize_pcm16(-2.0), -32768);
}

TEST(Wav, Corruption) {
  auto bytes = encode_wav(noise(100, 1));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_wav(bad), FormatError);
  bad = bytes;
  bad.resize(100);
  EXPECT_THROW(decode_wav(bad), TruncatedError);
  bad = bytes;
  bad[22] = 2;  // stereo
  EXPECT_THROW(decode_wav(bad), FormatError);
}
