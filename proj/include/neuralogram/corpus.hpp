#pragma once

// Seeded multi-label synthetic corpus. Every clip is a mixture of one to
// max_active class generators with randomized parameters; clip i depends only
// on (seed, i).
//
// Per-class parameter ranges (all log-uniform unless noted):
//   sine            f in [80, 3500] Hz
//   harmonic_tone   f0 in [80, 800] Hz, harmonics below 3800 Hz with 1/h amplitudes
//   chirp_up        start in [100, 2000] Hz, span uniform [500, 1800] Hz (capped at 3900 Hz)
//   chirp_down      the same sweep reversed
//   white_noise     unit Gaussian
//   am_tone         carrier in [200, 3000] Hz, rate in [2, 12] Hz, depth uniform [0.5, 1]
//   impulse_train   period in [0.025, 0.25] s, random phase
//   filtered_noise  Gaussian noise through a two-pole resonator, centre in
//                   [300, 3000] Hz, pole radius uniform [0.95, 0.99]
// Each component is peak-normalized, scaled by a uniform [0.5, 1] gain, summed,
// and the mixture is peak-normalized to 0.9.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralogram/errors.hpp"
#include "neuralogram/rng.hpp"
#include "neuralogram/waveform.hpp"
#include "neuralogram/wav_io.hpp"

namespace nlg {

inline const std::vector<std::string>& known_classes() {
  static const std::vector<std::string> k{"sine",       "harmonic_tone", "chirp_up",      "chirp_down",
                                          "white_noise", "am_tone",      "impulse_train", "filtered_noise"};
  return k;
}

struct CorpusSpec {
  std::vector<std::string> classes = known_classes();
  std::size_t n_clips = 2000;
  double clip_dur = 2.0;
  int sample_rate = 8000;
  std::size_t max_active = 2;
  std::uint64_t seed = 42;

  void validate() const {
    if (classes.empty()) throw InvalidArgument("corpus needs at least one class");
    for (const auto& c : classes)
      if (std::find(known_classes().begin(), known_classes().end(), c) == known_classes().end())
        throw InvalidArgument("unknown corpus class '" + c + "'");
    if (n_clips == 0) throw InvalidArgument("n_clips must be positive");
    if (max_active < 1 || max_active > classes.size()) throw InvalidArgument("max_active must lie in [1, |classes|]");
    if (!(clip_dur > 0.0) || sample_rate <= 0) throw InvalidArgument("clip duration and rate must be positive");
  }
};

inline void to_json(nlohmann::json& j, const CorpusSpec& s) {
  j = {{"classes", s.classes},   {"n_clips", s.n_clips},       {"clip_dur", s.clip_dur},
       {"sample_rate", s.sample_rate}, {"max_active", s.max_active}, {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, CorpusSpec& s) {
  CorpusSpec d;
  s.classes = j.value("classes", d.classes);
  s.n_clips = j.value("n_clips", d.n_clips);
  s.clip_dur = j.value("clip_dur", d.clip_dur);
  s.sample_rate = j.value("sample_rate", d.sample_rate);
  s.max_active = j.value("max_active", d.max_active);
  s.seed = j.value("seed", d.seed);
}

struct LabeledClip {
  Waveform wave;
  std::vector<std::uint8_t> labels;  // multi-hot over CorpusSpec::classes
};

namespace detail {

inline double log_uniform(Rng& rng, double lo, double hi) { return std::exp(rng.uniform(std::log(lo), std::log(hi))); }

inline Waveform synth_class(const std::string& cls, double dur, int sr, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(std::llround(dur * sr));
  const double two_pi = 2.0 * std::numbers::pi;
  Waveform w{std::vector<double>(n, 0.0), sr};
  if (cls == "sine") {
    w = gen_sine(log_uniform(rng, 80.0, 3500.0), dur, sr);
  } else if (cls == "harmonic_tone") {
    const double f0 = log_uniform(rng, 80.0, 800.0);
    for (int h = 1; h * f0 < 3800.0; ++h) {
      const double phase = rng.uniform(0.0, two_pi);
      for (std::size_t i = 0; i < n; ++i)
        w.samples[i] += std::sin(two_pi * h * f0 * static_cast<double>(i) / sr + phase) / h;
    }
  } else if (cls == "chirp_up" || cls == "chirp_down") {
    const double lo = log_uniform(rng, 100.0, 2000.0);
    const double hi = std::min(3900.0, lo + rng.uniform(500.0, 1800.0));
    w = cls == "chirp_up" ? gen_linear_chirp(lo, hi, dur, sr) : gen_linear_chirp(hi, lo, dur, sr);
  } else if (cls == "white_noise") {
    for (auto& v : w.samples) v = rng.normal();
  } else if (cls == "am_tone") {
    const double fc = log_uniform(rng, 200.0, 3000.0);
    const double fm = log_uniform(rng, 2.0, 12.0);
    const double depth = rng.uniform(0.5, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sr;
      w.samples[i] = (1.0 + depth * std::sin(two_pi * fm * t)) * std::sin(two_pi * fc * t);
    }
  } else if (cls == "impulse_train") {
    const double period = log_uniform(rng, 0.025, 0.25);
    const auto shift = static_cast<std::size_t>(rng.uniform() * period * sr);
    const Waveform full = gen_impulse_train(period, period, dur + period, sr);
    std::copy(full.samples.begin() + static_cast<long>(shift), full.samples.begin() + static_cast<long>(shift + n),
              w.samples.begin());
  } else if (cls == "filtered_noise") {
    const double fc = log_uniform(rng, 300.0, 3000.0);
    const double r = rng.uniform(0.95, 0.99);
    const double a1 = 2.0 * r * std::cos(two_pi * fc / sr);
    const double a2 = -r * r;
    double y1 = 0.0, y2 = 0.0;
    for (auto& v : w.samples) {
      const double y = rng.normal() + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      v = y;
    }
  } else {
    throw InvalidArgument("unknown corpus class '" + cls + "'");
  }
  return w;
}

}  // namespace detail

/// Clip `index` of the corpus; a pure function of (spec, index).
inline LabeledClip make_clip(const CorpusSpec& spec, std::size_t index) {
  Rng rng = Rng::derive(spec.seed, index);
  const std::size_t k = spec.classes.size();
  const std::size_t active = 1 + static_cast<std::size_t>(rng.below(spec.max_active));
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  for (std::size_t i = 0; i < active; ++i) std::swap(order[i], order[i + rng.below(k - i)]);

  LabeledClip clip{Waveform{std::vector<double>(static_cast<std::size_t>(std::llround(spec.clip_dur * spec.sample_rate)),
                                                0.0),
                            spec.sample_rate},
                   std::vector<std::uint8_t>(k, 0)};
  for (std::size_t a = 0; a < active; ++a) {
    const std::size_t c = order[a];
    clip.labels[c] = 1;
    Waveform part = detail::synth_class(spec.classes[c], spec.clip_dur, spec.sample_rate, rng);
    peak_normalize(part, rng.uniform(0.5, 1.0));
    for (std::size_t i = 0; i < clip.wave.samples.size(); ++i) clip.wave.samples[i] += part.samples[i];
  }
  peak_normalize(clip.wave, 0.9);
  return clip;
}

inline std::vector<LabeledClip> make_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::vector<LabeledClip> out;
  out.reserve(spec.n_clips);
  for (std::size_t i = 0; i < spec.n_clips; ++i) out.push_back(make_clip(spec, i));
  return out;
}

/// Writes clip_<i>.wav files and manifest.csv (clip_id, filename, one 0/1 column per class).
inline void export_corpus(const CorpusSpec& spec, const std::vector<LabeledClip>& clips,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.csv").string());
  manifest << "clip_id,filename";
  for (const auto& c : spec.classes) manifest << ',' << c;
  manifest << '\n';
  for (std::size_t i = 0; i < clips.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clip_%05zu.wav", i);
    write_wav((dir / name).string(), clips[i].wave);
    manifest << i << ',' << name;
    for (auto l : clips[i].labels) manifest << ',' << int(l);
    manifest << '\n';
  }
}

}  // namespace nlg
