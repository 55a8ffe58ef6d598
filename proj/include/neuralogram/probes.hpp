#pragma once

// Probe experiments on a trained model: row sorting, chirp (pitch) probe,
// accelerating impulse-train (rhythm) probe with cutoff estimation, and the
// embedding-size study.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralogram/checkpoint.hpp"
#include "neuralogram/errors.hpp"
#include "neuralogram/extractor.hpp"
#include "neuralogram/matrix.hpp"
#include "neuralogram/stats.hpp"
#include "neuralogram/stft.hpp"
#include "neuralogram/trainer.hpp"
#include "neuralogram/waveform.hpp"

namespace nlg {

// ---------------------------------------------------------------------------
// Row sorting

struct SortedNeuralogram {
  Matrix data;
  std::vector<std::size_t> permutation;  // permutation[i] = source row shown at position i
  std::size_t n_active = 0;
  std::string criterion;
};

/// Active rows (max >= min_activation within [col_begin, col_end)) ordered by
/// the frame of their maximum, ties by row index; dormant rows follow in
/// their original order.
inline SortedNeuralogram sort_rows_by_peak_time(const Matrix& m, double min_activation, std::size_t col_begin = 0,
                                                std::size_t col_end = std::numeric_limits<std::size_t>::max()) {
  if (m.empty()) throw InvalidArgument("cannot sort an empty matrix");
  col_end = std::min(col_end, m.cols);
  if (col_begin >= col_end) throw InvalidArgument("empty column range");
  std::vector<std::pair<std::size_t, std::size_t>> active;  // (peak column, row)
  std::vector<std::size_t> dormant;
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::size_t best = col_begin;
    for (std::size_t c = col_begin + 1; c < col_end; ++c)
      if (m(r, c) > m(r, best)) best = c;
    if (m(r, best) >= min_activation)
      active.emplace_back(best, r);
    else
      dormant.push_back(r);
  }
  std::sort(active.begin(), active.end());
  SortedNeuralogram s{Matrix(m.rows, m.cols), {}, active.size(), "peak_time"};
  for (const auto& a : active) s.permutation.push_back(a.second);
  s.permutation.insert(s.permutation.end(), dormant.begin(), dormant.end());
  for (std::size_t i = 0; i < m.rows; ++i)
    std::copy_n(m.data.begin() + static_cast<long>(s.permutation[i] * m.cols), m.cols,
                s.data.data.begin() + static_cast<long>(i * m.cols));
  return s;
}

inline SortedNeuralogram sort_rows_by_peak_time(const Neuralogram& ng, double min_activation) {
  return sort_rows_by_peak_time(ng.data, min_activation);
}

// ---------------------------------------------------------------------------
// Reports

struct ProbeReport {
  std::string kind;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json artifacts = nlohmann::json::object();
};

inline void to_json(nlohmann::json& j, const ProbeReport& r) {
  j = {{"probe", r.kind}, {"config", r.config}, {"metrics", r.metrics}, {"artifacts", r.artifacts}};
}

namespace detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline double max_activation(const Matrix& m) {
  return m.empty() ? 0.0 : *std::max_element(m.data.begin(), m.data.end());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Chirp probe

/// Frame partition of a down-then-up sweep.
enum class SweepHalf { down, up, straddle };

struct ChirpMetrics {
  double spearman = std::nan("");  // down-half vs up-half peak frequency over tuned rows
  double r2 = std::nan("");        // up-half peak time vs sorted rank
  double active_fraction = 0.0;
  std::size_t n_active = 0;
  std::size_t n_tuned = 0;
  bool chance_level = true;
};

/// The permutation is learned on the down sweep (rows sorted by the frequency
/// at which they peak) and checked on the up sweep: a row tuned to a
/// frequency must peak at that same frequency on the way back up.
///
/// Active rows reach `min_activation` somewhere; tuned rows reach it in both
/// halves.
inline ChirpMetrics chirp_metrics(const Matrix& ng, std::span<const double> frame_freq,
                                  std::span<const SweepHalf> half, double min_activation) {
  if (frame_freq.size() != ng.cols || half.size() != ng.cols) throw ShapeError("per-frame metadata size mismatch");
  ChirpMetrics m;
  std::vector<double> down_freq, up_freq, up_time;
  for (std::size_t r = 0; r < ng.rows; ++r) {
    std::optional<std::size_t> best_down, best_up;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ng.cols; ++c) {
      const double v = ng(r, c);
      peak = std::max(peak, v);
      if (half[c] == SweepHalf::down && (!best_down || v > ng(r, *best_down))) best_down = c;
      if (half[c] == SweepHalf::up && (!best_up || v > ng(r, *best_up))) best_up = c;
    }
    if (peak < min_activation) continue;
    ++m.n_active;
    if (!best_down || !best_up || ng(r, *best_down) < min_activation || ng(r, *best_up) < min_activation) continue;
    down_freq.push_back(frame_freq[*best_down]);
    up_freq.push_back(frame_freq[*best_up]);
    up_time.push_back(static_cast<double>(*best_up));
  }
  m.n_tuned = down_freq.size();
  m.active_fraction = ng.rows ? static_cast<double>(m.n_active) / static_cast<double>(ng.rows) : 0.0;
  if (m.n_tuned >= 3) {
    m.spearman = spearman(down_freq, up_freq);
    std::vector<std::size_t> order(m.n_tuned);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return down_freq[a] < down_freq[b]; });
    std::vector<double> rank(m.n_tuned), t(m.n_tuned);
    for (std::size_t i = 0; i < m.n_tuned; ++i) {
      rank[i] = static_cast<double>(i);
      t[i] = up_time[order[i]];
    }
    m.r2 = linear_fit_r2(rank, t);
  }
  m.chance_level = !(std::abs(m.spearman) >= 0.3);
  return m;
}

struct ChirpProbeConfig {
  double f_hi = 4000.0;
  double f_lo = 1.0;
  double dur = 60.0;  // down sweep then up sweep, dur/2 each
  double hop_s = 0.5;
  double min_activation_rel = 0.1;  // fraction of the Neuralogram's global maximum
  double amp = 0.9;
};

inline void to_json(nlohmann::json& j, const ChirpProbeConfig& c) {
  j = {{"f_hi", c.f_hi}, {"f_lo", c.f_lo}, {"dur", c.dur}, {"hop_s", c.hop_s},
       {"min_activation_rel", c.min_activation_rel}, {"amp", c.amp}};
}

/// Down-then-up linear sweep between f_hi and f_lo.
inline Waveform chirp_probe_signal(const ChirpProbeConfig& c, int sample_rate) {
  return concat(gen_linear_chirp(c.f_hi, c.f_lo, c.dur / 2, sample_rate, c.amp),
                gen_linear_chirp(c.f_lo, c.f_hi, c.dur / 2, sample_rate, c.amp));
}

/// Instantaneous frequency at the centre of each frame and the sweep half the
/// whole window lies in.
inline void chirp_frame_layout(const Neuralogram& ng, const ChirpProbeConfig& c, std::vector<double>& freq,
                               std::vector<SweepHalf>& half) {
  const double turn = c.dur / 2;
  freq.resize(ng.n_frames());
  half.resize(ng.n_frames());
  for (std::size_t j = 0; j < ng.n_frames(); ++j) {
    const double t = ng.frame_time(j);
    const double start = t - 0.5 * ng.window_s, end = t + 0.5 * ng.window_s;
    freq[j] = t <= turn ? c.f_hi + (c.f_lo - c.f_hi) * t / turn : c.f_lo + (c.f_hi - c.f_lo) * (t - turn) / turn;
    half[j] = end <= turn + 1e-9 ? SweepHalf::down : (start >= turn - 1e-9 ? SweepHalf::up : SweepHalf::straddle);
  }
}

struct ChirpProbeResult {
  ProbeReport report;
  ChirpMetrics metrics;
  Neuralogram neuralogram;
  SortedNeuralogram sorted;  // sorted on the down sweep
};

inline ChirpProbeResult chirp_probe(const ModelCheckpoint& ckpt, const ChirpProbeConfig& c = {}) {
  if (!(c.f_hi > c.f_lo)) throw InvalidArgument("f_hi must exceed f_lo");
  const Waveform w = chirp_probe_signal(c, ckpt.features.sample_rate);
  ChirpProbeResult r;
  r.neuralogram = extract(w, ckpt, {.window_s = ckpt.features.clip_s, .hop_s = c.hop_s, .layer = std::nullopt});
  std::vector<double> freq;
  std::vector<SweepHalf> half;
  chirp_frame_layout(r.neuralogram, c, freq, half);
  const double thr = c.min_activation_rel * detail::max_activation(r.neuralogram.data);
  r.metrics = chirp_metrics(r.neuralogram.data, freq, half, thr);
  std::size_t down_end = 0;
  while (down_end < half.size() && half[down_end] == SweepHalf::down) ++down_end;
  r.sorted = sort_rows_by_peak_time(r.neuralogram.data, thr, 0, std::max<std::size_t>(down_end, 1));
  r.sorted.criterion = "peak_time_down_sweep";

  r.report.kind = "chirp";
  r.report.config = c;
  r.report.metrics = {{"spearman", detail::finite_or_null(r.metrics.spearman)},
                      {"r2", detail::finite_or_null(r.metrics.r2)},
                      {"active_row_fraction", r.metrics.active_fraction},
                      {"n_active", r.metrics.n_active},
                      {"n_tuned", r.metrics.n_tuned},
                      {"min_activation", thr},
                      {"chance_level", r.metrics.chance_level},
                      {"embedding_size", r.neuralogram.embedding_size()},
                      {"frames", r.neuralogram.n_frames()}};
  return r;
}

// ---------------------------------------------------------------------------
// Cutoff estimation

struct CutoffConfig {
  std::size_t median_width = 5;
  double level_quantile = 0.9;     // reference level: this quantile of the smoothed curve
  double plateau_tolerance = 0.1;  // plateau frames lie within this fraction of the reference level
  std::size_t min_plateau_frames = 5;
  double threshold = 0.5;
};

struct CutoffEstimate {
  std::optional<double> hz;
  std::optional<std::size_t> index;
  double plateau = 0.0;
  std::size_t plateau_start = 0;  // first frame at plateau level
  double bin_hz = 0.0;            // rate spacing between adjacent frames at the cutoff
  std::string status;             // "ok", "no_plateau", "no_drop"
};

/// Median-smooths the energy curve, takes the plateau as the median of the
/// smoothed frames at or above (1 - plateau_tolerance) times its
/// level_quantile, and returns the
/// largest rate r such that the smoothed energy stays at or above
/// threshold * plateau from the first plateau frame up to r.
///
/// The scan starts at the plateau rather than at the first frame: at slow
/// starting rates a window holds only a few impulses and the response is
/// still rising. The reference is a high quantile rather than the maximum so
/// that a transient of a few frames cannot stand in for the plateau.
inline CutoffEstimate estimate_cutoff(std::span<const double> energy, std::span<const double> rates,
                                      const CutoffConfig& cfg = {}) {
  if (energy.size() != rates.size()) throw ShapeError("energy and rate curves differ in length");
  for (std::size_t i = 1; i < rates.size(); ++i)
    if (!(rates[i] > rates[i - 1])) throw InvalidArgument("rates must be strictly increasing");
  CutoffEstimate e;
  e.status = "no_plateau";
  const std::size_t n = energy.size();
  if (n < 2) return e;
  const auto smooth = median_filter(energy, cfg.median_width);
  if (!(cfg.level_quantile >= 0.0 && cfg.level_quantile <= 1.0))
    throw InvalidArgument("level_quantile must lie in [0, 1]");
  std::vector<double> sorted = smooth;
  std::sort(sorted.begin(), sorted.end());
  const double ref = sorted[static_cast<std::size_t>(cfg.level_quantile * static_cast<double>(n - 1))];
  if (!(ref > 0.0)) return e;
  std::vector<double> level;
  std::optional<std::size_t> start;
  for (std::size_t i = 0; i < n; ++i)
    if (smooth[i] >= (1.0 - cfg.plateau_tolerance) * ref) {
      level.push_back(smooth[i]);
      if (!start) start = i;
    }
  if (level.size() < cfg.min_plateau_frames) return e;
  e.plateau = median(level);
  e.plateau_start = *start;
  const double thr = cfg.threshold * e.plateau;
  std::size_t j = *start;
  while (j + 1 < n && smooth[j + 1] >= thr) ++j;
  if (j + 1 == n) {
    e.status = "no_drop";
    return e;
  }
  e.index = j;
  e.hz = rates[j];
  e.bin_hz = rates[j + 1] - rates[j];
  e.status = "ok";
  return e;
}

// ---------------------------------------------------------------------------
// Rhythm probe

/// Click visibility of each context window: coefficient of variation of the
/// per-frame spectral energy. High when individual impulses are resolved,
/// near zero once they fuse into a steady texture.
inline std::vector<double> comb_energy_reference(const Waveform& w, const FeatureConfig& fc, double hop_s,
                                                 std::size_t frames) {
  const std::size_t win = fc.clip_samples();
  const auto hop = static_cast<std::size_t>(std::llround(hop_s * fc.sample_rate));
  std::vector<double> ref(frames, 0.0);
  for (std::size_t j = 0; j < frames; ++j) {
    Waveform clip{std::vector<double>(w.samples.begin() + static_cast<long>(j * hop),
                                      w.samples.begin() + static_cast<long>(j * hop + win)),
                  w.sample_rate};
    const Spectrogram s = power_spectrogram(clip, fc.stft);
    std::vector<double> e(s.n_frames(), 0.0);
    for (std::size_t k = 0; k < s.n_bins(); ++k)
      for (std::size_t m = 0; m < s.n_frames(); ++m) e[m] += s.data(k, m);
    const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
    if (mean <= 0.0) continue;
    double var = 0.0;
    for (double v : e) var += (v - mean) * (v - mean);
    ref[j] = std::sqrt(var / static_cast<double>(e.size())) / mean;
  }
  return ref;
}

struct RhythmCurve {
  std::vector<std::size_t> tracking_rows;
  std::vector<double> energy;  // per frame, sum of squared tracking-row activations
  CutoffEstimate cutoff;
};

/// Rows whose activation correlates >= min_corr with the reference are
/// rhythm-tracking; their per-frame energy feeds the cutoff estimate.
inline RhythmCurve rhythm_curve(const Matrix& ng, std::span<const double> rates, std::span<const double> reference,
                                double min_corr = 0.3, const CutoffConfig& cfg = {}) {
  if (rates.size() != ng.cols || reference.size() != ng.cols) throw ShapeError("per-frame metadata size mismatch");
  RhythmCurve rc;
  rc.energy.assign(ng.cols, 0.0);
  std::vector<double> row(ng.cols);
  for (std::size_t r = 0; r < ng.rows; ++r) {
    for (std::size_t c = 0; c < ng.cols; ++c) row[c] = ng(r, c);
    const double corr = pearson(row, reference);
    if (!(corr >= min_corr)) continue;
    rc.tracking_rows.push_back(r);
    for (std::size_t c = 0; c < ng.cols; ++c) rc.energy[c] += row[c] * row[c];
  }
  if (rc.tracking_rows.empty()) {
    rc.cutoff.status = "no_tracking_rows";
    return rc;
  }
  rc.cutoff = estimate_cutoff(rc.energy, rates, cfg);
  return rc;
}

struct RhythmProbeConfig {
  double p0 = 0.1;
  double p1 = 0.001;
  double dur = 300.0;
  double hop_s = 0.5;
  double min_corr = 0.3;
};

inline void to_json(nlohmann::json& j, const RhythmProbeConfig& c) {
  j = {{"p0", c.p0}, {"p1", c.p1}, {"dur", c.dur}, {"hop_s", c.hop_s}, {"min_corr", c.min_corr}};
}

struct RhythmRun {
  double p0 = 0.0;
  Neuralogram neuralogram;
  std::vector<double> rates;
  std::vector<double> reference;
  RhythmCurve curve;
};

inline RhythmRun rhythm_run(const ModelCheckpoint& ckpt, double p0, const RhythmProbeConfig& c) {
  const int sr = ckpt.features.sample_rate;
  const Waveform w = gen_impulse_train(p0, c.p1, c.dur, sr);
  RhythmRun run;
  run.p0 = p0;
  run.neuralogram = extract(w, ckpt, {.window_s = ckpt.features.clip_s, .hop_s = c.hop_s, .layer = std::nullopt});
  const std::size_t frames = run.neuralogram.n_frames();
  run.rates.resize(frames);
  for (std::size_t j = 0; j < frames; ++j) run.rates[j] = impulse_rate(p0, c.p1, c.dur, run.neuralogram.frame_time(j));
  run.reference = comb_energy_reference(w, ckpt.features, c.hop_s, frames);
  run.curve = rhythm_curve(run.neuralogram.data, run.rates, run.reference, c.min_corr);
  return run;
}

struct RhythmProbeResult {
  ProbeReport report;
  RhythmRun primary;    // starting period p0
  RhythmRun doubled;    // starting period 2 * p0
  std::optional<double> cutoff_difference_bins;
  bool conclusive = false;
};

/// Cutoff of the accelerating impulse train, measured twice: from p0 and from
/// 2 * p0, to test that it does not depend on the starting period.
inline RhythmProbeResult rhythm_probe(const ModelCheckpoint& ckpt, const RhythmProbeConfig& c = {}) {
  if (!(c.p0 > c.p1)) throw InvalidArgument("the period must shrink over the probe (p0 > p1)");
  RhythmProbeResult r;
  r.primary = rhythm_run(ckpt, c.p0, c);
  r.doubled = rhythm_run(ckpt, 2.0 * c.p0, c);
  const auto& a = r.primary.curve.cutoff;
  const auto& b = r.doubled.curve.cutoff;
  r.conclusive = a.hz.has_value() && b.hz.has_value();
  if (r.conclusive) {
    const double bin = std::max(a.bin_hz, b.bin_hz);
    r.cutoff_difference_bins = std::abs(*a.hz - *b.hz) / bin;
  }
  auto run_json = [](const RhythmRun& run) {
    const auto& e = run.curve.cutoff;
    return nlohmann::json{{"p0", run.p0},
                          {"cutoff_hz", e.hz ? nlohmann::json(*e.hz) : nlohmann::json()},
                          {"bin_hz", e.bin_hz},
                          {"plateau", e.plateau},
                          {"status", e.status},
                          {"n_tracking_rows", run.curve.tracking_rows.size()},
                          {"frames", run.neuralogram.n_frames()}};
  };
  r.report.kind = "rhythm";
  r.report.config = c;
  r.report.metrics = {{"runs", {run_json(r.primary), run_json(r.doubled)}},
                      {"cutoff_hz", a.hz ? nlohmann::json(*a.hz) : nlohmann::json()},
                      {"cutoff_difference_bins",
                       r.cutoff_difference_bins ? nlohmann::json(*r.cutoff_difference_bins) : nlohmann::json()},
                      {"conclusive", r.conclusive}};
  return r;
}

// ---------------------------------------------------------------------------
// Embedding-size study

struct StudyRow {
  std::size_t embedding_size = 0;
  double mean_auc = 0.0;
  double chirp_spearman = std::nan("");
};

/// Trains one desk model per embedding size on the same data and seed.
/// `cache` (keyed by size) supplies already-trained models and receives new ones.
inline std::vector<StudyRow> embedding_size_study(const FeatureSet& train_set, const FeatureSet& heldout,
                                                  const std::vector<std::string>& classes, const FeatureConfig& fc,
                                                  const std::vector<std::size_t>& sizes, const TrainConfig& tc,
                                                  const ChirpProbeConfig& chirp = {},
                                                  std::map<std::size_t, ModelCheckpoint>* cache = nullptr,
                                                  const ProgressFn& progress = {}) {
  std::map<std::size_t, ModelCheckpoint> local;
  auto& models = cache ? *cache : local;
  std::map<std::size_t, StudyRow> done;
  std::vector<StudyRow> rows;
  for (std::size_t n : sizes) {
    if (n < 2) throw InvalidArgument("embedding size must be at least 2");
    if (!done.count(n)) {
      if (!models.count(n))
        models.emplace(n, train(train_set, classes, desk_architecture(n, classes.size()), fc, tc, progress).checkpoint);
      const ModelCheckpoint& m = models.at(n);
      StudyRow row{n, evaluate(m, heldout).mean_auc, chirp_probe(m, chirp).metrics.spearman};
      done.emplace(n, row);
    }
    rows.push_back(done.at(n));
  }
  return rows;
}

}  // namespace nlg
