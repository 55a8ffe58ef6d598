#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"

using namespace nlg;
using namespace nlg::testing;

namespace {

// Down sweep over frames [0, d), up sweep over [d, 2d). Row r responds to
// frequency tuned[r] with a gaussian bump.
struct ChirpFixture {
  Matrix ng;
  std::vector<double> freq;
  std::vector<SweepHalf> half;
};

ChirpFixture v_shaped(const std::vector<double>& tuned, std::size_t d = 60) {
  ChirpFixture f;
  for (std::size_t c = 0; c < d; ++c) {
    f.freq.push_back(4000.0 - 4000.0 * static_cast<double>(c) / static_cast<double>(d - 1));
    f.half.push_back(SweepHalf::down);
  }
  for (std::size_t c = 0; c < d; ++c) {
    f.freq.push_back(4000.0 * static_cast<double>(c) / static_cast<double>(d - 1));
    f.half.push_back(SweepHalf::up);
  }
  f.ng = Matrix(tuned.size(), 2 * d);
  for (std::size_t r = 0; r < tuned.size(); ++r)
    for (std::size_t c = 0; c < 2 * d; ++c) {
      const double z = (f.freq[c] - tuned[r]) / 100.0;
      f.ng(r, c) = std::exp(-z * z);
    }
  return f;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

}  // namespace

TEST(SortRows, DiagonalIsIdentity) {
  Matrix m(6, 6);
  for (std::size_t i = 0; i < 6; ++i) m(i, i) = 1.0;
  const auto s = sort_rows_by_peak_time(m, 0.5);
  EXPECT_EQ(s.permutation, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(s.data.data, m.data);
  EXPECT_EQ(s.n_active, 6u);
}

TEST(SortRows, ReversedDiagonal) {
  Matrix m(5, 5);
  for (std::size_t i = 0; i < 5; ++i) m(i, 4 - i) = 1.0;
  const auto s = sort_rows_by_peak_time(m, 0.5);
  EXPECT_EQ(s.permutation, (std::vector<std::size_t>{4, 3, 2, 1, 0}));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(s.data(i, i), 1.0);
}

TEST(SortRows, RandomMatrixProperties) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Matrix m(50, 40);
    for (auto& v : m.data) v = rng.uniform();
    const double thr = 0.97;
    const auto s = sort_rows_by_peak_time(m, thr);
    // bijection
    auto p = s.permutation;
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < p.size(); ++i) ASSERT_EQ(p[i], i);
    // rows are moved intact
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t c = 0; c < 40; ++c) ASSERT_EQ(s.data(i, c), m(s.permutation[i], c));
    // active rows first, with non-decreasing peak columns
    std::size_t prev = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      const auto row = std::span<const double>(s.data.data).subspan(i * 40, 40);
      const auto peak = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      const bool active = row[peak] >= thr;
      EXPECT_EQ(active, i < s.n_active);
      if (active) {
        EXPECT_GE(peak, prev);
        prev = peak;
      }
    }
  }
}

TEST(SortRows, ColumnWindowAndErrors) {
  Matrix m(2, 4);
  m(0, 3) = 1.0;  // peaks late overall
  m(0, 0) = 0.5;
  m(1, 1) = 0.8;
  EXPECT_EQ(sort_rows_by_peak_time(m, 0.1).permutation, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(sort_rows_by_peak_time(m, 0.1, 0, 2).permutation, (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(sort_rows_by_peak_time(Matrix{}, 0.1), InvalidArgument);
  EXPECT_THROW(sort_rows_by_peak_time(m, 0.1, 3, 3), InvalidArgument);
}

TEST(ChirpMetrics, DiagonalFixtureIsPerfect) {
  const auto f = v_shaped(linspace(300.0, 3700.0, 40));
  const auto m = chirp_metrics(f.ng, f.freq, f.half, 0.1);
  EXPECT_DOUBLE_EQ(m.spearman, 1.0);
  EXPECT_GT(m.r2, 0.999);
  EXPECT_EQ(m.n_tuned, 40u);
  EXPECT_DOUBLE_EQ(m.active_fraction, 1.0);
  EXPECT_FALSE(m.chance_level);
}

TEST(ChirpMetrics, InvariantToRowOrder) {
  auto tuned = linspace(300.0, 3700.0, 40);
  Rng rng(3);
  std::shuffle(tuned.begin(), tuned.end(), rng);
  const auto f = v_shaped(tuned);
  const auto m = chirp_metrics(f.ng, f.freq, f.half, 0.1);
  EXPECT_DOUBLE_EQ(m.spearman, 1.0);
  EXPECT_GT(m.r2, 0.999);
}

TEST(ChirpMetrics, UnrelatedHalvesNearChance) {
  // each row peaks at an independent random frequency in each half
  std::vector<double> sp;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const std::size_t d = 60, n = 80;
    Matrix ng(n, 2 * d);
    std::vector<double> freq;
    std::vector<SweepHalf> half;
    for (std::size_t c = 0; c < 2 * d; ++c) {
      freq.push_back(static_cast<double>(c < d ? d - c : c - d));
      half.push_back(c < d ? SweepHalf::down : SweepHalf::up);
    }
    for (std::size_t r = 0; r < n; ++r) {
      ng(r, rng.below(d)) = 1.0;
      ng(r, d + rng.below(d)) = 1.0;
    }
    sp.push_back(chirp_metrics(ng, freq, half, 0.5).spearman);
  }
  EXPECT_LT(std::abs(median(sp)), 0.1);
}

TEST(ChirpMetrics, DormantAndOneSidedRows) {
  auto f = v_shaped({1000.0, 2000.0, 3000.0, 1500.0});
  for (std::size_t c = 0; c < f.ng.cols; ++c) {
    f.ng(3, c) = f.half[c] == SweepHalf::up ? 0.0 : f.ng(3, c);  // fires on the way down only
  }
  Matrix bigger(5, f.ng.cols);
  std::copy(f.ng.data.begin(), f.ng.data.end(), bigger.data.begin());  // row 4 silent
  const auto m = chirp_metrics(bigger, f.freq, f.half, 0.5);
  EXPECT_EQ(m.n_active, 4u);
  EXPECT_EQ(m.n_tuned, 3u);
  EXPECT_DOUBLE_EQ(m.active_fraction, 0.8);
  EXPECT_THROW(chirp_metrics(bigger, std::vector<double>(3), f.half, 0.5), ShapeError);
}

TEST(ChirpLayout, FrameFrequenciesAndHalves) {
  Neuralogram ng{Matrix(1, 117), 0.5, 2.0, 0, {}};
  ChirpProbeConfig c;
  std::vector<double> freq;
  std::vector<SweepHalf> half;
  chirp_frame_layout(ng, c, freq, half);
  EXPECT_NEAR(freq[0], 4000.0 - 3999.0 / 30.0, 1e-9);
  EXPECT_NEAR(freq[58], 1.0, 1e-9);  // centre at 30 s
  EXPECT_NEAR(freq[116], 4000.0 - 3999.0 / 30.0, 1e-9);
  EXPECT_EQ(std::count(half.begin(), half.end(), SweepHalf::down), 57);
  EXPECT_EQ(std::count(half.begin(), half.end(), SweepHalf::straddle), 3);
  EXPECT_EQ(std::count(half.begin(), half.end(), SweepHalf::up), 57);
  EXPECT_EQ(chirp_probe_signal(c, 8000).size(), 480000u);
}

TEST(ChirpProbe, RunsOnSmallModel) {
  ChirpProbeConfig c;
  c.dur = 12.0;
  const auto r = chirp_probe(tiny_checkpoint(), c);
  EXPECT_EQ(r.neuralogram.n_frames(), 21u);
  EXPECT_EQ(r.report.kind, "chirp");
  EXPECT_EQ(r.report.metrics.at("frames"), 21);
  EXPECT_EQ(r.sorted.permutation.size(), 6u);
  c.f_lo = 5000.0;
  EXPECT_THROW(chirp_probe(tiny_checkpoint(), c), InvalidArgument);
}

TEST(Cutoff, CleanStep) {
  const auto rates = linspace(1.0, 60.0, 119);  // 0.5 Hz spacing
  std::vector<double> e(rates.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = rates[i] <= 25.0 ? 1.0 : 0.1;
  const auto c = estimate_cutoff(e, rates);
  ASSERT_TRUE(c.hz);
  EXPECT_EQ(c.status, "ok");
  EXPECT_NEAR(*c.hz, 25.0, 0.5);
  EXPECT_DOUBLE_EQ(c.bin_hz, 0.5);
  EXPECT_DOUBLE_EQ(c.plateau, 1.0);
}

TEST(Cutoff, ShortTransientDoesNotReplacePlateau) {
  // four frames at 1.5x survive the 5-point median
  const auto rates = linspace(1.0, 60.0, 119);
  std::vector<double> e(rates.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = rates[i] <= 25.0 ? 1.0 : 0.1;
  for (std::size_t i = 20; i < 24; ++i) e[i] = 1.5;
  const auto c = estimate_cutoff(e, rates);
  ASSERT_TRUE(c.hz) << c.status;
  EXPECT_NEAR(*c.hz, 25.0, 0.5);
  EXPECT_DOUBLE_EQ(c.plateau, 1.0);
  EXPECT_EQ(c.plateau_start, 0u);
}

TEST(Cutoff, RisingStartDoesNotTriggerEarlyCutoff) {
  const auto rates = linspace(1.0, 60.0, 119);
  std::vector<double> e(rates.size());
  for (std::size_t i = 0; i < e.size(); ++i)
    e[i] = rates[i] < 5.0 ? 0.2 : (rates[i] <= 40.0 ? 1.0 : 0.0);
  const auto c = estimate_cutoff(e, rates);
  ASSERT_TRUE(c.hz);
  EXPECT_NEAR(*c.hz, 40.0, 0.5);
  EXPECT_GT(c.plateau_start, 0u);
}

TEST(Cutoff, FlatCurveHasNoCutoff) {
  const auto rates = linspace(1.0, 60.0, 50);
  const std::vector<double> flat(50, 3.0);
  const auto c = estimate_cutoff(flat, rates);
  EXPECT_FALSE(c.hz);
  EXPECT_EQ(c.status, "no_drop");
  const std::vector<double> zero(50, 0.0);
  EXPECT_EQ(estimate_cutoff(zero, rates).status, "no_plateau");
}

TEST(Cutoff, NoisyStepWithinTwoHz) {
  const auto rates = linspace(1.0, 60.0, 119);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<double> e(rates.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = (rates[i] <= 25.0 ? 1.0 : 0.0) + 0.1 * rng.normal();
    const auto c = estimate_cutoff(e, rates);
    ASSERT_TRUE(c.hz) << seed;
    EXPECT_NEAR(*c.hz, 25.0, 2.0) << seed;
  }
}

TEST(Cutoff, InvariantToPositiveScaling) {
  const auto rates = linspace(1.0, 60.0, 119);
  Rng rng(4);
  std::vector<double> e(rates.size()), scaled(rates.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = std::max(0.0, 1.0 / (1.0 + std::exp((rates[i] - 30.0) / 2.0)) + 0.05 * rng.normal());
    scaled[i] = 37.5 * e[i];
  }
  const auto a = estimate_cutoff(e, rates), b = estimate_cutoff(scaled, rates);
  ASSERT_TRUE(a.hz && b.hz);
  EXPECT_EQ(*a.hz, *b.hz);
}

TEST(Cutoff, InputValidation) {
  const std::vector<double> e{1, 1, 1};
  EXPECT_THROW(estimate_cutoff(e, std::vector<double>{1, 3, 2}), InvalidArgument);
  EXPECT_THROW(estimate_cutoff(e, std::vector<double>{1, 2}), ShapeError);
  EXPECT_THROW(estimate_cutoff(e, std::vector<double>{1, 2, 3}, {.level_quantile = 1.5}), InvalidArgument);
}

TEST(RhythmCurve, SelectsCorrelatedRows) {
  const std::size_t frames = 100;
  const auto rates = linspace(1.0, 50.0, frames);
  std::vector<double> ref(frames);
  for (std::size_t j = 0; j < frames; ++j) ref[j] = rates[j] < 30.0 ? 1.0 : 0.2;
  Rng rng(1);
  Matrix ng(4, frames);
  for (std::size_t j = 0; j < frames; ++j) {
    ng(0, j) = 2.0 * ref[j];
    ng(1, j) = rng.uniform();
    ng(2, j) = 1.0 - ref[j];  // anti-correlated
    ng(3, j) = ref[j] + 0.01 * rng.normal();
  }
  const auto rc = rhythm_curve(ng, rates, ref);
  EXPECT_EQ(rc.tracking_rows, (std::vector<std::size_t>{0, 3}));
  EXPECT_NEAR(rc.energy[0], 4.0 + ng(3, 0) * ng(3, 0), 1e-12);
  ASSERT_TRUE(rc.cutoff.hz);
  EXPECT_LT(*rc.cutoff.hz, 30.0);
  EXPECT_GT(*rc.cutoff.hz, 29.0);

  Matrix none(1, frames);
  EXPECT_EQ(rhythm_curve(none, rates, ref).cutoff.status, "no_tracking_rows");
}

TEST(CombReference, ResolvedClicksBeatDenseClicks) {
  const FeatureConfig fc;
  const auto slow = gen_impulse_train(0.25, 0.25, 4.0, 8000);
  const auto dense = gen_impulse_train(0.005, 0.005, 4.0, 8000);
  const auto a = comb_energy_reference(slow, fc, 0.5, 5), b = comb_energy_reference(dense, fc, 0.5, 5);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_GT(a[j], 3.0 * b[j]);
}

TEST(RhythmProbe, ReportShapeOnSmallModel) {
  RhythmProbeConfig c;
  c.dur = 20.0;
  const auto r = rhythm_probe(tiny_checkpoint(), c);
  EXPECT_EQ(r.primary.p0, 0.1);
  EXPECT_EQ(r.doubled.p0, 0.2);
  EXPECT_EQ(r.primary.rates.size(), 37u);
  for (std::size_t j = 1; j < r.primary.rates.size(); ++j) EXPECT_GT(r.primary.rates[j], r.primary.rates[j - 1]);
  EXPECT_EQ(r.report.metrics.at("runs").size(), 2u);
  EXPECT_EQ(r.conclusive, r.cutoff_difference_bins.has_value());
  c.p1 = 0.5;
  EXPECT_THROW(rhythm_probe(tiny_checkpoint(), c), InvalidArgument);
}

TEST(EmbeddingStudy, ReusesCachedModelsAndDedupes) {
  CorpusSpec spec;
  spec.n_clips = 6;
  const auto held = make_feature_set(make_corpus(spec), FeatureConfig{});
  std::map<std::size_t, ModelCheckpoint> cache;
  for (std::size_t n : {3u, 5u}) {
    Network<float> net(desk_architecture(n));
    Rng rng(n);
    net.init(rng);
    cache.emplace(n, ModelCheckpoint::from_network(net, FeatureConfig{}, spec.classes));
  }
  ChirpProbeConfig chirp;
  chirp.dur = 10.0;
  TrainConfig tc;
  tc.steps = 0;
  const auto rows = embedding_size_study(held, held, spec.classes, FeatureConfig{}, {5, 3, 5}, tc, chirp, &cache);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].embedding_size, 5u);
  EXPECT_EQ(rows[1].embedding_size, 3u);
  EXPECT_EQ(rows[0].mean_auc, rows[2].mean_auc);
  EXPECT_EQ(cache.size(), 2u);
  EXPECT_THROW(embedding_size_study(held, held, spec.classes, FeatureConfig{}, {1}, tc, chirp, &cache),
               InvalidArgument);
}
