#include "spdregime/error.hpp"
#include "spdregime/regimes/regimes.hpp"
#include "spdregime/synth/synth.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

namespace spdregime {
namespace {

using namespace synth;

SynthSpec small_spec() {
  SynthSpec s;
  s.n_assets = 12;
  s.n_clusters = 3;
  s.subclusters_per_cluster = 2;
  s.n_series_total = 12 * 9;
  s.rng_seed = 4;
  return s;
}

TEST(SynthSpec, DefaultsAndValidation) {
  const SynthSpec s;
  EXPECT_EQ(s.n_windows(), 300);
  EXPECT_EQ(s.cluster_size(), 12);
  EXPECT_EQ(s.subcluster_size(), 6);
  EXPECT_EQ(s.permute_seed, 27u);
  EXPECT_NO_THROW(s.validate());
  auto bad = [](auto mutate) {
    SynthSpec c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](SynthSpec& c) { c.n_clusters = 7; }).validate(), ConfigError);
  EXPECT_THROW(bad([](SynthSpec& c) { c.dof = 2.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](SynthSpec& c) { c.regime_targets = {0.1, 0.2, 0.3}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](SynthSpec& c) { c.n_series_total = 61; }).validate(), ConfigError);
  FactorSpec f;
  f.beta_range = 1.0;
  EXPECT_THROW(f.validate(), ConfigError);
}

TEST(Factors, ImpliedMeanCorrelationMatchesBruteForce) {
  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> u(0.0, 0.55);
  for (int trial = 0; trial < 30; ++trial) {
    SynthSpec spec = small_spec();
    spec.n_levels = 1 + trial % 3;
    const LevelLoadings l{u(rng), u(rng), u(rng)};
    const SPDMatrix c = nested_corr(spec, l);
    EXPECT_NEAR(implied_mean_correlation(spec, l), mean_offdiag(c.matrix()), 1e-12);
    for (int i = 0; i < spec.n_assets; ++i) EXPECT_DOUBLE_EQ(c.matrix()(i, i), 1.0);
  }
}

TEST(Factors, NestedCorrBlockValues) {
  SynthSpec spec = small_spec();
  const LevelLoadings l{0.5, 0.4, 0.3};
  const Matrix c = nested_corr(spec, l).matrix();
  EXPECT_NEAR(c(0, 1), 0.25 + 0.16 + 0.09, 1e-15);  // same subcluster
  EXPECT_NEAR(c(0, 2), 0.25 + 0.16, 1e-15);         // same cluster only
  EXPECT_NEAR(c(0, 4), 0.25, 1e-15);                // different clusters
  EXPECT_EQ(asset_position(spec, 5).cluster, 1);
  EXPECT_EQ(asset_position(spec, 5).subcluster, 2);
  EXPECT_THROW(nested_corr(spec, {0.8, 0.5, 0.4}), ConfigError);
}

TEST(Factors, CalibrationHitsRegimeTargets) {
  const SynthSpec spec;
  const FactorSpec f;
  for (int r = 0; r < kNumRegimes; ++r) {
    const auto regime = static_cast<Regime>(r);
    const SPDMatrix c = build_block_hierarchical_corr(spec, f, regime);
    EXPECT_NEAR(mean_offdiag(c.matrix()), spec.regime_targets[r], 1e-9);
    const LevelLoadings l = calibrate_loadings(spec, f.base[r], spec.regime_targets[r]);
    EXPECT_NEAR(l.cluster / l.market, f.base[r].cluster / f.base[r].market, 1e-12);
  }
  EXPECT_THROW(calibrate_loadings(spec, {0.0, 0.0, 0.0}, 0.2), ConfigError);
  EXPECT_THROW(calibrate_loadings(spec, {1.0, 0.5, 0.4}, 0.99), ConfigError);
}

TEST(Factors, PerturbedCorrIsACorrelationMatrix) {
  const SynthSpec spec = small_spec();
  FactorSpec f;
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto regime = static_cast<Regime>(trial % 3);
    const SPDMatrix c = perturbed_corr(spec, f, regime, rng);
    EXPECT_LT((c.matrix().diagonal() - Vector::Ones(spec.n_assets)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(c.min_eigenvalue(), 0.0);
    EXPECT_LE(c.matrix().cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  }
  // Without jitter the perturbed draw is the calibrated matrix.
  f.beta_range = 0.0;
  f.eta_scale = 0.0;
  const SPDMatrix exact = perturbed_corr(spec, f, Regime::Normal, rng);
  EXPECT_LT(test::rel_diff(exact.matrix(), build_block_hierarchical_corr(spec, f, Regime::Normal).matrix()), 1e-12);
}

TEST(StudentT, SampleCovarianceApproachesTarget) {
  std::mt19937_64 rng(42);
  const SPDMatrix sigma = test::random_spd(3, rng, 0.5, 2.0);
  const Matrix x = student_t_sample(sigma, 6.0, 400000, std::uint64_t{7});
  const Vector mean = x.colwise().mean();
  const Matrix centred = x.rowwise() - mean.transpose();
  const Matrix cov = centred.transpose() * centred / static_cast<double>(x.rows() - 1);
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.01);
  EXPECT_LT((cov - sigma.matrix()).cwiseAbs().maxCoeff(), 0.05 * sigma.matrix().cwiseAbs().maxCoeff());
  EXPECT_EQ(student_t_sample(sigma, 6.0, 50, std::uint64_t{9}), student_t_sample(sigma, 6.0, 50, std::uint64_t{9}));
  EXPECT_THROW(student_t_sample(sigma, 2.0, 10, std::uint64_t{1}), DomainError);
  EXPECT_THROW(student_t_sample(sigma, 4.0, 0, std::uint64_t{1}), DomainError);
}

TEST(StudentT, HeavierTailsThanGaussian) {
  const SPDMatrix one = SPDMatrix::identity(1);
  const Matrix x = student_t_sample(one, 4.0, 200000, std::uint64_t{11});
  const double m2 = x.array().square().mean();
  const double m4 = x.array().pow(4).mean();
  EXPECT_NEAR(m2, 1.0, 0.03);
  EXPECT_GT(m4 / (m2 * m2), 4.0);  // excess kurtosis well above the Gaussian 3
}

TEST(Permutation, PermutesRowsAndColumnsTogether) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const SPDMatrix c = test::random_spd(7, rng);
    const Permuted p = permute_corr(c, std::uint64_t(trial));
    ASSERT_TRUE(regimes::is_permutation(p.permutation, 7));
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) EXPECT_EQ(p.corr.matrix()(i, j), c.matrix()(p.permutation[i], p.permutation[j]));
    EXPECT_EQ(permute_corr(c, std::uint64_t(trial)).permutation, p.permutation);
    EXPECT_NEAR(p.corr.min_eigenvalue(), c.min_eigenvalue(), 1e-12);
  }
  EXPECT_THROW(permute_corr(SPDMatrix::identity(3), std::vector<int>{0, 0, 1}), DomainError);
}

TEST(Generation, SamplesCarryTheirRegimeAndOneSharedPermutation) {
  const SynthSpec spec = small_spec();
  const FactorSpec f;
  const auto data = generate_dataset(spec, f);
  ASSERT_EQ(data.size(), 9u);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    EXPECT_EQ(s.regime, window_regime(static_cast<int>(i)));
    EXPECT_EQ(regimes::label_from_sr(s.sr), s.regime);
    EXPECT_EQ(s.permutation, data[0].permutation);
    EXPECT_GE(s.attempts, 1);
    EXPECT_LE(s.attempts, spec.max_attempts);
    EXPECT_LT((s.corr.matrix().diagonal() - Vector::Ones(12)).cwiseAbs().maxCoeff(), 1e-9);
  }
  // Each window has its own seed stream.
  const auto again = generate_sample(spec, f, 5);
  EXPECT_EQ(again.corr.matrix(), data[5].corr.matrix());
  EXPECT_EQ(again.sr, data[5].sr);
  SynthSpec other = spec;
  other.rng_seed = 5;
  EXPECT_NE(generate_sample(other, f, 5).corr.matrix(), data[5].corr.matrix());
}

TEST(Generation, RegimeCorrelationLevelsAreOrdered) {
  SynthSpec spec = small_spec();
  spec.n_series_total = 12 * 30;
  const auto data = generate_dataset(spec, FactorSpec{});
  std::array<double, 3> mean{};
  for (const auto& s : data) mean[regimes::to_int(s.regime)] += mean_offdiag(s.corr.matrix()) / 10.0;
  EXPECT_GT(mean[0], mean[1]);
  EXPECT_GT(mean[1], mean[2]);
}

TEST(Generation, WindowSharpeIsInItsBand) {
  const SynthSpec spec = small_spec();
  std::mt19937_64 rng(44);
  for (int r = 0; r < kNumRegimes; ++r) {
    const auto w = simulate_window(spec, FactorSpec{}, static_cast<Regime>(r), rng);
    EXPECT_EQ(w.returns.rows(), spec.window_len);
    EXPECT_EQ(w.returns.cols(), spec.n_assets);
    EXPECT_DOUBLE_EQ(w.sr, regimes::sharpe_ratio(w.returns));
    EXPECT_EQ(regimes::label_from_sr(w.sr), static_cast<Regime>(r));
  }
}

TEST(Generation, ReturnPanelFollowsSegments) {
  const SynthSpec spec = small_spec();
  const std::vector<Regime> segs{Regime::Rally, Regime::Stressed, Regime::Normal};
  const auto panel = synthetic_return_panel(spec, FactorSpec{}, segs, 3);
  ASSERT_EQ(panel.returns.rows(), 3 * spec.window_len);
  ASSERT_EQ(panel.day_regime.size(), static_cast<std::size_t>(3 * spec.window_len));
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(panel.day_regime[k * spec.window_len], segs[k]);
    EXPECT_EQ(panel.day_regime[(k + 1) * spec.window_len - 1], segs[k]);
    const Matrix block = panel.returns.middleRows(k * spec.window_len, spec.window_len);
    EXPECT_EQ(regimes::label_from_sr(regimes::sharpe_ratio(block)), segs[k]);
  }
  const auto same = synthetic_return_panel(spec, FactorSpec{}, segs, 3);
  EXPECT_EQ(same.returns, panel.returns);
}

}  // namespace
}  // namespace spdregime
