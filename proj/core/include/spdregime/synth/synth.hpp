#pragma once

#include "spdregime/regimes/regimes.hpp"
#include "spdregime/spd/matrix.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace spdregime::synth {

using regimes::Regime;
using spd::Matrix;
using spd::SPDMatrix;
using spd::SymMatrix;
using spd::Vector;

inline constexpr int kNumRegimes = 3;

/// Shape and seeds of a synthetic dataset. Per-regime arrays are indexed by
/// Regime (stressed, normal, rally).
struct SynthSpec {
  int n_assets = 60;
  int window_len = 252;
  int n_clusters = 5;
  int subclusters_per_cluster = 2;
  int n_levels = 3;  // 1 market, 2 + cluster, 3 + subcluster
  double dof = 3.0;
  std::array<double, kNumRegimes> regime_targets{0.24, 0.18, 0.10};
  int n_series_total = 18000;
  std::uint64_t permute_seed = 27;
  std::uint64_t rng_seed = 0;
  /// Daily volatility of each asset.
  double daily_vol = 0.01;
  /// Annualised basket Sharpe ratio each regime's drift aims for.
  std::array<double, kNumRegimes> target_sharpe{-2.0, 0.75, 3.5};
  /// Redraws allowed for a window whose realised Sharpe ratio falls outside
  /// its regime's band.
  int max_attempts = 50;

  int n_windows() const { return n_series_total / n_assets; }
  int cluster_size() const { return n_assets / n_clusters; }
  int subcluster_size() const { return cluster_size() / subclusters_per_cluster; }
  /// Throws ConfigError.
  void validate() const;
};

/// Loading magnitudes per nesting level before calibration.
struct LevelLoadings {
  double market = 0.0;
  double cluster = 0.0;
  double subcluster = 0.0;
};

struct FactorSpec {
  /// Multiplicative per-asset loading jitter U(1 - b, 1 + b).
  double beta_range = 0.1;
  /// Std of the additive per-asset loading noise, relative to the level loading.
  double eta_scale = 0.1;
  /// Multiplier on the idiosyncratic variance 1 - sum(loading^2).
  double eps_scale = 1.0;
  std::array<LevelLoadings, kNumRegimes> base{{{1.0, 0.5, 0.4}, {0.8, 0.6, 0.5}, {0.6, 0.6, 0.5}}};

  void validate() const;
};

/// Level memberships of one asset.
struct AssetPosition {
  int cluster;
  int subcluster;  // global index
};
AssetPosition asset_position(const SynthSpec& spec, int asset);

/// Mean off-diagonal entry of the nested-loading correlation with
/// per-level loadings `l`, counted over the block sizes in closed form.
double implied_mean_correlation(const SynthSpec& spec, const LevelLoadings& l);

/// Scales `base` by the multiplier s that makes the implied mean
/// off-diagonal correlation equal `target` (bisection on s).
LevelLoadings calibrate_loadings(const SynthSpec& spec, const LevelLoadings& base, double target);

/// c_ij = sum over shared levels of loading^2, unit diagonal. Throws
/// ConfigError when any off-diagonal entry reaches 1.
SPDMatrix nested_corr(const SynthSpec& spec, const LevelLoadings& l);

/// Calibrated, unperturbed correlation for a regime.
SPDMatrix build_block_hierarchical_corr(const SynthSpec& spec, const FactorSpec& factors,
                                        Regime regime);

/// One draw of the perturbed factor model for a window: loadings jittered
/// by beta and eta per asset and level, idiosyncratic variance from
/// eps_scale, normalised to unit diagonal.
SPDMatrix perturbed_corr(const SynthSpec& spec, const FactorSpec& factors, Regime regime,
                         std::mt19937_64& rng);

/// T x N rows drawn i.i.d. from t_v(0, (v-2)/v Sigma) so that the
/// covariance is Sigma. Throws DomainError for v <= 2 or a failed Cholesky.
Matrix student_t_sample(const SPDMatrix& sigma, double v, int t, std::mt19937_64& rng);
Matrix student_t_sample(const SPDMatrix& sigma, double v, int t, std::uint64_t seed);

/// Simultaneous row/column permutation: out(i, j) = c(perm[i], perm[j]).
struct Permuted {
  SPDMatrix corr;
  std::vector<int> permutation;
};
Permuted permute_corr(const SPDMatrix& c, std::uint64_t seed);
Permuted permute_corr(const SPDMatrix& c, std::vector<int> permutation);

struct SyntheticSample {
  SPDMatrix corr = SPDMatrix::identity(1);
  Regime regime = Regime::Normal;
  double sr = 0.0;
  std::vector<int> permutation;
  int attempts = 1;
};

/// One window: Student-t returns from a perturbed regime correlation with a
/// drift aiming at the regime's Sharpe target, redrawn until the realised
/// basket Sharpe ratio carries the generating regime's label.
struct SimulatedWindow {
  Matrix returns;  // window_len x n_assets, unpermuted
  double sr = 0.0;
  int attempts = 1;
};
SimulatedWindow simulate_window(const SynthSpec& spec, const FactorSpec& factors, Regime regime,
                                std::mt19937_64& rng);

/// Regime of window i: round-robin stressed, normal, rally.
inline Regime window_regime(int i) { return static_cast<Regime>(i % kNumRegimes); }

/// n_windows() labelled samples. Window i draws from a seed derived from
/// (rng_seed, i), so output does not depend on generation order; every
/// sample carries the same asset permutation drawn from permute_seed.
std::vector<SyntheticSample> generate_dataset(const SynthSpec& spec, const FactorSpec& factors);
SyntheticSample generate_sample(const SynthSpec& spec, const FactorSpec& factors, int index);

/// Mean off-diagonal entry of a square matrix.
double mean_offdiag(const Matrix& c);

/// Daily return panel built from consecutive windows whose regimes follow
/// `segments`, each window_len days long. Used for backtest harnesses.
struct SyntheticReturns {
  Matrix returns;                  // (segments * window_len) x n_assets
  std::vector<Regime> day_regime;  // generating regime per day
};
SyntheticReturns synthetic_return_panel(const SynthSpec& spec, const FactorSpec& factors,
                                        const std::vector<Regime>& segments, std::uint64_t seed);

}  // namespace spdregime::synth
