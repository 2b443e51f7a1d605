#include "spdregime/synth/synth.hpp"

#include "spdregime/error.hpp"
#include "spdregime/util/random.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spdregime::synth {

namespace {

// Idiosyncratic variance floor; keeps every window strictly SPD even when
// jittered loadings exhaust the unit variance budget.
constexpr double kMinIdiosyncratic = 1e-3;

double level_value(const LevelLoadings& l, int level) {
  switch (level) {
    case 0: return l.market;
    case 1: return l.cluster;
    default: return l.subcluster;
  }
}

LevelLoadings scaled(const LevelLoadings& l, double s) {
  return {l.market * s, l.cluster * s, l.subcluster * s};
}

double shared_sum(const SynthSpec& spec, const LevelLoadings& l, int i, int j) {
  const auto pi = asset_position(spec, i);
  const auto pj = asset_position(spec, j);
  double c = l.market * l.market;
  if (spec.n_levels >= 2 && pi.cluster == pj.cluster) c += l.cluster * l.cluster;
  if (spec.n_levels >= 3 && pi.subcluster == pj.subcluster) c += l.subcluster * l.subcluster;
  return c;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_assets < 2) throw ConfigError("n_assets must be at least 2");
  if (window_len < 3) throw ConfigError("window_len must be at least 3");
  if (n_clusters < 1 || n_assets % n_clusters != 0)
    throw ConfigError("n_assets must divide evenly into n_clusters");
  if (subclusters_per_cluster < 1 || cluster_size() % subclusters_per_cluster != 0)
    throw ConfigError("cluster size must divide evenly into subclusters_per_cluster");
  if (n_levels < 1 || n_levels > 3) throw ConfigError("n_levels must be 1, 2 or 3");
  if (!(dof > 2.0)) throw ConfigError("dof must exceed 2 for a finite covariance");
  for (double t : regime_targets)
    if (!(t > -1.0 && t < 1.0)) throw ConfigError("regime targets must lie in (-1, 1)");
  if (!(regime_targets[0] > regime_targets[1] && regime_targets[1] > regime_targets[2]))
    throw ConfigError("regime targets must be descending: stressed > normal > rally");
  if (n_series_total < n_assets || n_series_total % n_assets != 0)
    throw ConfigError("n_series_total must be a positive multiple of n_assets");
  if (!(daily_vol > 0.0)) throw ConfigError("daily_vol must be positive");
  for (int r = 0; r < kNumRegimes; ++r) {
    if (!std::isfinite(target_sharpe[r])) throw ConfigError("target_sharpe must be finite");
    if (regimes::label_from_sr(target_sharpe[r]) != static_cast<Regime>(r))
      throw ConfigError("target_sharpe for " + std::string(regimes::to_string(static_cast<Regime>(r))) +
                        " lies outside that regime's band");
  }
  if (max_attempts < 1) throw ConfigError("max_attempts must be positive");
}

void FactorSpec::validate() const {
  if (!(beta_range >= 0.0 && beta_range < 1.0)) throw ConfigError("beta_range must lie in [0, 1)");
  if (!(eta_scale >= 0.0)) throw ConfigError("eta_scale must be >= 0");
  if (!(eps_scale >= 0.0)) throw ConfigError("eps_scale must be >= 0");
  for (const auto& l : base)
    if (!(l.market >= 0.0 && l.cluster >= 0.0 && l.subcluster >= 0.0))
      throw ConfigError("loadings must be >= 0");
}

AssetPosition asset_position(const SynthSpec& spec, int asset) {
  return {asset / spec.cluster_size(), asset / spec.subcluster_size()};
}

double implied_mean_correlation(const SynthSpec& spec, const LevelLoadings& l) {
  const double n = spec.n_assets;
  const double m = spec.cluster_size();
  const double q = spec.subcluster_size();
  const double pairs = n * (n - 1.0);
  double mean = l.market * l.market;
  if (spec.n_levels >= 2) mean += l.cluster * l.cluster * spec.n_clusters * m * (m - 1.0) / pairs;
  if (spec.n_levels >= 3)
    mean += l.subcluster * l.subcluster * spec.n_clusters * spec.subclusters_per_cluster * q *
            (q - 1.0) / pairs;
  return mean;
}

LevelLoadings calibrate_loadings(const SynthSpec& spec, const LevelLoadings& base, double target) {
  double peak = 0.0;
  for (int lvl = 0; lvl < spec.n_levels; ++lvl) peak += level_value(base, lvl) * level_value(base, lvl);
  if (!(peak > 0.0)) throw ConfigError("all loadings are zero; cannot reach a nonzero target");
  if (!(target > 0.0)) throw ConfigError("calibration target must be positive");
  // Largest multiplier keeping every c_ij below one.
  double hi = 1.0 / std::sqrt(peak);
  if (implied_mean_correlation(spec, scaled(base, hi)) <= target)
    throw ConfigError("target mean correlation is unreachable with these loadings");
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (implied_mean_correlation(spec, scaled(base, mid)) < target)
      lo = mid;
    else
      hi = mid;
  }
  return scaled(base, 0.5 * (lo + hi));
}

SPDMatrix nested_corr(const SynthSpec& spec, const LevelLoadings& l) {
  const int n = spec.n_assets;
  Matrix c = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double v = shared_sum(spec, l, i, j);
      if (v >= 1.0) throw ConfigError("loadings imply a correlation >= 1");
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return SPDMatrix(SymMatrix(c));
}

SPDMatrix build_block_hierarchical_corr(const SynthSpec& spec, const FactorSpec& factors,
                                        Regime regime) {
  spec.validate();
  factors.validate();
  const int r = regimes::to_int(regime);
  return nested_corr(spec, calibrate_loadings(spec, factors.base[r], spec.regime_targets[r]));
}

SPDMatrix perturbed_corr(const SynthSpec& spec, const FactorSpec& factors, Regime regime,
                         std::mt19937_64& rng) {
  const int r = regimes::to_int(regime);
  const LevelLoadings level = calibrate_loadings(spec, factors.base[r], spec.regime_targets[r]);
  const int n = spec.n_assets;
  const int n_sub = spec.n_clusters * spec.subclusters_per_cluster;
  // Factor columns: market, clusters, subclusters.
  Matrix b = Matrix::Zero(n, 1 + spec.n_clusters + n_sub);
  std::uniform_real_distribution<double> beta(1.0 - factors.beta_range, 1.0 + factors.beta_range);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector idio(n);
  for (int i = 0; i < n; ++i) {
    const auto pos = asset_position(spec, i);
    const int cols[3] = {0, 1 + pos.cluster, 1 + spec.n_clusters + pos.subcluster};
    double total = 0.0;
    for (int lvl = 0; lvl < 3; ++lvl) {
      // Draw for every level so the stream does not depend on n_levels.
      const double a = level_value(level, lvl);
      const double v = a * beta(rng) + factors.eta_scale * a * normal(rng);
      if (lvl < spec.n_levels) {
        b(i, cols[lvl]) = v;
        total += v * v;
      }
    }
    idio(i) = std::max(kMinIdiosyncratic, factors.eps_scale * (1.0 - total));
  }
  Matrix sigma = b * b.transpose();
  sigma.diagonal() += idio;
  const Vector inv_sd = sigma.diagonal().cwiseSqrt().cwiseInverse();
  Matrix c = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
  c.diagonal().setOnes();
  return SPDMatrix(SymMatrix(c));
}

Matrix student_t_sample(const SPDMatrix& sigma, double v, int t, std::mt19937_64& rng) {
  if (!(v > 2.0)) throw DomainError("Student-t sampling needs v > 2");
  if (t < 1) throw DomainError("sample length must be positive");
  const int n = sigma.dim();
  const Matrix scale = sigma.matrix() * ((v - 2.0) / v);
  Eigen::LLT<Matrix> llt(scale);
  if (llt.info() != Eigen::Success) throw DomainError("Cholesky factorisation failed");
  const Matrix l = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(v);
  Matrix out(t, n);
  Vector z(n);
  for (int row = 0; row < t; ++row) {
    for (int k = 0; k < n; ++k) z(k) = normal(rng);
    const double w = chi2(rng);
    out.row(row) = (l * z).transpose() * std::sqrt(v / w);
  }
  return out;
}

Matrix student_t_sample(const SPDMatrix& sigma, double v, int t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return student_t_sample(sigma, v, t, rng);
}

Permuted permute_corr(const SPDMatrix& c, std::vector<int> permutation) {
  if (!regimes::is_permutation(permutation, c.dim())) throw DomainError("not a permutation");
  SymMatrix out = regimes::apply_order(c.sym(), permutation);
  return {SPDMatrix(out, c.tolerance()), std::move(permutation)};
}

Permuted permute_corr(const SPDMatrix& c, std::uint64_t seed) {
  std::vector<int> perm(c.dim());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return permute_corr(c, std::move(perm));
}

SimulatedWindow simulate_window(const SynthSpec& spec, const FactorSpec& factors, Regime regime,
                                std::mt19937_64& rng) {
  const SPDMatrix corr = perturbed_corr(spec, factors, regime, rng);
  const int n = spec.n_assets;
  const double basket_sd = spec.daily_vol * std::sqrt(corr.matrix().sum()) / n;
  const double drift = spec.target_sharpe[regimes::to_int(regime)] * basket_sd /
                       std::sqrt(static_cast<double>(regimes::kTradingDays));
  for (int attempt = 1; attempt <= spec.max_attempts; ++attempt) {
    Matrix x = student_t_sample(corr, spec.dof, spec.window_len, rng);
    Matrix returns = (x * spec.daily_vol).array() + drift;
    const double sr = regimes::sharpe_ratio(returns);
    if (regimes::label_from_sr(sr) == regime) return {std::move(returns), sr, attempt};
  }
  throw DataError("no window matched regime " + std::string(regimes::to_string(regime)) +
                  " after " + std::to_string(spec.max_attempts) + " attempts");
}

SyntheticSample generate_sample(const SynthSpec& spec, const FactorSpec& factors, int index) {
  std::mt19937_64 rng(util::derive_seed(spec.rng_seed, static_cast<std::uint64_t>(index)));
  const Regime regime = window_regime(index);
  SimulatedWindow w = simulate_window(spec, factors, regime, rng);
  Permuted p = permute_corr(regimes::corr_from_returns(w.returns), spec.permute_seed);
  return {std::move(p.corr), regime, w.sr, std::move(p.permutation), w.attempts};
}

std::vector<SyntheticSample> generate_dataset(const SynthSpec& spec, const FactorSpec& factors) {
  spec.validate();
  factors.validate();
  std::vector<SyntheticSample> out;
  out.reserve(spec.n_windows());
  for (int i = 0; i < spec.n_windows(); ++i) out.push_back(generate_sample(spec, factors, i));
  return out;
}

double mean_offdiag(const Matrix& c) {
  const Eigen::Index n = c.rows();
  if (n < 2 || c.cols() != n) throw ShapeError("mean_offdiag needs a square matrix of dim >= 2");
  return (c.sum() - c.trace()) / static_cast<double>(n * (n - 1));
}

SyntheticReturns synthetic_return_panel(const SynthSpec& spec, const FactorSpec& factors,
                                        const std::vector<Regime>& segments, std::uint64_t seed) {
  spec.validate();
  factors.validate();
  SyntheticReturns out;
  out.returns.resize(static_cast<Eigen::Index>(segments.size()) * spec.window_len, spec.n_assets);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    std::mt19937_64 rng(util::derive_seed(seed, s));
    const SimulatedWindow w = simulate_window(spec, factors, segments[s], rng);
    out.returns.middleRows(static_cast<Eigen::Index>(s) * spec.window_len, spec.window_len) = w.returns;
    out.day_regime.insert(out.day_regime.end(), static_cast<std::size_t>(spec.window_len), segments[s]);
  }
  return out;
}

}  // namespace spdregime::synth
