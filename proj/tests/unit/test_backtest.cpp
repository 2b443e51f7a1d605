#include "spdregime/backtest/backtest.hpp"
#include "spdregime/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace spdregime {
namespace {

using namespace backtest;
using spd::SymMatrix;

/// Projection by bisection on the threshold tau in sum max(v - tau, 0) = 1.
Vector bisect_simplex(const Vector& v) {
  double lo = v.minCoeff() - 1.0;
  double hi = v.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((v.array() - mid).max(0.0).sum() > 1.0 ? lo : hi) = mid;
  }
  return (v.array() - 0.5 * (lo + hi)).max(0.0).matrix();
}

TEST(Simplex, ProjectionMatchesBisectionOracle) {
  std::mt19937_64 rng(70);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 12;
    const Vector v = 2.0 * test::gaussian(n, 1, rng).col(0);
    const Vector w = project_simplex(v);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_LT((w - bisect_simplex(v)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((project_simplex(w) - w).cwiseAbs().maxCoeff(), 1e-14);
  }
}

/// Best objective over a regular grid on the 3-asset simplex.
double grid_max(const Vector& mu, const SPDMatrix& sigma, double gamma, int steps) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; i + j <= steps; ++j) {
      const Vector w = (Vector(3) << i, j, steps - i - j).finished() / steps;
      best = std::max(best, mv_objective(mu, sigma, gamma, w));
    }
  return best;
}

TEST(MeanVariance, OptimiserBeatsDenseGrid) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 25; ++trial) {
    const Vector mu = 0.001 * test::gaussian(3, 1, rng).col(0);
    const SPDMatrix sigma(SymMatrix(1e-4 * test::random_spd(3, rng, 0.1, 2.0).matrix()));
    const double gamma = std::array<double, 3>{1.0, 5.0, 20.0}[trial % 3];
    const Vector w = mv_optimize(mu, sigma, gamma);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_LT(kkt_residual(mu, sigma, gamma, w), 1e-8);
    EXPECT_GE(mv_objective(mu, sigma, gamma, w), grid_max(mu, sigma, gamma, 400) - 1e-12);
  }
}

TEST(MeanVariance, TwoAssetClosedForm) {
  // Uncorrelated assets: the interior optimum solves a scalar quadratic.
  const Vector mu = (Vector(2) << 0.002, 0.001).finished();
  const SPDMatrix sigma(SymMatrix::diagonal((Vector(2) << 4e-4, 1e-4).finished()));
  const double gamma = 10.0;
  // d/dw [w m1 + (1-w) m2 - g/2 (w^2 s1 + (1-w)^2 s2)] = 0
  const double w1 = (0.001 + gamma * 1e-4) / (gamma * (4e-4 + 1e-4));
  const Vector w = mv_optimize(mu, sigma, gamma);
  // Accuracy is bounded by the KKT tolerance over the curvature along the simplex.
  EXPECT_NEAR(w(0), w1, 2.0 * 1e-8 / (gamma * (4e-4 + 1e-4)));
  // High return with low risk aversion hits the corner.
  const Vector corner = mv_optimize(mu, sigma, 0.1);
  EXPECT_NEAR(corner(0), 1.0, 1e-9);
  EXPECT_GT(kkt_residual(mu, sigma, gamma, Vector::Constant(2, 0.5)), 1e-6);
  EXPECT_THROW(mv_optimize(mu, sigma, gamma, MvOptions{1, 1e-14}), OptFailure);
}

TEST(Moments, EstimateMatchesSampleStatistics) {
  std::mt19937_64 rng(72);
  const Matrix r = 0.01 * test::gaussian(50, 3, rng);
  const Moments m = estimate_inputs(r, 40, 20);
  const Matrix block = r.middleRows(20, 20);
  const Vector mean = block.colwise().mean();
  const Matrix c = block.rowwise() - mean.transpose();
  EXPECT_EQ(m.days, 20);
  EXPECT_LT((m.mu - mean).norm(), 1e-15);
  EXPECT_LT(test::rel_diff(m.sigma.matrix(), c.transpose() * c / 19.0), 1e-13);

  std::vector<Regime> regime(50, Regime::Normal);
  for (int d = 20; d < 40; d += 2) regime[d] = Regime::Rally;
  const Moments f = estimate_inputs(r, 40, 20, &regime, Regime::Rally);
  EXPECT_EQ(f.days, 10);
  Vector fm = Vector::Zero(3);
  for (int d = 20; d < 40; d += 2) fm += r.row(d).transpose();
  EXPECT_LT((f.mu - fm / 10.0).norm(), 1e-15);
  EXPECT_THROW(estimate_inputs(r, 40, 20, &regime, Regime::Rally, 11), EstimationError);
  EXPECT_THROW(estimate_inputs(r, 10, 20), EstimationError);
  EXPECT_THROW(estimate_inputs(r, 51, 20), EstimationError);
  EXPECT_THROW(estimate_inputs(r, 40, 0), ConfigError);
}

struct Panel {
  Matrix returns;
  std::vector<std::string> dates;
};

Panel random_panel(int days, int n, std::mt19937_64& rng) {
  Panel p;
  p.returns = 0.01 * test::gaussian(days, n, rng);
  for (int d = 0; d < days; ++d) p.dates.push_back("d" + std::to_string(d));
  return p;
}

TEST(Backtest, EqualWeightCompoundsDailyReturns) {
  std::mt19937_64 rng(73);
  const Panel p = random_panel(40, 4, rng);
  BacktestOptions opts;
  opts.lookback = 10;
  const auto r = run_backtest(p.returns, p.dates, Strategy::equal_weight(), nullptr, opts);
  ASSERT_EQ(r.dates.size(), 30u);
  EXPECT_EQ(r.start_date, "d9");
  EXPECT_EQ(r.dates.front(), "d10");
  double equity = 1.0;
  for (std::size_t k = 0; k < r.dates.size(); ++k) {
    const double want = p.returns.row(static_cast<Eigen::Index>(10 + k)).mean();
    EXPECT_NEAR(r.returns[k], want, 1e-15);
    equity *= 1.0 + want;
    EXPECT_NEAR(r.equity[k + 1], equity, 1e-14);
    EXPECT_EQ(r.weights[k], Vector::Constant(4, 0.25));
  }
}

TEST(Backtest, WeightsNeverSeeTheFuture) {
  std::mt19937_64 rng(74);
  const Panel p = random_panel(60, 3, rng);
  std::vector<Regime> preds(60);
  for (int d = 0; d < 60; ++d) preds[d] = static_cast<Regime>(d % 3);
  BacktestOptions opts;
  opts.lookback = 15;
  opts.min_filtered_days = 3;
  // High risk aversion keeps the optimum interior, so a sentinel moves it.
  Strategy rd = Strategy::regime_dependent("m");
  rd.regime_risk_aversion = {600.0, 500.0, 400.0};
  for (const Strategy& s : {Strategy::mean_variance(500.0), rd}) {
    const auto base = run_backtest(p.returns, p.dates, s, &preds, opts);
    for (int k = 20; k < 60; k += 7) {
      // Sentinels on day k: wild returns and a different prediction.
      Panel q = p;
      q.returns.row(k) << 0.5, -0.5, 0.1;
      auto qp = preds;
      qp[k] = Regime::Stressed == preds[k] ? Regime::Rally : Regime::Stressed;
      const auto moved = run_backtest(q.returns, q.dates, s, &qp, opts);
      for (int t = opts.lookback; t <= k; ++t) {
        const auto idx = static_cast<std::size_t>(t - opts.lookback);
        EXPECT_EQ(moved.weights[idx], base.weights[idx]) << s.name << " day " << t << " sentinel " << k;
      }
      EXPECT_NE(moved.weights[static_cast<std::size_t>(k + 1 - opts.lookback)],
                base.weights[static_cast<std::size_t>(k + 1 - opts.lookback)]);
    }
  }
}

TEST(Backtest, RegimeDependentUsesPreviousDayPrediction) {
  std::mt19937_64 rng(75);
  const Panel p = random_panel(80, 3, rng);
  std::vector<Regime> preds(80, Regime::Normal);
  for (int d = 40; d < 80; ++d) preds[d] = Regime::Stressed;
  BacktestOptions opts;
  opts.lookback = 30;
  Strategy s = Strategy::regime_dependent("m");
  EXPECT_EQ(s.name, "m-Regime");
  s.filter_moments = false;
  const auto r = run_backtest(p.returns, p.dates, s, &preds, opts);
  EXPECT_EQ(r.regimes_used[0], Regime::Normal);
  EXPECT_EQ(r.regimes_used[40 - 30], Regime::Normal);  // day 40 uses day 39
  EXPECT_EQ(r.regimes_used[41 - 30], Regime::Stressed);
  const Moments m = estimate_inputs(p.returns, 45, 30);
  EXPECT_EQ(r.weights[15], mv_optimize(m.mu, m.sigma, s.regime_risk_aversion[0]));
  EXPECT_EQ(r.filter_fallbacks, 0);
}

TEST(Backtest, FilteredEstimateFallsBackWhenTooShort) {
  std::mt19937_64 rng(76);
  const Panel p = random_panel(70, 3, rng);
  std::vector<Regime> preds(70, Regime::Normal);
  preds[50] = Regime::Rally;  // a lone rally day
  BacktestOptions opts;
  opts.lookback = 40;
  opts.min_filtered_days = 30;
  const Strategy s = Strategy::regime_dependent("m");
  const auto r = run_backtest(p.returns, p.dates, s, &preds, opts);
  // Day 51 is predicted rally from day 50; one filtered day is too few.
  EXPECT_EQ(r.filter_fallbacks, 1);
  const Moments full = estimate_inputs(p.returns, 51, 40);
  EXPECT_EQ(r.weights[51 - 40], mv_optimize(full.mu, full.sigma, s.regime_risk_aversion[2]));
  // Normal days have enough filtered history.
  const Moments filtered = estimate_inputs(p.returns, 60, 40, &preds, Regime::Normal, 30);
  EXPECT_EQ(filtered.days, 39);
  EXPECT_EQ(r.weights[60 - 40], mv_optimize(filtered.mu, filtered.sigma, s.regime_risk_aversion[1]));
}

TEST(Backtest, InputValidation) {
  std::mt19937_64 rng(77);
  const Panel p = random_panel(30, 2, rng);
  BacktestOptions opts;
  opts.lookback = 10;
  EXPECT_THROW(run_backtest(p.returns, p.dates, Strategy::regime_dependent("m"), nullptr, opts), DataError);
  opts.start = 5;
  EXPECT_THROW(run_backtest(p.returns, p.dates, Strategy::mean_variance(), nullptr, opts), ConfigError);
  EXPECT_NO_THROW(run_backtest(p.returns, p.dates, Strategy::equal_weight(), nullptr, opts));
  opts.start = 30;
  EXPECT_THROW(run_backtest(p.returns, p.dates, Strategy::equal_weight(), nullptr, opts), ConfigError);
  Strategy bad = Strategy::mean_variance(-1.0);
  EXPECT_THROW(bad.validate(), ConfigError);
  std::vector<std::string> short_dates(p.dates.begin(), p.dates.end() - 1);
  EXPECT_THROW(run_backtest(p.returns, short_dates, Strategy::equal_weight()), DataError);
}

TEST(Metrics, MaxDrawdownMatchesBruteForce) {
  std::mt19937_64 rng(78);
  std::normal_distribution<double> z(0.0, 0.02);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> equity{1.0};
    for (int k = 0; k < 100; ++k) equity.push_back(equity.back() * (1.0 + z(rng)));
    double want = 0.0;
    for (std::size_t i = 0; i < equity.size(); ++i)
      for (std::size_t j = i; j < equity.size(); ++j) want = std::max(want, 1.0 - equity[j] / equity[i]);
    EXPECT_NEAR(max_drawdown(equity), want, 1e-14);
  }
  EXPECT_EQ(max_drawdown({1.0, 1.1, 1.2}), 0.0);
  EXPECT_NEAR(max_drawdown({1.0, 2.0, 1.0, 1.5}), 0.5, 1e-15);
}

TEST(Metrics, SharpeAndSummary) {
  const std::vector<double> daily{0.01, -0.005, 0.002, 0.004};
  const double mean = 0.00275;
  double ss = 0.0;
  for (double d : daily) ss += (d - mean) * (d - mean);
  EXPECT_NEAR(annualized_sharpe(daily), mean / std::sqrt(ss / 3.0) * std::sqrt(252.0), 1e-12);
  EXPECT_EQ(annualized_sharpe({0.001, 0.001, 0.001}), 0.0);

  BacktestResult r;
  r.strategy = "S";
  r.returns = daily;
  r.equity = {1.0};
  for (double d : daily) r.equity.push_back(r.equity.back() * (1.0 + d));
  const auto row = summarize(r);
  EXPECT_NEAR(row.cumulative_return, r.equity.back() - 1.0, 1e-15);
  EXPECT_NEAR(row.max_drawdown, 0.005, 1e-15);
  EXPECT_EQ(row.strategy, "S");
}

TEST(Compare, RunsEveryStrategyAndWritesCsv) {
  std::mt19937_64 rng(79);
  const Panel p = random_panel(50, 3, rng);
  PredictionMap preds{{"m", std::vector<Regime>(50, Regime::Normal)}};
  BacktestOptions opts;
  opts.lookback = 20;
  opts.min_filtered_days = 5;
  const std::vector<Strategy> strategies{Strategy::equal_weight(), Strategy::mean_variance(),
                                         Strategy::regime_dependent("m")};
  const auto results = compare_strategies(p.returns, p.dates, strategies, preds, opts);
  ASSERT_EQ(results.size(), 3u);
  // All-normal predictions with risk aversion 5 reproduce plain mean-variance.
  EXPECT_EQ(results[1].weights, results[2].weights);

  std::ostringstream eq;
  write_equity_csv(results, eq);
  std::istringstream in(eq.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "date,strategy,equity");
  std::getline(in, line);
  EXPECT_EQ(line, "d19,EqualWeight,1");
  std::ostringstream w;
  write_weights_csv(results, {"A", "B", "C"}, w);
  EXPECT_EQ(w.str().substr(0, w.str().find('\n')), "date,strategy,A,B,C");
  std::ostringstream c;
  write_comparison_csv(results, c);
  EXPECT_EQ(c.str().substr(0, c.str().find('\n')), "strategy,cumulative_return,annualized_sr,max_drawdown");
  const std::string table = c.str();
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
  EXPECT_THROW(compare_strategies(p.returns, p.dates, {Strategy::regime_dependent("other")}, preds, opts),
               DataError);
}

}  // namespace
}  // namespace spdregime
