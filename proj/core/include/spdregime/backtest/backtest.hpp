#pragma once

#include "spdregime/regimes/regimes.hpp"
#include "spdregime/spd/matrix.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spdregime::backtest {

using regimes::Regime;
using spd::Matrix;
using spd::SPDMatrix;
using spd::Vector;

// --- mean-variance optimisation --------------------------------------------

struct MvOptions {
  int max_iter = 200000;
  double kkt_tol = 1e-8;
};

/// Euclidean projection onto {w : sum w = 1, w >= 0} (sort-based).
Vector project_simplex(const Vector& v);

/// mu^T w - (risk_aversion / 2) w^T Sigma w.
double mv_objective(const Vector& mu, const SPDMatrix& sigma, double risk_aversion, const Vector& w);

/// Infinity norm of the gradient mapping (w - P(w + g / L)) * L at w, with
/// g the objective gradient and L = risk_aversion * lambda_max(Sigma).
/// Zero exactly at the constrained maximiser.
double kkt_residual(const Vector& mu, const SPDMatrix& sigma, double risk_aversion, const Vector& w);

/// Long-only, fully invested maximiser of mv_objective by accelerated
/// projected gradient with adaptive restart, started at 1/N.
/// Throws OptFailure when the KKT residual stays above kkt_tol.
Vector mv_optimize(const Vector& mu, const SPDMatrix& sigma, double risk_aversion,
                   const MvOptions& opts = {});

// --- moment estimation -----------------------------------------------------

struct Moments {
  Vector mu;
  SPDMatrix sigma = SPDMatrix::identity(1);
  int days = 0;  // observations used
};

/// Mean and sample covariance of returns[end - lookback, end). With a
/// filter, only days whose `day_regime` equals it are used. Throws
/// EstimationError when fewer than `min_days` observations remain.
Moments estimate_inputs(const Matrix& returns, int end, int lookback,
                        const std::vector<Regime>* day_regime = nullptr,
                        std::optional<Regime> filter = std::nullopt, int min_days = 2);

// --- strategies and backtests ----------------------------------------------

enum class StrategyKind { EqualWeight, MeanVariance, RegimeDependent };

struct Strategy {
  std::string name;
  StrategyKind kind = StrategyKind::EqualWeight;
  double risk_aversion = 5.0;
  /// Risk aversion per predicted regime (stressed, normal, rally).
  std::array<double, 3> regime_risk_aversion{20.0, 5.0, 1.0};
  /// Key into the prediction map for RegimeDependent strategies.
  std::string model;
  /// Restrict moment estimation to lookback days with the same predicted regime.
  bool filter_moments = true;

  static Strategy equal_weight(std::string name = "EqualWeight");
  static Strategy mean_variance(double risk_aversion = 5.0, std::string name = "MeanVariance");
  static Strategy regime_dependent(std::string model, std::string name = "");
  void validate() const;
};

struct BacktestOptions {
  int lookback = 252;
  /// First traded day; defaults to lookback.
  std::optional<int> start;
  /// Filtered estimates with fewer days fall back to the unfiltered window.
  int min_filtered_days = 30;
  MvOptions mv;
};

struct BacktestResult {
  std::string strategy;
  std::string start_date;            // day before the first traded day
  std::vector<std::string> dates;    // traded days
  std::vector<Vector> weights;       // weights held on each traded day
  std::vector<double> returns;       // portfolio return per traded day
  std::vector<double> equity;        // equity[0] = 1, equity[k] after day k
  std::vector<Regime> regimes_used;  // RegimeDependent only
  int filter_fallbacks = 0;
};

/// Daily rebalanced, zero-cost backtest. The weights for day t use returns
/// up to t - 1 and the prediction for day t - 1 only.
/// `predictions` holds one regime per day of `returns` (RegimeDependent only).
BacktestResult run_backtest(const Matrix& returns, const std::vector<std::string>& dates,
                            const Strategy& strategy,
                            const std::vector<Regime>* predictions = nullptr,
                            const BacktestOptions& opts = {});

struct ComparisonRow {
  std::string strategy;
  double cumulative_return = 0.0;
  double annualized_sr = 0.0;
  double max_drawdown = 0.0;
};

double max_drawdown(const std::vector<double>& equity);
/// Annualised Sharpe ratio of daily returns; 0 when their std is below 1e-12.
double annualized_sharpe(const std::vector<double>& daily);
ComparisonRow summarize(const BacktestResult& r);

using PredictionMap = std::map<std::string, std::vector<Regime>>;

std::vector<BacktestResult> compare_strategies(const Matrix& returns,
                                               const std::vector<std::string>& dates,
                                               const std::vector<Strategy>& strategies,
                                               const PredictionMap& predictions,
                                               const BacktestOptions& opts = {});

/// CSV `date,strategy,equity`; the first row of each strategy is the day
/// before trading starts.
void write_equity_csv(const std::vector<BacktestResult>& results, std::ostream& out);
/// CSV `date,strategy,<tickers...>`.
void write_weights_csv(const std::vector<BacktestResult>& results,
                       const std::vector<std::string>& tickers, std::ostream& out);
/// CSV `strategy,cumulative_return,annualized_sr,max_drawdown`.
void write_comparison_csv(const std::vector<BacktestResult>& results, std::ostream& out);

}  // namespace spdregime::backtest
