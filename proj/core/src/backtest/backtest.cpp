#include "spdregime/backtest/backtest.hpp"

#include "spdregime/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

namespace spdregime::backtest {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Step scale of the projected gradient; the floor keeps a zero covariance usable.
double lipschitz(const SPDMatrix& sigma, double risk_aversion) {
  return std::max(risk_aversion * sigma.eig().eigvals(0), 1e-12);
}

void check_inputs(const Vector& mu, const SPDMatrix& sigma, double risk_aversion) {
  if (mu.size() != sigma.dim()) throw ShapeError("mu and sigma sizes differ");
  if (!(risk_aversion > 0.0)) throw DomainError("risk_aversion must be positive");
  if (!mu.allFinite()) throw DomainError("mu has non-finite entries");
}

}  // namespace

Vector project_simplex(const Vector& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw ShapeError("cannot project an empty vector onto the simplex");
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

double mv_objective(const Vector& mu, const SPDMatrix& sigma, double risk_aversion, const Vector& w) {
  return mu.dot(w) - 0.5 * risk_aversion * w.dot(sigma.matrix() * w);
}

double kkt_residual(const Vector& mu, const SPDMatrix& sigma, double risk_aversion, const Vector& w) {
  check_inputs(mu, sigma, risk_aversion);
  const double l = lipschitz(sigma, risk_aversion);
  const Vector g = mu - risk_aversion * (sigma.matrix() * w);
  return ((w - project_simplex(w + g / l)) * l).cwiseAbs().maxCoeff();
}

Vector mv_optimize(const Vector& mu, const SPDMatrix& sigma, double risk_aversion,
                   const MvOptions& opts) {
  check_inputs(mu, sigma, risk_aversion);
  const Eigen::Index n = mu.size();
  const Matrix& s = sigma.matrix();
  const double l = lipschitz(sigma, risk_aversion);
  const auto objective = [&](const Vector& w) { return mv_objective(mu, sigma, risk_aversion, w); };

  Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
  Vector y = x;
  double t = 1.0;
  double fx = objective(x);
  double residual = kkt_residual(mu, sigma, risk_aversion, x);
  for (int it = 0; it < opts.max_iter && residual >= opts.kkt_tol; ++it) {
    const Vector g = mu - risk_aversion * (s * y);
    Vector next = project_simplex(y + g / l);
    const double fn = objective(next);
    if (fn < fx && t > 1.0) {
      // Momentum overshot: restart from the last iterate. A plain projected
      // step (t == 1) is always taken, so rounding cannot stall the loop.
      y = x;
      t = 1.0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - x);
    x = std::move(next);
    fx = fn;
    t = t_next;
    residual = kkt_residual(mu, sigma, risk_aversion, x);
  }
  if (!(residual < opts.kkt_tol)) throw OptFailure(residual);
  return x;
}

Moments estimate_inputs(const Matrix& returns, int end, int lookback,
                        const std::vector<Regime>* day_regime, std::optional<Regime> filter,
                        int min_days) {
  if (lookback < 1) throw ConfigError("lookback must be positive");
  if (end > returns.rows() || end < lookback)
    throw EstimationError("need " + std::to_string(lookback) + " days of history before day " +
                          std::to_string(end));
  if (filter && (!day_regime || static_cast<Eigen::Index>(day_regime->size()) < end))
    throw EstimationError("regime filter needs a regime for every history day");

  std::vector<Eigen::Index> days;
  for (int d = end - lookback; d < end; ++d)
    if (!filter || (*day_regime)[static_cast<std::size_t>(d)] == *filter) days.push_back(d);
  if (static_cast<int>(days.size()) < std::max(2, min_days))
    throw EstimationError("only " + std::to_string(days.size()) + " days available, need " +
                          std::to_string(std::max(2, min_days)));

  const Eigen::Index n = returns.cols();
  Matrix sample(static_cast<Eigen::Index>(days.size()), n);
  for (std::size_t k = 0; k < days.size(); ++k) sample.row(static_cast<Eigen::Index>(k)) = returns.row(days[k]);
  Moments m;
  m.days = static_cast<int>(days.size());
  m.mu = sample.colwise().mean().transpose();
  const Matrix centered = sample.rowwise() - m.mu.transpose();
  m.sigma = SPDMatrix(spd::SymMatrix(centered.transpose() * centered / static_cast<double>(m.days - 1)));
  return m;
}

Strategy Strategy::equal_weight(std::string name) {
  Strategy s;
  s.name = std::move(name);
  s.kind = StrategyKind::EqualWeight;
  return s;
}

Strategy Strategy::mean_variance(double risk_aversion, std::string name) {
  Strategy s;
  s.name = std::move(name);
  s.kind = StrategyKind::MeanVariance;
  s.risk_aversion = risk_aversion;
  return s;
}

Strategy Strategy::regime_dependent(std::string model, std::string name) {
  Strategy s;
  s.name = name.empty() ? model + "-Regime" : std::move(name);
  s.kind = StrategyKind::RegimeDependent;
  s.model = std::move(model);
  return s;
}

void Strategy::validate() const {
  if (name.empty()) throw ConfigError("strategy needs a name");
  if (!(risk_aversion > 0.0)) throw ConfigError("risk_aversion must be positive");
  for (double g : regime_risk_aversion)
    if (!(g > 0.0)) throw ConfigError("regime risk aversions must be positive");
  if (kind == StrategyKind::RegimeDependent && model.empty())
    throw ConfigError("regime-dependent strategy '" + name + "' needs a model");
}

BacktestResult run_backtest(const Matrix& returns, const std::vector<std::string>& dates,
                            const Strategy& strategy, const std::vector<Regime>* predictions,
                            const BacktestOptions& opts) {
  strategy.validate();
  const auto total = static_cast<int>(returns.rows());
  const auto n = returns.cols();
  if (static_cast<int>(dates.size()) != total) throw DataError("dates and returns differ in length");
  if (n < 1) throw DataError("backtest needs at least one asset");
  const int start = opts.start.value_or(opts.lookback);
  if (start < 0 || start >= total) throw ConfigError("backtest start lies outside the data");
  if (strategy.kind != StrategyKind::EqualWeight && start < opts.lookback)
    throw ConfigError("backtest start leaves less than one lookback of history");
  if (strategy.kind == StrategyKind::RegimeDependent &&
      (!predictions || static_cast<int>(predictions->size()) != total))
    throw DataError("strategy '" + strategy.name + "' needs one prediction per day");

  BacktestResult r;
  r.strategy = strategy.name;
  r.start_date = start > 0 ? dates[static_cast<std::size_t>(start - 1)] : "start";
  r.equity.push_back(1.0);
  for (int t = start; t < total; ++t) {
    Vector w;
    switch (strategy.kind) {
      case StrategyKind::EqualWeight:
        w = Vector::Constant(n, 1.0 / static_cast<double>(n));
        break;
      case StrategyKind::MeanVariance: {
        const Moments m = estimate_inputs(returns, t, opts.lookback);
        w = mv_optimize(m.mu, m.sigma, strategy.risk_aversion, opts.mv);
        break;
      }
      case StrategyKind::RegimeDependent: {
        const Regime regime = (*predictions)[static_cast<std::size_t>(t - 1)];
        std::optional<Moments> m;
        if (strategy.filter_moments) {
          try {
            m = estimate_inputs(returns, t, opts.lookback, predictions, regime, opts.min_filtered_days);
          } catch (const EstimationError&) {
            ++r.filter_fallbacks;
          }
        }
        if (!m) m = estimate_inputs(returns, t, opts.lookback);
        w = mv_optimize(m->mu, m->sigma, strategy.regime_risk_aversion[regimes::to_int(regime)], opts.mv);
        r.regimes_used.push_back(regime);
        break;
      }
    }
    const double ret = w.dot(returns.row(t).transpose());
    r.dates.push_back(dates[static_cast<std::size_t>(t)]);
    r.weights.push_back(std::move(w));
    r.returns.push_back(ret);
    r.equity.push_back(r.equity.back() * (1.0 + ret));
  }
  return r;
}

double max_drawdown(const std::vector<double>& equity) {
  double peak = -std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (double e : equity) {
    peak = std::max(peak, e);
    if (peak > 0.0) worst = std::max(worst, (peak - e) / peak);
  }
  return worst;
}

double annualized_sharpe(const std::vector<double>& daily) {
  if (daily.size() < 2) return 0.0;
  const Eigen::Map<const Vector> r(daily.data(), static_cast<Eigen::Index>(daily.size()));
  const double mean = r.mean();
  const double sd = std::sqrt((r.array() - mean).square().sum() / static_cast<double>(r.size() - 1));
  if (!(sd >= 1e-12)) return 0.0;
  return mean / sd * std::sqrt(static_cast<double>(regimes::kTradingDays));
}

ComparisonRow summarize(const BacktestResult& r) {
  return {r.strategy, r.equity.back() - 1.0, annualized_sharpe(r.returns), max_drawdown(r.equity)};
}

std::vector<BacktestResult> compare_strategies(const Matrix& returns,
                                               const std::vector<std::string>& dates,
                                               const std::vector<Strategy>& strategies,
                                               const PredictionMap& predictions,
                                               const BacktestOptions& opts) {
  std::vector<BacktestResult> out;
  for (const auto& s : strategies) {
    const std::vector<Regime>* preds = nullptr;
    if (s.kind == StrategyKind::RegimeDependent) {
      const auto it = predictions.find(s.model);
      if (it == predictions.end()) throw DataError("no predictions for model '" + s.model + "'");
      preds = &it->second;
    }
    out.push_back(run_backtest(returns, dates, s, preds, opts));
  }
  return out;
}

void write_equity_csv(const std::vector<BacktestResult>& results, std::ostream& out) {
  out << "date,strategy,equity\n";
  for (const auto& r : results) {
    out << r.start_date << ',' << r.strategy << ',' << fmt(r.equity.front()) << '\n';
    for (std::size_t k = 0; k < r.dates.size(); ++k)
      out << r.dates[k] << ',' << r.strategy << ',' << fmt(r.equity[k + 1]) << '\n';
  }
}

void write_weights_csv(const std::vector<BacktestResult>& results,
                       const std::vector<std::string>& tickers, std::ostream& out) {
  out << "date,strategy";
  for (const auto& t : tickers) out << ',' << t;
  out << '\n';
  for (const auto& r : results) {
    for (std::size_t k = 0; k < r.dates.size(); ++k) {
      out << r.dates[k] << ',' << r.strategy;
      for (Eigen::Index j = 0; j < r.weights[k].size(); ++j) out << ',' << fmt(r.weights[k](j));
      out << '\n';
    }
  }
}

void write_comparison_csv(const std::vector<BacktestResult>& results, std::ostream& out) {
  out << "strategy,cumulative_return,annualized_sr,max_drawdown\n";
  for (const auto& r : results) {
    const ComparisonRow row = summarize(r);
    out << row.strategy << ',' << fmt(row.cumulative_return) << ',' << fmt(row.annualized_sr) << ','
        << fmt(row.max_drawdown) << '\n';
  }
}

}  // namespace spdregime::backtest
