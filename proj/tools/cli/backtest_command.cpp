#include "common.hpp"

#include "spdregime/backtest/backtest.hpp"
#include "spdregime/error.hpp"
#include "spdregime/ingest/ingest.hpp"
#include "spdregime/io/dataset.hpp"
#include "spdregime/models/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace spdregime::cli {

using backtest::Strategy;
using backtest::StrategyKind;
using regimes::Regime;
using spd::SPDMatrix;

namespace {

enum class PredictionSource { Checkpoint, File, TrailingLabel, Generating };

struct ModelSpec {
  std::string name;
  PredictionSource source = PredictionSource::TrailingLabel;
  fs::path path;
};

struct ReturnPanel {
  spd::Matrix returns;
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  std::vector<Regime> generating;  // synthetic panels only
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

std::string numbered(const char* prefix, std::size_t i, int width) {
  std::string n = std::to_string(i);
  return prefix + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(n.size()))), '0') + n;
}

Strategy parse_strategy(const Json& j, const std::string& what) {
  detail::require_object(j, what);
  detail::reject_unknown_keys(j, {"name", "kind", "risk_aversion", "regime_risk_aversion", "model", "filter_moments"},
                              what);
  const auto kind = detail::get_as<std::string>(j, "kind", what);
  Strategy s;
  if (kind == "equal_weight") {
    s = Strategy::equal_weight();
  } else if (kind == "mean_variance") {
    s = Strategy::mean_variance();
  } else if (kind == "regime_dependent") {
    if (!j.contains("model")) throw ConfigError(what + ": regime_dependent needs 'model'");
    s = Strategy::regime_dependent(detail::get_as<std::string>(j, "model", what));
  } else {
    throw ConfigError(what + ": kind must be equal_weight, mean_variance or regime_dependent");
  }
  detail::read_if(j, "name", s.name, what);
  detail::read_if(j, "risk_aversion", s.risk_aversion, what);
  s.regime_risk_aversion = regime_triple(j, "regime_risk_aversion", s.regime_risk_aversion, what);
  detail::read_if(j, "filter_moments", s.filter_moments, what);
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(what + ": " + e.what());
  }
  return s;
}

ModelSpec parse_model(const RunConfig& cfg, const std::string& name, const Json& j, bool synthetic,
                      const std::string& what) {
  detail::require_object(j, what);
  detail::reject_unknown_keys(j, {"checkpoint", "predictions", "truth"}, what);
  if (j.size() != 1) throw ConfigError(what + ": give exactly one of checkpoint, predictions, truth");
  ModelSpec m;
  m.name = name;
  if (j.contains("truth")) {
    const auto t = detail::get_as<std::string>(j, "truth", what);
    if (t == "trailing") {
      m.source = PredictionSource::TrailingLabel;
    } else if (t == "generating") {
      if (!synthetic) throw ConfigError(what + ": generating regimes exist only for synthetic returns");
      m.source = PredictionSource::Generating;
    } else {
      throw ConfigError(what + ": truth must be 'trailing' or 'generating'");
    }
    return m;
  }
  const std::string key = j.contains("checkpoint") ? "checkpoint" : "predictions";
  m.source = key == "checkpoint" ? PredictionSource::Checkpoint : PredictionSource::File;
  m.path = cfg.resolve(detail::get_as<std::string>(j, key, what));
  if (!fs::exists(m.path)) throw DataError(what + ": " + key + " not found: " + m.path.string());
  return m;
}

/// CSV `date,regime`; every listed date must exist in the panel.
std::map<std::string, Regime> read_regime_file(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  if (line != "date,regime") throw DataError(path.string() + ": header must be 'date,regime'");
  std::map<std::string, Regime> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path.string() + ": bad row '" + line + "'");
    out[line.substr(0, comma)] = regimes::parse_regime(line.substr(comma + 1));
  }
  return out;
}

}  // namespace

void cmd_backtest(const Invocation& inv) {
  const RunConfig cfg = load_config(inv);
  const std::string what = "backtest config";
  detail::reject_unknown_keys(cfg.json,
                              {"seed", "returns", "synthetic", "lookback", "start", "min_filtered_days",
                               "window_len", "models", "strategies", "mv"},
                              what);
  const std::uint64_t seed = cfg.seed(inv);
  const bool synthetic = cfg.json.contains("synthetic");
  if (synthetic == cfg.json.contains("returns"))
    throw ConfigError(what + ": give exactly one of 'returns' and 'synthetic'");

  backtest::BacktestOptions opts;
  int window_len = regimes::kTradingDays;
  detail::read_if(cfg.json, "lookback", opts.lookback, what);
  detail::read_if(cfg.json, "min_filtered_days", opts.min_filtered_days, what);
  detail::read_if(cfg.json, "window_len", window_len, what);
  if (opts.lookback < 2) throw ConfigError(what + ": lookback must be at least 2");
  if (window_len < 3) throw ConfigError(what + ": window_len must be at least 3");
  if (cfg.json.contains("mv")) {
    const Json& mv = cfg.json.at("mv");
    detail::require_object(mv, what + ".mv");
    detail::reject_unknown_keys(mv, {"max_iter", "kkt_tol"}, what + ".mv");
    detail::read_if(mv, "max_iter", opts.mv.max_iter, what + ".mv");
    detail::read_if(mv, "kkt_tol", opts.mv.kkt_tol, what + ".mv");
    if (opts.mv.max_iter < 1 || !(opts.mv.kkt_tol > 0.0)) throw ConfigError(what + ".mv: invalid solver limits");
  }

  std::vector<ModelSpec> model_specs;
  if (cfg.json.contains("models")) {
    const Json& ms = cfg.json.at("models");
    detail::require_object(ms, what + ".models");
    for (auto it = ms.begin(); it != ms.end(); ++it)
      model_specs.push_back(parse_model(cfg, it.key(), it.value(), synthetic, what + ".models." + it.key()));
  }
  std::vector<Strategy> strategies;
  if (cfg.json.contains("strategies")) {
    const Json& ss = cfg.json.at("strategies");
    if (!ss.is_array() || ss.empty()) throw ConfigError(what + ": strategies must be a non-empty array");
    for (std::size_t k = 0; k < ss.size(); ++k)
      strategies.push_back(parse_strategy(ss[k], what + ".strategies[" + std::to_string(k) + "]"));
  } else {
    strategies = {Strategy::equal_weight(), Strategy::mean_variance()};
    for (const auto& m : model_specs) strategies.push_back(Strategy::regime_dependent(m.name));
  }
  for (const auto& s : strategies) {
    if (s.kind != StrategyKind::RegimeDependent) continue;
    const bool known = std::any_of(model_specs.begin(), model_specs.end(), [&](const ModelSpec& m) { return m.name == s.model; });
    if (!known) throw ConfigError(what + ": strategy '" + s.name + "' refers to unknown model '" + s.model + "'");
  }
  for (std::size_t a = 0; a < strategies.size(); ++a)
    for (std::size_t b = a + 1; b < strategies.size(); ++b)
      if (strategies[a].name == strategies[b].name)
        throw ConfigError(what + ": duplicate strategy name '" + strategies[a].name + "'");

  ReturnPanel panel;
  std::optional<std::string> start_date;
  if (cfg.json.contains("start")) {
    const Json& s = cfg.json.at("start");
    if (s.is_number_unsigned()) {
      opts.start = s.get<int>();
    } else if (s.is_string() && !synthetic) {
      start_date = s.get<std::string>();
      if (!ingest::is_iso_date(*start_date)) throw ConfigError(what + ": start must be an ISO date");
    } else {
      throw ConfigError(what + ": start must be a day index or, for a returns file, an ISO date");
    }
  }
  if (synthetic) {
    const Json& sj = cfg.json.at("synthetic");
    const std::string where = what + ".synthetic";
    detail::require_object(sj, where);
    detail::reject_unknown_keys(sj, {"segments", "synth", "factors"}, where);
    const auto spec = parse_synth_spec(sj.value("synth", Json::object()), seed, where + ".synth");
    const auto factors = parse_factor_spec(sj.value("factors", Json::object()), where + ".factors");
    if (!sj.contains("segments") || !sj.at("segments").is_array() || sj.at("segments").empty())
      throw ConfigError(where + ": segments must be a non-empty array of regime names");
    std::vector<Regime> segments;
    for (const auto& r : sj.at("segments")) {
      if (!r.is_string()) throw ConfigError(where + ": segments must be regime names");
      try {
        segments.push_back(regimes::parse_regime(r.get<std::string>()));
      } catch (const DataError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }
    const auto sim = synth::synthetic_return_panel(spec, factors, segments, seed);
    panel.returns = sim.returns;
    panel.generating = sim.day_regime;
    for (Eigen::Index d = 0; d < panel.returns.rows(); ++d) panel.dates.push_back(numbered("day_", static_cast<std::size_t>(d), 6));
    for (Eigen::Index j = 0; j < panel.returns.cols(); ++j) panel.tickers.push_back(numbered("A", static_cast<std::size_t>(j), 2));
  } else {
    const auto table = ingest::load_prices_csv(existing_path(cfg, "returns", what));
    if (table.values.array().isNaN().any()) throw DataError("returns contain missing values; run ingest first");
    panel.returns = table.values;
    panel.dates = table.dates;
    panel.tickers = table.tickers;
  }
  const auto total = static_cast<int>(panel.returns.rows());
  if (start_date) {
    const auto it = std::lower_bound(panel.dates.begin(), panel.dates.end(), *start_date);
    if (it == panel.dates.end()) throw DataError("start date lies after the last return");
    opts.start = static_cast<int>(it - panel.dates.begin());
  }
  const int start = opts.start.value_or(opts.lookback);
  if (start < opts.lookback || start >= total)
    throw DataError("backtest start " + std::to_string(start) + " needs " + std::to_string(opts.lookback) +
                    " days of history within " + std::to_string(total) + " days");

  // Daily predictions: the trailing window ending on day d yields the regime
  // used on day d + 1. Days before the first full window, or earlier than any
  // estimate needs, stay at normal.
  const int first_needed = std::max(window_len - 1, start - opts.lookback);
  backtest::PredictionMap predictions;
  std::vector<std::pair<std::string, std::vector<int>>> predicted_days;
  for (const auto& m : model_specs) {
    std::vector<Regime> daily(static_cast<std::size_t>(total), Regime::Normal);
    std::vector<int> covered;
    if (m.source == PredictionSource::Generating) {
      daily = panel.generating;
      for (int d = 0; d < total; ++d) covered.push_back(d);
    } else if (m.source == PredictionSource::File) {
      const auto file = read_regime_file(m.path);
      for (int d = 0; d < total; ++d) {
        const auto it = file.find(panel.dates[static_cast<std::size_t>(d)]);
        if (it == file.end()) continue;
        daily[static_cast<std::size_t>(d)] = it->second;
        covered.push_back(d);
      }
    } else {
      std::optional<models::Checkpoint> ckpt;
      if (m.source == PredictionSource::Checkpoint) {
        ckpt = models::load_checkpoint(m.path);
        if (ckpt->model->input_dim() != panel.returns.cols())
          throw DataError("model '" + m.name + "' expects " + std::to_string(ckpt->model->input_dim()) +
                          " assets, returns have " + std::to_string(panel.returns.cols()));
      }
      for (int d = first_needed; d < total; ++d) {
        const spd::Matrix window = panel.returns.middleRows(d - window_len + 1, window_len);
        Regime r;
        if (ckpt) {
          SPDMatrix c = regimes::corr_from_returns(window);
          if (!ckpt->input_order.empty()) c = SPDMatrix(regimes::apply_order(c.sym(), ckpt->input_order));
          r = regimes::regime_from_int(ckpt->model->predict(c));
        } else {
          r = regimes::label_from_sr(regimes::sharpe_ratio(window));
        }
        daily[static_cast<std::size_t>(d)] = r;
        covered.push_back(d);
      }
    }
    predictions[m.name] = std::move(daily);
    predicted_days.emplace_back(m.name, std::move(covered));
  }

  const auto results = backtest::compare_strategies(panel.returns, panel.dates, strategies, predictions, opts);

  begin_output(inv, cfg);
  {
    auto out = open_out(inv.out / "equity.csv");
    backtest::write_equity_csv(results, out);
  }
  {
    auto out = open_out(inv.out / "weights.csv");
    backtest::write_weights_csv(results, panel.tickers, out);
  }
  {
    auto out = open_out(inv.out / "comparison.csv");
    backtest::write_comparison_csv(results, out);
  }
  {
    auto out = open_out(inv.out / "predictions.csv");
    out << "date,model,regime\n";
    for (const auto& [name, days] : predicted_days)
      for (int d : days)
        out << panel.dates[static_cast<std::size_t>(d)] << ',' << name << ','
            << regimes::to_string(predictions[name][static_cast<std::size_t>(d)]) << '\n';
  }
  Json summary;
  summary["days"] = total;
  summary["start_index"] = start;
  summary["start_date"] = panel.dates[static_cast<std::size_t>(start)];
  summary["assets"] = panel.tickers.size();
  summary["strategies"] = Json::array();
  for (const auto& r : results) {
    const auto row = backtest::summarize(r);
    summary["strategies"].push_back({{"name", r.strategy},
                                     {"cumulative_return", row.cumulative_return},
                                     {"annualized_sr", row.annualized_sr},
                                     {"max_drawdown", row.max_drawdown},
                                     {"filter_fallbacks", r.filter_fallbacks}});
  }
  write_json(inv.out / "summary.json", summary);
}

}  // namespace spdregime::cli
