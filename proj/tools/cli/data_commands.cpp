#include "common.hpp"

#include "spdregime/error.hpp"
#include "spdregime/ingest/ingest.hpp"
#include "spdregime/io/dataset.hpp"
#include "spdregime/util/random.hpp"

#include <fstream>
#include <numeric>

namespace spdregime::cli {

using regimes::Regime;
using spd::SPDMatrix;

namespace {

constexpr std::uint64_t kSplitStream = 0x73706C6974;  // "split"
constexpr std::uint64_t kResampleStream = 0x626C6F636B;  // "block"

const std::array<std::string, 3> kRegimeKeys{"stressed", "normal", "rally"};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

std::size_t first_on_or_after(const std::vector<std::string>& dates, const std::string& d) {
  return static_cast<std::size_t>(std::lower_bound(dates.begin(), dates.end(), d) - dates.begin());
}

}  // namespace

synth::SynthSpec parse_synth_spec(const Json& j, std::uint64_t seed, const std::string& what) {
  detail::require_object(j, what);
  detail::reject_unknown_keys(j,
                              {"n_assets", "window_len", "n_clusters", "subclusters_per_cluster",
                               "n_levels", "dof", "regime_targets", "n_series_total", "permute_seed",
                               "daily_vol", "target_sharpe", "max_attempts"},
                              what);
  synth::SynthSpec s;
  detail::read_if(j, "n_assets", s.n_assets, what);
  detail::read_if(j, "window_len", s.window_len, what);
  detail::read_if(j, "n_clusters", s.n_clusters, what);
  detail::read_if(j, "subclusters_per_cluster", s.subclusters_per_cluster, what);
  detail::read_if(j, "n_levels", s.n_levels, what);
  detail::read_if(j, "dof", s.dof, what);
  s.regime_targets = regime_triple(j, "regime_targets", s.regime_targets, what);
  detail::read_if(j, "n_series_total", s.n_series_total, what);
  detail::read_if(j, "permute_seed", s.permute_seed, what);
  detail::read_if(j, "daily_vol", s.daily_vol, what);
  s.target_sharpe = regime_triple(j, "target_sharpe", s.target_sharpe, what);
  detail::read_if(j, "max_attempts", s.max_attempts, what);
  s.rng_seed = seed;
  s.validate();
  return s;
}

synth::FactorSpec parse_factor_spec(const Json& j, const std::string& what) {
  detail::require_object(j, what);
  detail::reject_unknown_keys(j, {"beta_range", "eta_scale", "eps_scale", "loadings"}, what);
  synth::FactorSpec f;
  detail::read_if(j, "beta_range", f.beta_range, what);
  detail::read_if(j, "eta_scale", f.eta_scale, what);
  detail::read_if(j, "eps_scale", f.eps_scale, what);
  if (j.contains("loadings")) {
    const Json& l = j.at("loadings");
    const std::string where = what + ".loadings";
    detail::require_object(l, where);
    detail::reject_unknown_keys(l, {"stressed", "normal", "rally"}, where);
    for (std::size_t r = 0; r < 3; ++r) {
      if (!l.contains(kRegimeKeys[r])) continue;
      const Json& v = l.at(kRegimeKeys[r]);
      if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
        throw ConfigError(where + "." + kRegimeKeys[r] + " must be [market, cluster, subcluster]");
      f.base[r] = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    }
  }
  f.validate();
  return f;
}

Json to_json(const synth::SynthSpec& s) {
  Json j;
  j["n_assets"] = s.n_assets;
  j["window_len"] = s.window_len;
  j["n_clusters"] = s.n_clusters;
  j["subclusters_per_cluster"] = s.subclusters_per_cluster;
  j["n_levels"] = s.n_levels;
  j["dof"] = s.dof;
  for (std::size_t r = 0; r < 3; ++r) j["regime_targets"][kRegimeKeys[r]] = s.regime_targets[r];
  j["n_series_total"] = s.n_series_total;
  j["permute_seed"] = s.permute_seed;
  j["rng_seed"] = s.rng_seed;
  j["daily_vol"] = s.daily_vol;
  for (std::size_t r = 0; r < 3; ++r) j["target_sharpe"][kRegimeKeys[r]] = s.target_sharpe[r];
  j["max_attempts"] = s.max_attempts;
  return j;
}

Json to_json(const synth::FactorSpec& f) {
  Json j;
  j["beta_range"] = f.beta_range;
  j["eta_scale"] = f.eta_scale;
  j["eps_scale"] = f.eps_scale;
  for (std::size_t r = 0; r < 3; ++r)
    j["loadings"][kRegimeKeys[r]] = {f.base[r].market, f.base[r].cluster, f.base[r].subcluster};
  return j;
}

void cmd_synth(const Invocation& inv) {
  const RunConfig cfg = load_config(inv);
  const std::string what = "synth config";
  detail::reject_unknown_keys(cfg.json, {"seed", "encoding", "synth", "factors", "split"}, what);
  const std::uint64_t seed = cfg.seed(inv);
  const auto spec = parse_synth_spec(cfg.json.value("synth", Json::object()), seed, what + ".synth");
  const auto factors = parse_factor_spec(cfg.json.value("factors", Json::object()), what + ".factors");
  const auto encoding = io::parse_encoding(string_or(cfg.json, "encoding", "binary", what));
  double train_fraction = 0.7;
  double val_fraction = 0.15;
  if (cfg.json.contains("split")) {
    const Json& s = cfg.json.at("split");
    detail::require_object(s, what + ".split");
    detail::reject_unknown_keys(s, {"train", "val"}, what + ".split");
    detail::read_if(s, "train", train_fraction, what + ".split");
    detail::read_if(s, "val", val_fraction, what + ".split");
  }
  if (!(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction <= 1.0))
    throw ConfigError(what + ": split fractions must be positive and sum to at most 1");

  const auto samples = synth::generate_dataset(spec, factors);
  std::vector<Regime> labels;
  for (const auto& s : samples) labels.push_back(s.regime);
  const std::uint64_t split_seed = util::derive_seed(seed, kSplitStream);
  const auto splits = regimes::stratified_split(labels, train_fraction, val_fraction, split_seed);

  io::Dataset data;
  data.source = regimes::Source::Synthetic;
  data.dim = spec.n_assets;
  std::array<double, 3> corr_sum{};
  std::array<int, 3> counts{};
  int attempts = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    data.samples.push_back({s.corr, s.regime, s.sr, s.permutation, -1, -1, splits[i]});
    const auto r = static_cast<std::size_t>(regimes::to_int(s.regime));
    corr_sum[r] += synth::mean_offdiag(s.corr.matrix());
    ++counts[r];
    attempts += s.attempts;
  }
  Json meta;
  meta["generator"] = "synthetic";
  meta["seed"] = seed;
  meta["synth"] = to_json(spec);
  meta["factors"] = to_json(factors);
  meta["split"] = {{"train", train_fraction}, {"val", val_fraction}, {"seed", split_seed}};
  data.meta_json = meta.dump();

  begin_output(inv, cfg);
  const std::string digest = io::write_dataset(inv.out, data, encoding);

  Json summary;
  summary["samples"] = samples.size();
  summary["digest"] = digest;
  summary["total_attempts"] = attempts;
  for (std::size_t r = 0; r < 3; ++r) {
    summary["class_counts"][kRegimeKeys[r]] = counts[r];
    summary["mean_offdiag_corr"][kRegimeKeys[r]] = counts[r] > 0 ? corr_sum[r] / counts[r] : 0.0;
  }
  write_json(inv.out / "summary.json", summary);
}

void cmd_ingest(const Invocation& inv) {
  const RunConfig cfg = load_config(inv);
  const std::string what = "ingest config";
  detail::reject_unknown_keys(cfg.json,
                              {"seed", "prices", "constituents", "date_column", "input",
                               "max_missing_frac", "ffill_limit"},
                              what);
  const fs::path prices_path = existing_path(cfg, "prices", what);
  ingest::CsvSchema schema;
  detail::read_if(cfg.json, "date_column", schema.date_column, what);
  const std::string input = string_or(cfg.json, "input", "prices", what);
  if (input != "prices" && input != "returns") throw ConfigError(what + ": input must be 'prices' or 'returns'");
  double max_missing = 0.05;
  int ffill_limit = 5;
  detail::read_if(cfg.json, "max_missing_frac", max_missing, what);
  detail::read_if(cfg.json, "ffill_limit", ffill_limit, what);
  if (!(max_missing >= 0.0 && max_missing <= 1.0)) throw ConfigError(what + ": max_missing_frac must lie in [0, 1]");
  if (ffill_limit < 0) throw ConfigError(what + ": ffill_limit must be >= 0");
  if (cfg.json.contains("constituents"))
    schema.tickers = ingest::load_constituents(existing_path(cfg, "constituents", what));

  const ingest::Table table = ingest::load_prices_csv(prices_path, schema);
  const ingest::ReturnsTable returns = input == "prices" ? ingest::to_returns(table) : table;
  if (returns.rows() < 2) throw DataError("fewer than two return rows after conversion");
  const auto cleaned = ingest::clean(returns, max_missing, ffill_limit);

  begin_output(inv, cfg);
  {
    auto out = open_out(inv.out / "returns.csv");
    ingest::write_table_csv(cleaned.table, out);
  }
  {
    auto out = open_out(inv.out / "cleaning_report.csv");
    ingest::write_cleaning_report_csv(cleaned.report, out);
  }
  Json summary;
  summary["days"] = cleaned.table.rows();
  summary["first_date"] = cleaned.table.dates.front();
  summary["last_date"] = cleaned.table.dates.back();
  summary["assets_in"] = returns.cols();
  summary["assets_kept"] = cleaned.table.cols();
  summary["dropped"] = Json::array();
  for (const auto& a : cleaned.report.assets)
    if (a.dropped) summary["dropped"].push_back(a.ticker);
  write_json(inv.out / "summary.json", summary);
}

void cmd_label(const Invocation& inv) {
  const RunConfig cfg = load_config(inv);
  const std::string what = "label config";
  detail::reject_unknown_keys(cfg.json,
                              {"seed", "returns", "window_len", "stride", "test_range", "embargo_days",
                               "val_fraction", "hierarchical_order", "block_len", "encoding"},
                              what);
  const std::uint64_t seed = cfg.seed(inv);
  const fs::path returns_path = existing_path(cfg, "returns", what);
  int window_len = regimes::kTradingDays;
  int stride = 5;
  int embargo = 21;
  double val_fraction = 0.15;
  bool order = true;
  int block_len = 0;
  detail::read_if(cfg.json, "window_len", window_len, what);
  detail::read_if(cfg.json, "stride", stride, what);
  detail::read_if(cfg.json, "embargo_days", embargo, what);
  detail::read_if(cfg.json, "val_fraction", val_fraction, what);
  detail::read_if(cfg.json, "hierarchical_order", order, what);
  detail::read_if(cfg.json, "block_len", block_len, what);
  const auto encoding = io::parse_encoding(string_or(cfg.json, "encoding", "binary", what));
  if (window_len < 3) throw ConfigError(what + ": window_len must be at least 3");
  if (stride < 1) throw ConfigError(what + ": stride must be positive");
  if (embargo < 0) throw ConfigError(what + ": embargo_days must be >= 0");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError(what + ": val_fraction must lie in [0, 1)");
  if (block_len < 0) throw ConfigError(what + ": block_len must be >= 0 (0 disables resampling)");
  if (!cfg.json.contains("test_range")) throw ConfigError(what + ": missing required key 'test_range'");
  const Json& tr = cfg.json.at("test_range");
  detail::require_object(tr, what + ".test_range");
  detail::reject_unknown_keys(tr, {"first", "last"}, what + ".test_range");
  const auto test_first = detail::get_as<std::string>(tr, "first", what + ".test_range");
  const auto test_last = detail::get_as<std::string>(tr, "last", what + ".test_range");
  if (!ingest::is_iso_date(test_first) || !ingest::is_iso_date(test_last) || test_last < test_first)
    throw ConfigError(what + ": test_range needs ISO dates with first <= last");

  const ingest::Table table = ingest::load_prices_csv(returns_path);
  if (table.values.array().isNaN().any()) throw DataError("returns contain missing values; run ingest first");
  const std::size_t first = first_on_or_after(table.dates, test_first);
  const std::size_t last_end = static_cast<std::size_t>(
      std::upper_bound(table.dates.begin(), table.dates.end(), test_last) - table.dates.begin());
  if (first >= last_end) throw DataError("test_range contains no trading day of the returns file");
  const regimes::Interval test_range{static_cast<int>(first), static_cast<int>(last_end) - 1};

  const auto windows = regimes::rolling_windows(table.values, window_len, stride);
  const auto plan = regimes::purged_split(std::span<const regimes::WindowedSample>(windows), test_range,
                                          embargo, val_fraction, window_len);

  std::vector<int> input_order;
  if (order) {
    spd::Matrix mean = spd::Matrix::Zero(windows[0].corr.dim(), windows[0].corr.dim());
    for (std::size_t i : plan.train) mean += windows[i].corr.matrix();
    mean /= static_cast<double>(plan.train.size());
    input_order = regimes::hierarchical_order(spd::SymMatrix(mean));
  }

  std::vector<std::size_t> train_slots = plan.train;
  if (block_len > 0) {
    const auto picks = regimes::block_resample_indices(plan.train.size(), block_len,
                                                       util::derive_seed(seed, kResampleStream));
    for (std::size_t k = 0; k < picks.size(); ++k) train_slots[k] = plan.train[picks[k]];
  }
  const auto assignment = plan.assignment(windows.size());

  io::Dataset data;
  data.source = block_len > 0 ? regimes::Source::BlockResampled : regimes::Source::Empirical;
  data.dim = windows[0].corr.dim();
  std::size_t next_train = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::size_t src = assignment[i] == regimes::Split::Train ? train_slots[next_train++] : i;
    const auto& w = windows[src];
    const SPDMatrix corr =
        order ? SPDMatrix(regimes::apply_order(w.corr.sym(), input_order)) : w.corr;
    data.samples.push_back({corr, w.label, w.sr, input_order, w.start_index, w.end_index, assignment[i]});
  }

  Json meta;
  meta["generator"] = "rolling_windows";
  meta["seed"] = seed;
  meta["returns"] = returns_path.filename().string();
  meta["first_date"] = table.dates.front();
  meta["last_date"] = table.dates.back();
  meta["tickers"] = table.tickers;
  meta["window_len"] = window_len;
  meta["stride"] = stride;
  meta["embargo_days"] = embargo;
  meta["val_fraction"] = val_fraction;
  meta["test_range"] = {{"first", table.dates[first]}, {"last", table.dates[last_end - 1]},
                        {"first_index", test_range.first}, {"last_index", test_range.last}};
  meta["block_len"] = block_len;
  meta["input_order"] = input_order;
  data.meta_json = meta.dump();

  begin_output(inv, cfg);
  io::write_dataset(inv.out, data, encoding);
  auto out = open_out(inv.out / "labels.csv");
  regimes::write_split_csv(std::span<const regimes::WindowedSample>(windows), plan, out);
}

}  // namespace spdregime::cli
