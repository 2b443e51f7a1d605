#include "common.hpp"

#include "spdregime/error.hpp"
#include "spdregime/io/dataset.hpp"

#include <fstream>
#include <sstream>

namespace spdregime::cli {

namespace {

const std::array<std::string, 3> kRegimeKeys{"stressed", "normal", "rally"};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

fs::path run_dir(const RunConfig& cfg, const Json& value, const std::string& what) {
  if (!value.is_string()) throw ConfigError(what + " must be a path");
  const fs::path p = cfg.resolve(value.get<std::string>());
  if (!fs::is_directory(p)) throw DataError(what + ": run directory not found: " + p.string());
  return p;
}

fs::path required_file(const fs::path& dir, const std::string& name) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) throw DataError(dir.string() + " has no " + name + "; is it a finished run?");
  return p;
}

/// Bin index for x in [-1, 1] with `bins` equal bins; 1 falls in the last bin.
int bin_of(double x, int bins) {
  const int b = static_cast<int>(std::floor((x + 1.0) / 2.0 * bins));
  return std::clamp(b, 0, bins - 1);
}

}  // namespace

void cmd_export_plots(const Invocation& inv) {
  const RunConfig cfg = load_config(inv);
  const std::string what = "export-plots config";
  detail::reject_unknown_keys(cfg.json, {"seed", "dataset", "train_runs", "backtest_run", "bins", "order_heatmaps"},
                              what);
  int bins = 40;
  bool order_heatmaps = true;
  detail::read_if(cfg.json, "bins", bins, what);
  detail::read_if(cfg.json, "order_heatmaps", order_heatmaps, what);
  if (bins < 1 || bins > 10000) throw ConfigError(what + ": bins must lie in [1, 10000]");

  std::optional<fs::path> dataset_dir;
  if (cfg.json.contains("dataset")) dataset_dir = run_dir(cfg, cfg.json.at("dataset"), what + ".dataset");
  std::vector<std::pair<std::string, fs::path>> train_runs;
  if (cfg.json.contains("train_runs")) {
    const Json& tr = cfg.json.at("train_runs");
    detail::require_object(tr, what + ".train_runs");
    for (auto it = tr.begin(); it != tr.end(); ++it) {
      const fs::path dir = run_dir(cfg, it.value(), what + ".train_runs." + it.key());
      train_runs.emplace_back(it.key(), required_file(dir, "report.csv"));
    }
  }
  std::optional<fs::path> equity;
  std::optional<fs::path> comparison;
  if (cfg.json.contains("backtest_run")) {
    const fs::path dir = run_dir(cfg, cfg.json.at("backtest_run"), what + ".backtest_run");
    equity = required_file(dir, "equity.csv");
    comparison = required_file(dir, "comparison.csv");
  }
  if (!dataset_dir && train_runs.empty() && !equity)
    throw ConfigError(what + ": nothing to export; give dataset, train_runs or backtest_run");

  std::optional<io::Dataset> data;
  if (dataset_dir) data = io::read_dataset(*dataset_dir);
  std::vector<std::string> reports;
  for (const auto& [name, path] : train_runs) {
    reports.push_back(io::read_file(path));
    if (reports.back().rfind("epoch,train_loss,train_acc,val_acc\n", 0) != 0)
      throw DataError(path.string() + ": not a training report");
  }

  begin_output(inv, cfg);
  if (data) {
    const int n = data->dim;
    std::array<std::vector<long>, 3> counts;
    std::array<spd::Matrix, 3> sums;
    std::array<int, 3> samples{};
    for (std::size_t r = 0; r < 3; ++r) {
      counts[r].assign(static_cast<std::size_t>(bins), 0);
      sums[r] = spd::Matrix::Zero(n, n);
    }
    for (const auto& s : data->samples) {
      const auto r = static_cast<std::size_t>(regimes::to_int(s.regime));
      const auto& m = s.corr.matrix();
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) ++counts[r][static_cast<std::size_t>(bin_of(m(i, j), bins))];
      sums[r] += m;
      ++samples[r];
    }
    auto out = open_out(inv.out / "correlation_density.csv");
    out << "regime,bin_lo,bin_hi,count,density\n";
    const double width = 2.0 / bins;
    for (std::size_t r = 0; r < 3; ++r) {
      const double total = static_cast<double>(samples[r]) * n * (n - 1) / 2.0;
      for (int b = 0; b < bins; ++b) {
        const long c = counts[r][static_cast<std::size_t>(b)];
        out << kRegimeKeys[r] << ',' << fmt(-1.0 + b * width) << ',' << fmt(-1.0 + (b + 1) * width) << ','
            << c << ',' << fmt(total > 0 ? static_cast<double>(c) / (total * width) : 0.0) << '\n';
      }
    }
    for (std::size_t r = 0; r < 3; ++r) {
      if (samples[r] == 0) continue;
      spd::Matrix mean = sums[r] / samples[r];
      if (order_heatmaps) {
        const auto order = regimes::hierarchical_order(spd::SymMatrix(mean));
        mean = regimes::apply_order(spd::SymMatrix(mean), order).matrix();
      }
      auto h = open_out(inv.out / ("heatmap_" + kRegimeKeys[r] + ".csv"));
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) h << (j ? "," : "") << fmt(mean(i, j));
        h << '\n';
      }
    }
  }
  if (!train_runs.empty()) {
    auto out = open_out(inv.out / "accuracy_curves.csv");
    out << "model,epoch,train_loss,train_acc,val_acc\n";
    for (std::size_t k = 0; k < train_runs.size(); ++k) {
      std::istringstream in(reports[k]);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line))
        if (!line.empty()) out << train_runs[k].first << ',' << line << '\n';
    }
  }
  if (equity) {
    io::write_file(inv.out / "equity_curves.csv", io::read_file(*equity));
    io::write_file(inv.out / "comparison.csv", io::read_file(*comparison));
  }
}

}  // namespace spdregime::cli
