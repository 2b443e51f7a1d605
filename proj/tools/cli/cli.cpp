#include "cli.hpp"

#include "common.hpp"

#include "spdregime/error.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <map>

namespace spdregime::cli {

fs::path RunConfig::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::uint64_t RunConfig::seed(const Invocation& inv, std::uint64_t fallback) const {
  if (inv.seed) return *inv.seed;
  if (json.contains("seed")) return detail::get_as<std::uint64_t>(json, "seed", "config");
  return fallback;
}

RunConfig load_config(const Invocation& inv) {
  std::ifstream in(inv.config, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + inv.config.string());
  RunConfig cfg;
  cfg.text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  cfg.json = detail::parse_json(cfg.text, inv.config.string());
  detail::require_object(cfg.json, "config");
  cfg.base_dir = inv.config.parent_path();
  if (cfg.base_dir.empty()) cfg.base_dir = ".";
  return cfg;
}

void begin_output(const Invocation& inv, const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(inv.out, ec);
  if (ec) throw IoError("cannot create output directory " + inv.out.string() + ": " + ec.message());
  std::ofstream out(inv.out / "config.json", std::ios::binary | std::ios::trunc);
  out << cfg.text;
  if (!out) throw IoError("cannot write " + (inv.out / "config.json").string());
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::array<double, 3> regime_triple(const Json& j, const std::string& key,
                                    std::array<double, 3> fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  const std::string where = what + "." + key;
  detail::require_object(v, where);
  detail::reject_unknown_keys(v, {"stressed", "normal", "rally"}, where);
  for (int r = 0; r < 3; ++r) {
    const std::string name(regimes::to_string(static_cast<regimes::Regime>(r)));
    detail::read_if(v, name, fallback[static_cast<std::size_t>(r)], where);
  }
  return fallback;
}

fs::path existing_path(const RunConfig& cfg, const std::string& key, const std::string& what) {
  if (!cfg.json.contains(key)) throw ConfigError(what + ": missing required key '" + key + "'");
  const fs::path p = cfg.resolve(detail::get_as<std::string>(cfg.json, key, what));
  if (!fs::exists(p)) throw DataError(what + ": " + key + " not found: " + p.string());
  return p;
}

namespace {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return kExitConfig;
    case ErrorCategory::Data:
    case ErrorCategory::Io: return kExitData;
    case ErrorCategory::Numerical: return kExitNumerical;
  }
  return 1;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Regime classification on SPD correlation matrices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "spdregime 0.1.0");

  const std::map<std::string, std::pair<std::string, std::function<void(const Invocation&)>>> commands{
      {"synth", {"Generate a labelled synthetic correlation dataset", cmd_synth}},
      {"ingest", {"Load, convert and clean a price or return CSV", cmd_ingest}},
      {"label", {"Window, label and split an empirical return table", cmd_label}},
      {"train", {"Train a model on a dataset", cmd_train}},
      {"eval", {"Evaluate a checkpoint or prediction file", cmd_eval}},
      {"backtest", {"Run portfolio backtests", cmd_backtest}},
      {"export-plots", {"Write plot-ready CSVs from earlier runs", cmd_export_plots}},
  };

  Invocation inv;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--seed", seed, "Seed overriding the config");
    sub->add_option("--out", out, "Output directory")->required();
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    inv.config = config;
    inv.out = out;
    if (sub->count("--seed") > 0) inv.seed = seed;
    try {
      commands.at(name).second(inv);
      return kExitOk;
    } catch (const Error& e) {
      std::cerr << "spdregime " << name << ": " << e.what() << '\n';
      return exit_code(e.category());
    } catch (const std::exception& e) {
      std::cerr << "spdregime " << name << ": internal error: " << e.what() << '\n';
      return 1;
    }
  }
  return kExitConfig;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("spdregime");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace spdregime::cli
