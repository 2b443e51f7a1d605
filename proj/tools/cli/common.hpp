#pragma once

#include "json_util.hpp"

#include "spdregime/regimes/regimes.hpp"
#include "spdregime/synth/synth.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spdregime::cli {

namespace fs = std::filesystem;
using detail::Json;

struct Invocation {
  fs::path config;
  std::optional<std::uint64_t> seed;
  fs::path out;
};

/// Config file text and its parsed object. Relative paths inside it resolve
/// against the config file's directory.
struct RunConfig {
  std::string text;
  Json json;
  fs::path base_dir;

  fs::path resolve(const std::string& p) const;
  /// --seed, else the top-level "seed" key, else `fallback`.
  std::uint64_t seed(const Invocation& inv, std::uint64_t fallback = 0) const;
};

/// Throws ConfigError for a missing file, invalid JSON or a non-object.
RunConfig load_config(const Invocation& inv);

/// Creates the output directory and copies the config there verbatim.
/// Call only after every input has been validated.
void begin_output(const Invocation& inv, const RunConfig& cfg);

/// Writes JSON with two-space indentation and a trailing newline.
void write_json(const fs::path& path, const Json& j);

std::string fmt(double v);

inline std::string string_or(const Json& j, const std::string& key, std::string fallback,
                             const std::string& what) {
  detail::read_if(j, key, fallback, what);
  return fallback;
}

/// Per-regime triple from {"stressed": a, "normal": b, "rally": c}.
std::array<double, 3> regime_triple(const Json& j, const std::string& key,
                                    std::array<double, 3> fallback, const std::string& what);

/// Path that must exist; DataError otherwise.
fs::path existing_path(const RunConfig& cfg, const std::string& key, const std::string& what);

/// Synthetic generator settings; absent keys keep the defaults.
synth::SynthSpec parse_synth_spec(const Json& j, std::uint64_t seed, const std::string& what);
synth::FactorSpec parse_factor_spec(const Json& j, const std::string& what);
Json to_json(const synth::SynthSpec& s);
Json to_json(const synth::FactorSpec& f);

// Commands. Each validates its whole config before touching --out.
void cmd_synth(const Invocation& inv);
void cmd_ingest(const Invocation& inv);
void cmd_label(const Invocation& inv);
void cmd_train(const Invocation& inv);
void cmd_eval(const Invocation& inv);
void cmd_backtest(const Invocation& inv);
void cmd_export_plots(const Invocation& inv);

}  // namespace spdregime::cli
