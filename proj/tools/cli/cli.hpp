#pragma once

#include <string>
#include <vector>

namespace spdregime::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Parses argv, runs one subcommand and maps failures to exit codes:
/// 2 config, 3 data or I/O, 4 numerical. Messages go to stderr.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace spdregime::cli
