#pragma once

#include "spdregime/regimes/regimes.hpp"
#include "spdregime/spd/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spdregime::io {

using regimes::Regime;
using regimes::Split;
using spd::SPDMatrix;

inline constexpr std::uint32_t kDatasetVersion = 1;

enum class Encoding { Binary, Csv };
std::string_view to_string(Encoding e);
Encoding parse_encoding(std::string_view s);

struct DatasetSample {
  SPDMatrix corr = SPDMatrix::identity(1);
  Regime regime = Regime::Normal;
  double sr = 0.0;
  /// Asset order applied to corr (empty means none).
  std::vector<int> permutation;
  int window_start = -1;  // day indices, -1 for synthetic samples
  int window_end = -1;
  Split split = Split::Train;
};

struct Dataset {
  regimes::Source source = regimes::Source::Synthetic;
  int dim = 0;
  std::vector<DatasetSample> samples;
  /// JSON object echoed into the manifest (generation parameters, seeds).
  std::string meta_json = "{}";
};

/// Directory layout:
///   manifest.json  format, version, source, dim, counts, meta, digest
///   index.csv      index,file,regime,sr,window_start,window_end,split
///   samples/       sample_NNNNNN.bin (magic "SPDS") or .csv
/// The digest is FNV-1a 64 over index.csv followed by every sample file.
/// Returns the digest as 16 hex digits.
std::string write_dataset(const std::filesystem::path& dir, const Dataset& data, Encoding encoding);

/// Reads and validates a dataset directory (version, digest, dims, SPD).
/// Throws IoError when the directory or manifest is missing, DataError on
/// malformed content.
Dataset read_dataset(const std::filesystem::path& dir);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Writes `text` to `path` (binary mode); throws IoError.
void write_file(const std::filesystem::path& path, std::string_view text);
/// Whole file contents; throws IoError.
std::string read_file(const std::filesystem::path& path);

}  // namespace spdregime::io
