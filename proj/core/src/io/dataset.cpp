#include "spdregime/io/dataset.hpp"

#include "../binary_util.hpp"
#include "../json_util.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace spdregime::io {

namespace fs = std::filesystem;
using detail::Json;

namespace {

constexpr char kSampleMagic[4] = {'S', 'P', 'D', 'S'};
constexpr const char* kFormat = "spdregime-dataset";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sample_name(std::size_t i, Encoding e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%06zu.%s", i, e == Encoding::Binary ? "bin" : "csv");
  return buf;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

long parse_long(const std::string& s, const std::string& what) {
  long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("bad integer for " + what + ": '" + s + "'");
  return v;
}

double parse_real(const std::string& s, const std::string& what) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("bad number for " + what + ": '" + s + "'");
  return v;
}

std::string encode_binary(const DatasetSample& s) {
  std::ostringstream out(std::ios::binary);
  out.write(kSampleMagic, 4);
  detail::put<std::uint32_t>(out, kDatasetVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.corr.dim()));
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(regimes::to_int(s.regime)));
  detail::put<double>(out, s.sr);
  detail::put<std::int32_t>(out, s.window_start);
  detail::put<std::int32_t>(out, s.window_end);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.permutation.size()));
  for (int p : s.permutation) detail::put<std::int32_t>(out, p);
  const auto& m = s.corr.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put<double>(out, m(i, j));
  return out.str();
}

std::string encode_csv(const DatasetSample& s) {
  std::ostringstream out;
  out << "key,value\nversion," << kDatasetVersion << "\ndim," << s.corr.dim() << "\nregime,"
      << regimes::to_string(s.regime) << "\nsr," << fmt(s.sr) << "\nwindow_start," << s.window_start
      << "\nwindow_end," << s.window_end << "\npermutation,";
  for (std::size_t k = 0; k < s.permutation.size(); ++k) out << (k ? ";" : "") << s.permutation[k];
  out << "\nmatrix\n";
  const auto& m = s.corr.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt(m(i, j));
    out << '\n';
  }
  return out.str();
}

SPDMatrix checked_corr(spd::Matrix m, const std::string& file) {
  if (!m.allFinite()) throw DataError(file + ": non-finite matrix entry");
  if (!m.isApprox(m.transpose(), 1e-12)) throw DataError(file + ": matrix is not symmetric");
  try {
    return SPDMatrix(m);
  } catch (const NumericalError& e) {
    throw DataError(file + ": matrix is not SPD (" + e.what() + ")");
  }
}

DatasetSample decode_binary(const std::string& bytes, const std::string& file) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kSampleMagic)) throw DataError(file + ": bad sample magic");
  if (detail::get<std::uint32_t>(in, "version") != kDatasetVersion)
    throw DataError(file + ": unsupported sample version");
  const auto dim = detail::get<std::uint32_t>(in, "dim");
  if (dim == 0 || dim > 4096) throw DataError(file + ": implausible dim");
  DatasetSample s;
  s.regime = regimes::regime_from_int(detail::get<std::uint8_t>(in, "regime"));
  s.sr = detail::get<double>(in, "sr");
  s.window_start = detail::get<std::int32_t>(in, "window_start");
  s.window_end = detail::get<std::int32_t>(in, "window_end");
  const auto n_perm = detail::get<std::uint32_t>(in, "permutation length");
  if (n_perm != 0 && n_perm != dim) throw DataError(file + ": permutation length differs from dim");
  for (std::uint32_t k = 0; k < n_perm; ++k) s.permutation.push_back(detail::get<std::int32_t>(in, "permutation"));
  spd::Matrix m(dim, dim);
  for (std::uint32_t i = 0; i < dim; ++i)
    for (std::uint32_t j = 0; j < dim; ++j) m(i, j) = detail::get<double>(in, "matrix");
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(file + ": trailing bytes");
  s.corr = checked_corr(std::move(m), file);
  return s;
}

DatasetSample decode_csv(const std::string& text, const std::string& file) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "key,value") throw DataError(file + ": bad header");
  DatasetSample s;
  long dim = -1;
  while (std::getline(in, line) && line != "matrix") {
    const auto kv = split_on(line, ',');
    if (kv.size() != 2) throw DataError(file + ": bad line '" + line + "'");
    const auto& [k, v] = std::tie(kv[0], kv[1]);
    if (k == "version") {
      if (parse_long(v, k) != kDatasetVersion) throw DataError(file + ": unsupported sample version");
    } else if (k == "dim") {
      dim = parse_long(v, k);
    } else if (k == "regime") {
      s.regime = regimes::parse_regime(v);
    } else if (k == "sr") {
      s.sr = parse_real(v, k);
    } else if (k == "window_start") {
      s.window_start = static_cast<int>(parse_long(v, k));
    } else if (k == "window_end") {
      s.window_end = static_cast<int>(parse_long(v, k));
    } else if (k == "permutation") {
      if (!v.empty())
        for (const auto& p : split_on(v, ';')) s.permutation.push_back(static_cast<int>(parse_long(p, k)));
    } else {
      throw DataError(file + ": unknown key '" + k + "'");
    }
  }
  if (dim < 1 || dim > 4096) throw DataError(file + ": missing or implausible dim");
  if (!s.permutation.empty() && static_cast<long>(s.permutation.size()) != dim)
    throw DataError(file + ": permutation length differs from dim");
  spd::Matrix m(dim, dim);
  for (long i = 0; i < dim; ++i) {
    if (!std::getline(in, line)) throw DataError(file + ": truncated matrix");
    const auto cells = split_on(line, ',');
    if (static_cast<long>(cells.size()) != dim) throw DataError(file + ": matrix row has wrong length");
    for (long j = 0; j < dim; ++j) m(i, j) = parse_real(cells[static_cast<std::size_t>(j)], "matrix entry");
  }
  s.corr = checked_corr(std::move(m), file);
  return s;
}

regimes::Source parse_source(const std::string& s) {
  for (auto v : {regimes::Source::Empirical, regimes::Source::Synthetic, regimes::Source::BlockResampled})
    if (s == regimes::to_string(v)) return v;
  throw DataError("unknown dataset source '" + s + "'");
}

}  // namespace

std::string_view to_string(Encoding e) { return e == Encoding::Binary ? "binary" : "csv"; }

Encoding parse_encoding(std::string_view s) {
  if (s == "binary") return Encoding::Binary;
  if (s == "csv") return Encoding::Csv;
  throw ConfigError("encoding must be 'binary' or 'csv', got '" + std::string(s) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string write_dataset(const fs::path& dir, const Dataset& data, Encoding encoding) {
  if (data.samples.empty()) throw DataError("refusing to write an empty dataset");
  for (const auto& s : data.samples)
    if (s.corr.dim() != data.dim) throw DataError("sample dim differs from dataset dim");
  const Json meta = detail::parse_json(data.meta_json, "dataset meta");

  std::error_code ec;
  fs::create_directories(dir / "samples", ec);
  if (ec) throw IoError("cannot create " + (dir / "samples").string() + ": " + ec.message());

  std::ostringstream index;
  index << "index,file,regime,sr,window_start,window_end,split\n";
  std::vector<std::string> blobs;
  std::array<int, 3> class_counts{};
  std::array<int, 4> split_counts{};
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    const std::string name = "samples/" + sample_name(i, encoding);
    index << i << ',' << name << ',' << regimes::to_string(s.regime) << ',' << fmt(s.sr) << ','
          << s.window_start << ',' << s.window_end << ',' << regimes::to_string(s.split) << '\n';
    blobs.push_back(encoding == Encoding::Binary ? encode_binary(s) : encode_csv(s));
    write_file(dir / name, blobs.back());
    ++class_counts[static_cast<std::size_t>(regimes::to_int(s.regime))];
    ++split_counts[static_cast<std::size_t>(s.split)];
  }
  const std::string index_text = index.str();
  write_file(dir / "index.csv", index_text);

  std::uint64_t digest = fnv1a64(index_text);
  for (const auto& b : blobs) digest = fnv1a64(b, digest);

  Json m;
  m["format"] = kFormat;
  m["version"] = kDatasetVersion;
  m["source"] = regimes::to_string(data.source);
  m["dim"] = data.dim;
  m["count"] = data.samples.size();
  m["encoding"] = to_string(encoding);
  for (int r = 0; r < 3; ++r)
    m["class_counts"][std::string(regimes::to_string(static_cast<Regime>(r)))] = class_counts[static_cast<std::size_t>(r)];
  for (auto sp : {Split::Train, Split::Val, Split::Test, Split::Purged})
    m["split_counts"][std::string(regimes::to_string(sp))] = split_counts[static_cast<std::size_t>(sp)];
  m["meta"] = meta;
  m["digest"] = hex64(digest);
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  return hex64(digest);
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IoError("no manifest.json in " + dir.string());
  Json m;
  try {
    m = Json::parse(read_file(manifest_path));
  } catch (const Json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  Dataset data;
  std::string digest;
  Encoding encoding = Encoding::Binary;
  std::size_t count = 0;
  try {
    if (m.at("format") != kFormat) throw DataError("manifest.json: not a dataset manifest");
    if (m.at("version").get<std::uint32_t>() != kDatasetVersion)
      throw DataError("manifest.json: unsupported version");
    data.source = parse_source(m.at("source").get<std::string>());
    data.dim = m.at("dim").get<int>();
    count = m.at("count").get<std::size_t>();
    encoding = parse_encoding(m.at("encoding").get<std::string>());
    data.meta_json = m.at("meta").dump();
    digest = m.at("digest").get<std::string>();
  } catch (const Json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw DataError(std::string("manifest.json: ") + e.what());
  }

  const std::string index_text = read_file(dir / "index.csv");
  std::uint64_t hash = fnv1a64(index_text);
  std::istringstream index(index_text);
  std::string line;
  std::getline(index, line);
  if (line != "index,file,regime,sr,window_start,window_end,split") throw DataError("index.csv: bad header");
  while (std::getline(index, line)) {
    const auto cells = split_on(line, ',');
    if (cells.size() != 7) throw DataError("index.csv: bad row '" + line + "'");
    if (parse_long(cells[0], "index") != static_cast<long>(data.samples.size()))
      throw DataError("index.csv: indices out of order");
    const std::string blob = read_file(dir / cells[1]);
    hash = fnv1a64(blob, hash);
    DatasetSample s = encoding == Encoding::Binary ? decode_binary(blob, cells[1]) : decode_csv(blob, cells[1]);
    if (s.corr.dim() != data.dim) throw DataError(cells[1] + ": dim differs from manifest");
    if (!s.permutation.empty() && !regimes::is_permutation(s.permutation, data.dim))
      throw DataError(cells[1] + ": invalid permutation");
    if (regimes::parse_regime(cells[2]) != s.regime) throw DataError(cells[1] + ": regime differs from index");
    s.split = regimes::parse_split(cells[6]);
    data.samples.push_back(std::move(s));
  }
  if (data.samples.size() != count) throw DataError("index.csv: sample count differs from manifest");
  if (hex64(hash) != digest) throw DataError("dataset digest mismatch in " + dir.string());
  return data;
}

}  // namespace spdregime::io
