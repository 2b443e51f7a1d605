#include "spdregime/ingest/ingest.hpp"

#include "spdregime/error.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>

namespace spdregime::ingest {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "N/A";
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

int parse_int(std::string_view s) {
  int v = -1;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size() ? v : -1;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool is_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  const int y = parse_int(s.substr(0, 4));
  const int m = parse_int(s.substr(5, 2));
  const int d = parse_int(s.substr(8, 2));
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  return ymd.ok();
}

Table parse_table_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty");
  const auto header = split_csv(line);

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(header[i]);
    if (name.empty()) throw DataError("CSV header has an empty column name at position " + std::to_string(i + 1));
    if (!position.emplace(name, i).second) throw DataError("duplicate CSV column '" + name + "'");
  }
  const auto date_it = position.find(schema.date_column);
  if (date_it == position.end()) throw MissingColumn(schema.date_column);
  const std::size_t date_col = date_it->second;

  Table t;
  std::vector<std::size_t> value_cols;
  if (schema.tickers.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == date_col) continue;
      value_cols.push_back(i);
      t.tickers.emplace_back(header[i]);
    }
  } else {
    for (const auto& name : schema.tickers) {
      const auto it = position.find(name);
      if (it == position.end()) throw MissingColumn(name);
      value_cols.push_back(it->second);
      t.tickers.push_back(name);
    }
  }
  if (value_cols.empty()) throw DataError("CSV has no value columns");

  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw DataError("CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(header.size()));
    const std::string_view date = cells[date_col];
    if (!is_iso_date(date)) throw UnparseableCell(row, 0, std::string(date));
    if (!t.dates.empty() && !(t.dates.back() < date))
      throw NonMonotonicDates("date " + std::string(date) + " at row " + std::to_string(row) +
                              " does not follow " + t.dates.back());
    t.dates.emplace_back(date);
    for (std::size_t k = 0; k < value_cols.size(); ++k) {
      const std::string_view cell = cells[value_cols[k]];
      double v = kMissing;
      if (!is_missing_token(cell) && !parse_double(cell, v))
        throw UnparseableCell(row, k + 1, std::string(cell));
      values.push_back(v);
    }
  }
  t.values.resize(static_cast<Eigen::Index>(t.dates.size()), static_cast<Eigen::Index>(t.tickers.size()));
  for (std::size_t r = 0; r < t.dates.size(); ++r)
    for (std::size_t c = 0; c < t.tickers.size(); ++c)
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * t.tickers.size() + c];
  return t;
}

Table load_prices_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_table_csv(in, schema);
}

std::vector<std::string> parse_constituents(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    for (const auto& seen : out)
      if (seen == t) throw DataError("duplicate constituent '" + std::string(t) + "'");
    out.emplace_back(t);
  }
  if (out.empty()) throw DataError("constituent list is empty");
  return out;
}

std::vector<std::string> load_constituents(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_constituents(in);
}

ReturnsTable to_returns(const PriceTable& prices) {
  const auto n = static_cast<Eigen::Index>(prices.cols());
  const auto t = static_cast<Eigen::Index>(prices.rows());
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = prices.values(i, j);
      if (!std::isnan(p) && !(p > 0.0))
        throw NonPositivePrice("price " + fmt(p) + " for " + prices.tickers[j] + " on " +
                               prices.dates[i]);
    }
  ReturnsTable r;
  r.tickers = prices.tickers;
  if (t < 2) {
    r.values.resize(0, n);
    return r;
  }
  r.dates.assign(prices.dates.begin() + 1, prices.dates.end());
  r.values.resize(t - 1, n);
  for (Eigen::Index i = 1; i < t; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p0 = prices.values(i - 1, j);
      const double p1 = prices.values(i, j);
      r.values(i - 1, j) = std::isnan(p0) || std::isnan(p1) ? kMissing : p1 / p0 - 1.0;
    }
  return r;
}

CleanResult clean(const ReturnsTable& table, double max_missing_frac, int ffill_limit) {
  if (!(max_missing_frac >= 0.0 && max_missing_frac <= 1.0))
    throw ConfigError("max_missing_frac must lie in [0, 1]");
  if (ffill_limit < 0) throw ConfigError("ffill_limit must be >= 0");
  const auto t = static_cast<Eigen::Index>(table.rows());
  CleanResult out;
  out.table.dates = table.dates;
  std::vector<Eigen::Index> kept;
  for (std::size_t j = 0; j < table.cols(); ++j) {
    const auto col = table.values.col(static_cast<Eigen::Index>(j));
    const auto missing = static_cast<double>(col.array().isNaN().count());
    AssetCleaning a;
    a.ticker = table.tickers[j];
    a.missing_fraction = t > 0 ? missing / static_cast<double>(t) : 0.0;
    a.dropped = a.missing_fraction > max_missing_frac;
    if (!a.dropped) kept.push_back(static_cast<Eigen::Index>(j));
    out.report.assets.push_back(a);
  }
  if (kept.empty()) throw AllAssetsDropped();

  out.table.values.resize(t, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const Eigen::Index j = kept[k];
    AssetCleaning& a = out.report.assets[static_cast<std::size_t>(j)];
    out.table.tickers.push_back(a.ticker);
    double last = kMissing;
    int run = 0;  // consecutive missing days so far
    for (Eigen::Index i = 0; i < t; ++i) {
      double v = table.values(i, j);
      if (std::isnan(v)) {
        ++run;
        if (!std::isnan(last) && run <= ffill_limit) {
          v = last;
          ++a.forward_filled;
        } else {
          v = 0.0;
          ++a.zero_filled;
        }
      } else {
        run = 0;
        last = v;
      }
      out.table.values(i, static_cast<Eigen::Index>(k)) = v;
    }
  }
  return out;
}

void write_cleaning_report_csv(const CleaningReport& report, std::ostream& out) {
  out << "ticker,missing_fraction,dropped,forward_filled,zero_filled\n";
  for (const auto& a : report.assets)
    out << a.ticker << ',' << fmt(a.missing_fraction) << ',' << (a.dropped ? 1 : 0) << ','
        << a.forward_filled << ',' << a.zero_filled << '\n';
}

void write_table_csv(const Table& table, std::ostream& out) {
  out << "date";
  for (const auto& tk : table.tickers) out << ',' << tk;
  out << '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    out << table.dates[i];
    for (std::size_t j = 0; j < table.cols(); ++j) {
      const double v = table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out << ',';
      if (!std::isnan(v)) out << fmt(v);
    }
    out << '\n';
  }
}

}  // namespace spdregime::ingest
