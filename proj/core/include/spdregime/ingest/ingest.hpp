#pragma once

#include "spdregime/spd/matrix.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace spdregime::ingest {

using spd::Matrix;

/// Dates x tickers table. Missing cells are NaN.
struct Table {
  std::vector<std::string> dates;  // ISO-8601 YYYY-MM-DD, strictly increasing
  std::vector<std::string> tickers;
  Matrix values;  // dates.size() x tickers.size()

  std::size_t rows() const { return dates.size(); }
  std::size_t cols() const { return tickers.size(); }
};

using PriceTable = Table;
using ReturnsTable = Table;

struct CsvSchema {
  std::string date_column = "date";
  /// Columns to keep, in this order. Empty keeps every non-date column.
  std::vector<std::string> tickers;
};

/// True for a valid calendar date written YYYY-MM-DD.
bool is_iso_date(std::string_view s);

/// Reads `date,TICKER1,TICKER2,...`. Empty, "NA" and "NaN" cells are missing.
/// Errors: MissingColumn, UnparseableCell (1-based data row and value
/// column), NonMonotonicDates, IoError.
Table parse_table_csv(std::istream& in, const CsvSchema& schema = {});
Table load_prices_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

/// One ticker per line; blank lines and lines starting with '#' are skipped.
std::vector<std::string> load_constituents(const std::filesystem::path& path);
std::vector<std::string> parse_constituents(std::istream& in);

/// r_t = p_t / p_{t-1} - 1, first date dropped. A return is missing when
/// either price is. Throws NonPositivePrice.
ReturnsTable to_returns(const PriceTable& prices);

struct AssetCleaning {
  std::string ticker;
  double missing_fraction = 0.0;
  bool dropped = false;
  int forward_filled = 0;
  int zero_filled = 0;
};

struct CleaningReport {
  std::vector<AssetCleaning> assets;  // input column order
};

struct CleanResult {
  ReturnsTable table;
  CleaningReport report;
};

/// Drops assets whose missing fraction exceeds max_missing_frac, then
/// forward-fills each remaining gap for up to ffill_limit days and
/// zero-fills the rest. Throws AllAssetsDropped.
CleanResult clean(const ReturnsTable& table, double max_missing_frac = 0.05, int ffill_limit = 5);

/// CSV `ticker,missing_fraction,dropped,forward_filled,zero_filled`.
void write_cleaning_report_csv(const CleaningReport& report, std::ostream& out);
/// CSV `date,TICKER...` with %.17g values and empty cells for missing.
void write_table_csv(const Table& table, std::ostream& out);

}  // namespace spdregime::ingest
