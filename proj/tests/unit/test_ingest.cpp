#include "spdregime/error.hpp"
#include "spdregime/ingest/ingest.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace spdregime {
namespace {

using namespace ingest;

Table parse(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  return parse_table_csv(in, schema);
}

TEST(IsoDate, CalendarRules) {
  EXPECT_TRUE(is_iso_date("2020-02-29"));
  EXPECT_FALSE(is_iso_date("2019-02-29"));
  EXPECT_TRUE(is_iso_date("2000-02-29"));
  EXPECT_FALSE(is_iso_date("1900-02-29"));
  EXPECT_FALSE(is_iso_date("2021-04-31"));
  EXPECT_FALSE(is_iso_date("2021-13-01"));
  EXPECT_FALSE(is_iso_date("2021-1-01"));
  EXPECT_FALSE(is_iso_date("20210101"));
  EXPECT_TRUE(is_iso_date("2021-12-31"));
}

TEST(ParseCsv, ReadsValuesAndMissingMarkers) {
  const Table t = parse("date,AAA,BBB\n2021-01-04,10,20\n2021-01-05,,NA\n2021-01-06,11.5,NaN\n");
  ASSERT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.tickers, (std::vector<std::string>{"AAA", "BBB"}));
  EXPECT_EQ(t.values(0, 1), 20.0);
  EXPECT_TRUE(std::isnan(t.values(1, 0)));
  EXPECT_TRUE(std::isnan(t.values(1, 1)));
  EXPECT_EQ(t.values(2, 0), 11.5);
  EXPECT_TRUE(std::isnan(t.values(2, 1)));
}

TEST(ParseCsv, SchemaSelectsAndOrdersColumns) {
  CsvSchema schema;
  schema.date_column = "Day";
  schema.tickers = {"CCC", "AAA"};
  const Table t = parse("AAA,Day,BBB,CCC\n1,2021-01-04,2,3\n4,2021-01-05,5,6\n", schema);
  EXPECT_EQ(t.tickers, (std::vector<std::string>{"CCC", "AAA"}));
  EXPECT_EQ(t.values(1, 0), 6.0);
  EXPECT_EQ(t.values(1, 1), 4.0);
  schema.tickers = {"ZZZ"};
  try {
    parse("AAA,Day\n1,2021-01-04\n", schema);
    FAIL();
  } catch (const MissingColumn& e) {
    EXPECT_EQ(e.column(), "ZZZ");
  }
  EXPECT_THROW(parse("when,AAA\n2021-01-04,1\n"), MissingColumn);
}

TEST(ParseCsv, UnparseableCellReportsPosition) {
  try {
    parse("date,A,B,C\n2021-01-04,1,2,3\n2021-01-05,1,2,3\n2021-01-06,1,2,3\n2021-01-07,1,2,3\n"
          "2021-01-08,1,abc,3\n");
    FAIL();
  } catch (const UnparseableCell& e) {
    EXPECT_EQ(e.row(), 5u);
    EXPECT_EQ(e.col(), 2u);
  }
  try {
    parse("date,A\n2021-01-04,1\n04/01/2021,2\n");
    FAIL();
  } catch (const UnparseableCell& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.col(), 0u);
  }
  EXPECT_THROW(parse("date,A\n2021-01-04,1.5x\n"), UnparseableCell);
}

TEST(ParseCsv, StructuralErrors) {
  EXPECT_THROW(parse(""), DataError);
  EXPECT_THROW(parse("date,A,A\n2021-01-04,1,2\n"), DataError);
  EXPECT_THROW(parse("date,A\n2021-01-04,1,2\n"), DataError);
  EXPECT_THROW(parse("date\n2021-01-04\n"), DataError);
  EXPECT_THROW(parse("date,A\n2021-01-05,1\n2021-01-04,2\n"), NonMonotonicDates);
  EXPECT_THROW(parse("date,A\n2021-01-05,1\n2021-01-05,2\n"), NonMonotonicDates);
  EXPECT_THROW(load_prices_csv("/nonexistent/prices.csv"), IoError);
}

TEST(Returns, SimpleReturnsAndMissingPropagation) {
  const Table p = parse("date,A,B\n2021-01-04,100,50\n2021-01-05,110,\n2021-01-06,99,55\n");
  const ReturnsTable r = to_returns(p);
  ASSERT_EQ(r.rows(), 2u);
  EXPECT_EQ(r.dates.front(), "2021-01-05");
  EXPECT_NEAR(r.values(0, 0), 0.1, 1e-15);
  EXPECT_NEAR(r.values(1, 0), 99.0 / 110.0 - 1.0, 1e-15);
  EXPECT_TRUE(std::isnan(r.values(0, 1)));
  EXPECT_TRUE(std::isnan(r.values(1, 1)));
  EXPECT_THROW(to_returns(parse("date,A\n2021-01-04,1\n2021-01-05,0\n")), NonPositivePrice);
  EXPECT_THROW(to_returns(parse("date,A\n2021-01-04,-3\n2021-01-05,1\n")), NonPositivePrice);
}

TEST(Returns, CompoundingRecoversPrices) {
  std::mt19937_64 rng(60);
  std::lognormal_distribution<double> step(0.0, 0.02);
  std::ostringstream csv;
  csv << "date,A,B,C\n";
  std::vector<std::array<double, 3>> prices;
  std::array<double, 3> p{100.0, 20.0, 7.0};
  for (int d = 1; d <= 28; ++d) {
    for (auto& v : p) v *= step(rng);
    prices.push_back(p);
    char date[16];
    std::snprintf(date, sizeof date, "2021-02-%02d", d);
    csv << date << ',' << p[0] << ',' << p[1] << ',' << p[2] << '\n';
  }
  const Table table = parse(csv.str());
  const ReturnsTable r = to_returns(table);
  for (int j = 0; j < 3; ++j) {
    double level = table.values(0, j);
    for (std::size_t t = 0; t < r.rows(); ++t) level *= 1.0 + r.values(static_cast<Eigen::Index>(t), j);
    EXPECT_NEAR(level / table.values(27, j), 1.0, 1e-12);
  }
}

ReturnsTable with_gaps() {
  ReturnsTable t;
  for (int d = 0; d < 10; ++d) t.dates.push_back("2021-03-" + std::string(d < 9 ? "0" : "") + std::to_string(d + 1));
  t.tickers = {"A", "B", "C"};
  t.values = Matrix::Constant(10, 3, 0.01);
  for (int d = 0; d < 10; ++d) t.values(d, 0) = 0.001 * (d + 1);
  const double nan = std::nan("");
  // A: a four-day gap after day 2.
  for (int d = 3; d <= 6; ++d) t.values(d, 0) = nan;
  // B: a single missing first day.
  t.values(0, 1) = nan;
  // C: half missing.
  for (int d = 0; d < 5; ++d) t.values(2 * d, 2) = nan;
  return t;
}

TEST(Cleaning, DropForwardFillAndZeroFill) {
  const auto res = clean(with_gaps(), 0.45, 2);
  ASSERT_EQ(res.report.assets.size(), 3u);
  EXPECT_TRUE(res.report.assets[2].dropped);
  EXPECT_DOUBLE_EQ(res.report.assets[2].missing_fraction, 0.5);
  EXPECT_EQ(res.table.tickers, (std::vector<std::string>{"A", "B"}));
  const Matrix& v = res.table.values;
  EXPECT_DOUBLE_EQ(v(3, 0), 0.003);
  EXPECT_DOUBLE_EQ(v(4, 0), 0.003);
  EXPECT_DOUBLE_EQ(v(5, 0), 0.0);
  EXPECT_DOUBLE_EQ(v(6, 0), 0.0);
  EXPECT_DOUBLE_EQ(v(7, 0), 0.008);
  EXPECT_EQ(res.report.assets[0].forward_filled, 2);
  EXPECT_EQ(res.report.assets[0].zero_filled, 2);
  // Nothing to carry forward on the first day.
  EXPECT_DOUBLE_EQ(v(0, 1), 0.0);
  EXPECT_EQ(res.report.assets[1].zero_filled, 1);
  EXPECT_FALSE(v.array().isNaN().any());
}

TEST(Cleaning, PropertyFilledTableMatchesInputWhereObserved) {
  std::mt19937_64 rng(61);
  std::bernoulli_distribution missing(0.1);
  for (int trial = 0; trial < 20; ++trial) {
    ReturnsTable t;
    for (int d = 0; d < 40; ++d) t.dates.push_back("d" + std::to_string(d));
    t.tickers = {"A", "B", "C", "D"};
    t.values = 0.01 * test::gaussian(40, 4, rng);
    for (int d = 0; d < 40; ++d)
      for (int j = 0; j < 4; ++j)
        if (missing(rng)) t.values(d, j) = std::nan("");
    const int limit = trial % 4;
    const auto res = clean(t, 1.0, limit);
    ASSERT_EQ(res.table.cols(), 4u);
    for (int j = 0; j < 4; ++j) {
      const auto& a = res.report.assets[j];
      const long gaps = t.values.col(j).array().isNaN().count();
      EXPECT_EQ(a.forward_filled + a.zero_filled, gaps);
      for (int d = 0; d < 40; ++d)
        if (!std::isnan(t.values(d, j))) {
          EXPECT_EQ(res.table.values(d, j), t.values(d, j));
        }
    }
  }
  EXPECT_THROW(clean(with_gaps(), 0.0, 1), AllAssetsDropped);
  EXPECT_THROW(clean(with_gaps(), 1.5, 1), ConfigError);
  EXPECT_THROW(clean(with_gaps(), 0.5, -1), ConfigError);
}

TEST(Writers, TableRoundTripsExactly) {
  std::mt19937_64 rng(62);
  Table t;
  t.dates = {"2021-01-04", "2021-01-05", "2021-01-06"};
  t.tickers = {"X", "Y"};
  t.values = test::gaussian(3, 2, rng);
  t.values(1, 1) = std::nan("");
  std::ostringstream out;
  write_table_csv(t, out);
  const Table back = parse(out.str());
  EXPECT_EQ(back.dates, t.dates);
  EXPECT_EQ(back.tickers, t.tickers);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      if (std::isnan(t.values(i, j))) {
        EXPECT_TRUE(std::isnan(back.values(i, j)));
      } else {
        EXPECT_EQ(back.values(i, j), t.values(i, j));
      }
    }
  std::ostringstream rep;
  write_cleaning_report_csv(clean(with_gaps(), 0.45, 2).report, rep);
  EXPECT_EQ(rep.str().substr(0, rep.str().find('\n')), "ticker,missing_fraction,dropped,forward_filled,zero_filled");
}

TEST(Constituents, CommentsBlanksAndDuplicates) {
  std::istringstream in("# universe\nAAA\n\n  BBB  \nCCC\n");
  EXPECT_EQ(parse_constituents(in), (std::vector<std::string>{"AAA", "BBB", "CCC"}));
  std::istringstream dup("AAA\nAAA\n");
  EXPECT_THROW(parse_constituents(dup), DataError);
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(parse_constituents(empty), DataError);
  EXPECT_THROW(load_constituents("/nonexistent/list.txt"), IoError);
}

}  // namespace
}  // namespace spdregime
