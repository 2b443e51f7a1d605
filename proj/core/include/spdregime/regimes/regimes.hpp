#pragma once

#include "spdregime/spd/matrix.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace spdregime::regimes {

using spd::Matrix;
using spd::SPDMatrix;
using spd::SymMatrix;
using spd::Vector;

enum class Regime : int { Stressed = 0, Normal = 1, Rally = 2 };

std::string_view to_string(Regime r);
/// Accepts "stressed", "normal", "rally" (any case) or "0".."2".
Regime parse_regime(std::string_view s);
inline int to_int(Regime r) { return static_cast<int>(r); }
Regime regime_from_int(int v);

inline constexpr int kTradingDays = 252;
inline constexpr double kStressedBelow = -0.5;
inline constexpr double kRallyAbove = 2.0;

/// Annualised Sharpe ratio of the equal-weight basket of a T x N return
/// window: mean / sample std * sqrt(252), no risk-free rate. Throws
/// ZeroVolatility when the basket std is below 1e-12.
double sharpe_ratio(const Matrix& returns);
/// Same statistic for a single return series.
double sharpe_ratio_of_series(const Vector& r);

/// SR < -0.5 stressed, [-0.5, 2] normal, > 2 rally. Throws DomainError for NaN.
Regime label_from_sr(double sr);

/// Pearson correlation of the columns of a T x N matrix, repaired to SPD
/// by the jitter policy. Throws DataError naming a constant column.
SPDMatrix corr_from_returns(const Matrix& returns);

enum class Source { Empirical, Synthetic, BlockResampled };
std::string_view to_string(Source s);

struct WindowedSample {
  int start_index = 0;  // inclusive day indices
  int end_index = 0;
  SPDMatrix corr = SPDMatrix::identity(1);
  Regime label = Regime::Normal;
  double sr = 0.0;
  Source source = Source::Empirical;
};

/// Windows at offsets 0, stride, 2*stride, ... each of window_len rows.
/// Throws DataError when the series is shorter than one window.
std::vector<WindowedSample> rolling_windows(const Matrix& returns, int window_len = kTradingDays,
                                            int stride = 5);
inline int rolling_window_count(int length, int window_len, int stride) {
  return length < window_len ? 0 : (length - window_len) / stride + 1;
}

/// Leaf order of single-linkage clustering on sqrt(2 (1 - c)). Ties between
/// equal merge heights go to the pair with the lowest indices; within a
/// merge the cluster holding the lower original index comes first.
std::vector<int> hierarchical_order(const SymMatrix& c);

/// out(i, j) = c(order[i], order[j]).
SymMatrix apply_order(const SymMatrix& c, std::span<const int> order);
Matrix apply_order_columns(const Matrix& returns, std::span<const int> order);
/// True when `p` is a permutation of 0..n-1.
bool is_permutation(std::span<const int> p, int n);
std::vector<int> inverse_permutation(std::span<const int> p);

/// Chronology-preserving bootstrap: contiguous blocks of block_len windows
/// (the last one may be shorter) drawn with replacement and concatenated,
/// truncated to the input length.
std::vector<WindowedSample> block_resample(const std::vector<WindowedSample>& windows,
                                           int block_len, std::uint64_t seed);
/// The index form used by block_resample.
std::vector<std::size_t> block_resample_indices(std::size_t n, int block_len, std::uint64_t seed);

struct Interval {
  int first = 0;  // inclusive
  int last = 0;   // inclusive
};

enum class Split { Train, Val, Test, Purged };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// Seeded per-class split for exchangeable (synthetic) samples: within each
/// label, a shuffled round(train_fraction * n) go to training, the next
/// round(val_fraction * n) to validation, the rest to test.
std::vector<Split> stratified_split(std::span<const Regime> labels, double train_fraction,
                                    double val_fraction, std::uint64_t seed);

struct SplitPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::vector<std::size_t> purged;
  int embargo_days = 21;
  int lookback = kTradingDays;
  Interval test_range;
  /// Days a non-test window may not touch: [first - lookback - embargo, last + embargo].
  Interval exclusion() const {
    return {test_range.first - lookback - embargo_days, test_range.last + embargo_days};
  }
  /// Split per window index.
  std::vector<Split> assignment(std::size_t n) const;
};

/// Test = windows lying inside test_range. Every other window touching the
/// exclusion span is purged. Validation is the chronologically last
/// val_fraction of the survivors, the rest is training.
/// Throws EmptySplit when no test or no training window remains.
SplitPlan purged_split(std::span<const Interval> windows, Interval test_range, int embargo_days = 21,
                       double val_fraction = 0.15, int lookback = kTradingDays);
SplitPlan purged_split(std::span<const WindowedSample> windows, Interval test_range,
                       int embargo_days = 21, double val_fraction = 0.15,
                       int lookback = kTradingDays);

/// CSV `window_start,window_end,sr,label,split`.
void write_split_csv(std::span<const WindowedSample> windows, const SplitPlan& plan,
                     std::ostream& out);

}  // namespace spdregime::regimes
