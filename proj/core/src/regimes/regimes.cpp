#include "spdregime/regimes/regimes.hpp"

#include "spdregime/error.hpp"
#include "spdregime/spd/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

namespace spdregime::regimes {

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Stressed: return "stressed";
    case Regime::Normal: return "normal";
    case Regime::Rally: return "rally";
  }
  return "unknown";
}

Regime parse_regime(std::string_view s) {
  std::string lower(s);
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower == "stressed" || lower == "0") return Regime::Stressed;
  if (lower == "normal" || lower == "1") return Regime::Normal;
  if (lower == "rally" || lower == "2") return Regime::Rally;
  throw DataError("unknown regime '" + std::string(s) + "'");
}

Regime regime_from_int(int v) {
  if (v < 0 || v > 2) throw DataError("regime index out of range: " + std::to_string(v));
  return static_cast<Regime>(v);
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::Empirical: return "empirical";
    case Source::Synthetic: return "synthetic";
    case Source::BlockResampled: return "block_resampled";
  }
  return "unknown";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Purged: return "purged";
  }
  return "unknown";
}

double sharpe_ratio_of_series(const Vector& r) {
  const Eigen::Index t = r.size();
  if (t < 2) throw DataError("Sharpe ratio needs at least two observations");
  const double mean = r.mean();
  const double var = (r.array() - mean).square().sum() / static_cast<double>(t - 1);
  const double sd = std::sqrt(var);
  if (!(sd >= 1e-12)) throw ZeroVolatility();
  return mean / sd * std::sqrt(static_cast<double>(kTradingDays));
}

double sharpe_ratio(const Matrix& returns) {
  if (returns.cols() < 1) throw DataError("Sharpe ratio needs at least one asset");
  return sharpe_ratio_of_series(returns.rowwise().mean());
}

Regime label_from_sr(double sr) {
  if (std::isnan(sr)) throw DomainError("Sharpe ratio is NaN");
  if (sr < kStressedBelow) return Regime::Stressed;
  if (sr > kRallyAbove) return Regime::Rally;
  return Regime::Normal;
}

SPDMatrix corr_from_returns(const Matrix& returns) {
  const Eigen::Index t = returns.rows();
  const Eigen::Index n = returns.cols();
  if (t < 2) throw DataError("correlation needs at least two rows");
  if (n < 1) throw DataError("correlation needs at least one column");
  Matrix centered = returns.rowwise() - returns.colwise().mean();
  Vector sd(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    sd(j) = centered.col(j).norm();
    const double scale = std::max(1.0, returns.col(j).cwiseAbs().maxCoeff());
    if (!(sd(j) > 1e-14 * scale * std::sqrt(static_cast<double>(t))))
      throw DataError("constant column " + std::to_string(j) + " has no correlation");
    centered.col(j) /= sd(j);
  }
  Matrix c = centered.transpose() * centered;
  c.diagonal().setOnes();
  c = c.cwiseMax(-1.0).cwiseMin(1.0);
  return SPDMatrix(SymMatrix(c));
}

std::vector<WindowedSample> rolling_windows(const Matrix& returns, int window_len, int stride) {
  if (window_len < 2) throw ConfigError("window_len must be at least 2");
  if (stride < 1) throw ConfigError("stride must be positive");
  const int length = static_cast<int>(returns.rows());
  if (length < window_len)
    throw DataError("series of " + std::to_string(length) + " days is shorter than one window of " +
                    std::to_string(window_len));
  const int count = rolling_window_count(length, window_len, stride);
  std::vector<WindowedSample> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const int start = k * stride;
    const Matrix block = returns.middleRows(start, window_len);
    WindowedSample w;
    w.start_index = start;
    w.end_index = start + window_len - 1;
    w.corr = corr_from_returns(block);
    w.sr = sharpe_ratio(block);
    w.label = label_from_sr(w.sr);
    w.source = Source::Empirical;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<int> hierarchical_order(const SymMatrix& c) {
  const int n = c.dim();
  const Matrix d = spd::corr_distance(c).matrix();
  struct Cluster {
    std::vector<int> leaves;
    int min_index;
  };
  std::vector<Cluster> clusters;
  for (int i = 0; i < n; ++i) clusters.push_back({{i}, i});
  // Single-link distance between live clusters, indexed by slot.
  Matrix link = d;

  while (clusters.size() > 1) {
    std::size_t best_a = 0, best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        const double v = link(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        // Slots are kept sorted by min_index, so strict < keeps the lowest pair on ties.
        if (v < best) {
          best = v;
          best_a = a;
          best_b = b;
        }
      }
    }
    Cluster merged{clusters[best_a].leaves, clusters[best_a].min_index};
    merged.leaves.insert(merged.leaves.end(), clusters[best_b].leaves.begin(),
                         clusters[best_b].leaves.end());

    // Lance-Williams update for single linkage: min of the two rows.
    const auto m = static_cast<Eigen::Index>(clusters.size());
    const auto a = static_cast<Eigen::Index>(best_a);
    const auto b = static_cast<Eigen::Index>(best_b);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double v = std::min(link(a, k), link(b, k));
      link(a, k) = v;
      link(k, a) = v;
    }
    link(a, a) = 0.0;
    // Drop slot b.
    Matrix reduced(m - 1, m - 1);
    for (Eigen::Index i = 0, ri = 0; i < m; ++i) {
      if (i == b) continue;
      for (Eigen::Index j = 0, rj = 0; j < m; ++j) {
        if (j == b) continue;
        reduced(ri, rj++) = link(i, j);
      }
      ++ri;
    }
    link = std::move(reduced);
    clusters[best_a] = std::move(merged);
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
  }
  return n == 0 ? std::vector<int>{} : clusters.front().leaves;
}

SymMatrix apply_order(const SymMatrix& c, std::span<const int> order) {
  const int n = c.dim();
  if (!is_permutation(order, n)) throw DomainError("apply_order: not a permutation");
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = c(order[i], order[j]);
  return SymMatrix(out);
}

Matrix apply_order_columns(const Matrix& returns, std::span<const int> order) {
  const auto n = static_cast<int>(returns.cols());
  if (!is_permutation(order, n)) throw DomainError("apply_order_columns: not a permutation");
  Matrix out(returns.rows(), n);
  for (int j = 0; j < n; ++j) out.col(j) = returns.col(order[j]);
  return out;
}

bool is_permutation(std::span<const int> p, int n) {
  if (static_cast<int>(p.size()) != n) return false;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int v : p) {
    if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = true;
  }
  return true;
}

std::vector<int> inverse_permutation(std::span<const int> p) {
  if (!is_permutation(p, static_cast<int>(p.size()))) throw DomainError("not a permutation");
  std::vector<int> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[static_cast<std::size_t>(p[i])] = static_cast<int>(i);
  return inv;
}

std::vector<std::size_t> block_resample_indices(std::size_t n, int block_len, std::uint64_t seed) {
  if (block_len < 1) throw ConfigError("block_len must be positive");
  std::vector<std::size_t> out;
  if (n == 0) return out;
  const auto len = static_cast<std::size_t>(block_len);
  const std::size_t blocks = (n + len - 1) / len;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, blocks - 1);
  out.reserve(n + len);
  while (out.size() < n) {
    const std::size_t b = pick(rng);
    for (std::size_t i = b * len; i < std::min(n, (b + 1) * len); ++i) out.push_back(i);
  }
  out.resize(n);
  return out;
}

std::vector<WindowedSample> block_resample(const std::vector<WindowedSample>& windows,
                                           int block_len, std::uint64_t seed) {
  std::vector<WindowedSample> out;
  out.reserve(windows.size());
  for (std::size_t i : block_resample_indices(windows.size(), block_len, seed)) {
    out.push_back(windows[i]);
    out.back().source = Source::BlockResampled;
  }
  return out;
}

Split parse_split(std::string_view s) {
  for (Split v : {Split::Train, Split::Val, Split::Test, Split::Purged})
    if (s == to_string(v)) return v;
  throw DataError("unknown split '" + std::string(s) + "'");
}

std::vector<Split> stratified_split(std::span<const Regime> labels, double train_fraction,
                                    double val_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction <= 1.0))
    throw ConfigError("split fractions must be positive and sum to at most 1");
  std::vector<Split> out(labels.size(), Split::Test);
  std::mt19937_64 rng(seed);
  for (int c = 0; c < 3; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (to_int(labels[i]) == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * n));
    const auto n_val = std::min(members.size() - n_train, static_cast<std::size_t>(std::lround(val_fraction * n)));
    for (std::size_t k = 0; k < members.size(); ++k)
      out[members[k]] = k < n_train ? Split::Train : k < n_train + n_val ? Split::Val : Split::Test;
  }
  return out;
}

std::vector<Split> SplitPlan::assignment(std::size_t n) const {
  std::vector<Split> out(n, Split::Purged);
  for (auto i : train) out.at(i) = Split::Train;
  for (auto i : val) out.at(i) = Split::Val;
  for (auto i : test) out.at(i) = Split::Test;
  return out;
}

SplitPlan purged_split(std::span<const Interval> windows, Interval test_range, int embargo_days,
                       double val_fraction, int lookback) {
  if (test_range.last < test_range.first) throw ConfigError("test range is empty");
  if (embargo_days < 0) throw ConfigError("embargo_days must be >= 0");
  if (lookback < 0) throw ConfigError("lookback must be >= 0");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");

  SplitPlan plan;
  plan.embargo_days = embargo_days;
  plan.lookback = lookback;
  plan.test_range = test_range;
  const Interval ex = plan.exclusion();

  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Interval& w = windows[i];
    if (w.last < w.first) throw DataError("window " + std::to_string(i) + " ends before it starts");
    if (w.first >= test_range.first && w.last <= test_range.last)
      plan.test.push_back(i);
    else if (w.last >= ex.first && w.first <= ex.last)
      plan.purged.push_back(i);
    else
      survivors.push_back(i);
  }
  if (plan.test.empty()) throw EmptySplit("no window lies inside the test range");

  std::stable_sort(survivors.begin(), survivors.end(), [&](std::size_t a, std::size_t b) {
    return windows[a].last < windows[b].last;
  });
  const auto n_val = static_cast<std::size_t>(
      std::floor(val_fraction * static_cast<double>(survivors.size())));
  const std::size_t n_train = survivors.size() - n_val;
  plan.train.assign(survivors.begin(), survivors.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.val.assign(survivors.begin() + static_cast<std::ptrdiff_t>(n_train), survivors.end());
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.val.begin(), plan.val.end());
  if (plan.train.empty()) throw EmptySplit("purging left no training windows");
  return plan;
}

SplitPlan purged_split(std::span<const WindowedSample> windows, Interval test_range,
                       int embargo_days, double val_fraction, int lookback) {
  std::vector<Interval> spans;
  spans.reserve(windows.size());
  for (const auto& w : windows) spans.push_back({w.start_index, w.end_index});
  return purged_split(spans, test_range, embargo_days, val_fraction, lookback);
}

void write_split_csv(std::span<const WindowedSample> windows, const SplitPlan& plan,
                     std::ostream& out) {
  const auto split = plan.assignment(windows.size());
  out << "window_start,window_end,sr,label,split\n";
  char buf[64];
  for (std::size_t i = 0; i < windows.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", windows[i].sr);
    out << windows[i].start_index << ',' << windows[i].end_index << ',' << buf << ','
        << to_string(windows[i].label) << ',' << to_string(split[i]) << '\n';
  }
}

}  // namespace spdregime::regimes
