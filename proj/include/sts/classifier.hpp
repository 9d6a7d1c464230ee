#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sts/error.hpp"
#include "sts/pipeline.hpp"

namespace sts {

enum class ChannelMode { Raw, WithTotal };
enum class DtwMode { Dependent, Independent };

/// Row-major [frames x columns] matrix of one trial's features.
class FeatureSeries {
public:
  FeatureSeries() = default;
  FeatureSeries(std::size_t cols, std::vector<double> data, bool znormed = false)
      : cols_(cols), data_(std::move(data)), znormed_(znormed) {
    require(cols_ > 0, "feature series needs at least one column");
    require(data_.size() % cols_ == 0, "feature data is not a whole number of rows");
  }

  std::size_t rows() const noexcept { return cols_ ? data_.size() / cols_ : 0; }
  std::size_t cols() const noexcept { return cols_; }
  bool znormed() const noexcept { return znormed_; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  const double* row(std::size_t r) const noexcept { return data_.data() + r * cols_; }
  std::span<const double> data() const noexcept { return data_; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
  }

  friend bool operator==(const FeatureSeries&, const FeatureSeries&) = default;

private:
  std::size_t cols_ = 0;
  std::vector<double> data_;
  bool znormed_ = false;
};

/// (x - mean) / std with population std; a constant column maps to zeros.
inline std::vector<double> znorm(std::span<const double> x) {
  require(!x.empty(), "cannot z-normalize an empty column");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(x.size(), 0.0);
  if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) return out;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
  return out;
}

inline FeatureSeries znorm(const FeatureSeries& s) {
  std::vector<double> data(s.data().size());
  for (std::size_t c = 0; c < s.cols(); ++c) {
    const auto z = znorm(s.column(c));
    for (std::size_t r = 0; r < s.rows(); ++r) data[r * s.cols() + c] = z[r];
  }
  return FeatureSeries(s.cols(), std::move(data), true);
}

/// Four corner loads, optionally with total load appended, z-normalized per column.
inline FeatureSeries make_features(const AlignedTrial& at, ChannelMode mode = ChannelMode::Raw, bool normalize = true) {
  require(at.frames() > 0, "trial has no frames");
  const std::size_t cols = mode == ChannelMode::WithTotal ? 5 : 4;
  std::vector<double> data;
  data.reserve(at.frames() * cols);
  for (const Frame& f : at.loads) {
    double sum = 0.0;
    for (double v : f) {
      data.push_back(v);
      sum += v;
    }
    if (cols == 5) data.push_back(sum);
  }
  FeatureSeries s(cols, std::move(data));
  return normalize ? znorm(s) : s;
}

/// Sakoe-Chiba half-width, widened so the end cell is always reachable.
inline std::size_t band_width(std::size_t n, std::size_t m, double band_fraction) {
  require(band_fraction > 0.0 && band_fraction <= 1.0, "band_fraction must lie in (0, 1]");
  const auto w = static_cast<std::size_t>(std::ceil(band_fraction * static_cast<double>(std::max(n, m))));
  return std::max(w, n > m ? n - m : m - n);
}

namespace detail {

/// Banded DTW over an index-pair cost; two rolling rows. Only the band and
/// one guard cell on each side are touched per row.
template <typename Cost>
double banded_dtw(std::size_t n, std::size_t m, std::size_t w, Cost cost) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t jlo = i > w ? i - w : 1;
    const std::size_t jhi = std::min(m, i + w);
    cur[jlo - 1] = inf;
    for (std::size_t j = jlo; j <= jhi; ++j) {
      const double best = std::min({prev[j], cur[j - 1], prev[j - 1]});
      cur[j] = cost(i - 1, j - 1) + best;
    }
    if (jhi + 1 <= m) cur[jhi + 1] = inf;
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace detail

/// DTW with squared-Euclidean step cost. Dependent mode warps all columns
/// jointly; independent mode sums per-column DTW.
inline double dtw_distance(const FeatureSeries& a, const FeatureSeries& b, double band_fraction,
                           DtwMode mode = DtwMode::Dependent) {
  if (a.cols() != b.cols())
    throw Error(ErrorKind::DimensionMismatch, "series have " + std::to_string(a.cols()) + " and " +
                                                  std::to_string(b.cols()) + " columns");
  require(a.rows() > 0 && b.rows() > 0, "DTW needs non-empty series");
  const std::size_t n = a.rows(), m = b.rows(), cols = a.cols();
  const std::size_t w = band_width(n, m, band_fraction);
  if (mode == DtwMode::Dependent) {
    return detail::banded_dtw(n, m, w, [&](std::size_t i, std::size_t j) {
      const double* x = a.row(i);
      const double* y = b.row(j);
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += (x[c] - y[c]) * (x[c] - y[c]);
      return s;
    });
  }
  double total = 0.0;
  for (std::size_t c = 0; c < cols; ++c)
    total += detail::banded_dtw(n, m, w, [&](std::size_t i, std::size_t j) {
      const double d = a.at(i, c) - b.at(j, c);
      return d * d;
    });
  return total;
}

struct LabeledSeries {
  std::string id;
  std::string label;
  FeatureSeries series;
};

struct Neighbor {
  std::string id;
  std::string label;
  double distance = 0.0;
};

struct ClassResult {
  std::string predicted_label;
  std::vector<Neighbor> neighbors;  ///< k nearest, ascending distance
  std::optional<double> margin;     ///< second-nearest minus nearest distance
};

struct KnnOptions {
  std::size_t k = 1;
  double band_fraction = 0.1;
  DtwMode dtw = DtwMode::Dependent;
};

/// Plurality vote over a ranked neighbor list; ties go to the smaller summed
/// distance, then to the lexicographically smaller label.
inline std::string vote(std::span<const Neighbor> nearest) {
  std::map<std::string, std::pair<std::size_t, double>> tally;
  for (const auto& nb : nearest) {
    auto& t = tally[nb.label];
    ++t.first;
    t.second += nb.distance;
  }
  const std::pair<const std::string, std::pair<std::size_t, double>>* best = nullptr;
  for (const auto& entry : tally) {
    if (!best || entry.second.first > best->second.first ||
        (entry.second.first == best->second.first && entry.second.second < best->second.second))
      best = &entry;
  }
  return best->first;
}

/// Ranks precomputed distances to the training set and votes.
inline ClassResult classify_from_distances(std::span<const double> dist, std::span<const LabeledSeries> train,
                                           std::size_t k, std::optional<std::size_t> exclude = std::nullopt) {
  require(k >= 1, "k must be at least 1");
  std::vector<Neighbor> ranked;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (!exclude || *exclude != i) ranked.push_back({train[i].id, train[i].label, dist[i]});
  if (ranked.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no training series to compare against");
  std::sort(ranked.begin(), ranked.end(), [](const Neighbor& x, const Neighbor& y) {
    return x.distance != y.distance ? x.distance < y.distance : x.id < y.id;
  });
  ClassResult r;
  if (ranked.size() >= 2) r.margin = ranked[1].distance - ranked[0].distance;
  ranked.resize(std::min(k, ranked.size()));
  r.predicted_label = vote(ranked);
  r.neighbors = std::move(ranked);
  return r;
}

inline ClassResult knn_classify(const FeatureSeries& query, std::span<const LabeledSeries> train,
                                const KnnOptions& opt = {}) {
  if (train.empty()) throw Error(ErrorKind::EmptyTrainingSet, "training set is empty");
  std::vector<double> dist(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    dist[i] = dtw_distance(query, train[i].series, opt.band_fraction, opt.dtw);
  return classify_from_distances(dist, train, opt.k);
}

/// Runs f(i) for i in [0, n) on a fixed set of worker threads. Results must
/// be written to per-index slots so scheduling cannot change them.
template <typename F>
void parallel_for(std::size_t n, F f, unsigned threads = std::thread::hardware_concurrency()) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) f(i);
    });
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
inline std::vector<std::vector<double>> distance_matrix(std::span<const FeatureSeries> series, double band_fraction,
                                                        DtwMode mode = DtwMode::Dependent) {
  const std::size_t n = series.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    d[i][j] = dtw_distance(series[i], series[j], band_fraction, mode);
  });
  for (const auto& [i, j] : pairs) d[j][i] = d[i][j];
  return d;
}

struct GroupSeparation {
  double within_mean = 0.0;
  double between_mean = 0.0;
};

/// Mean off-diagonal distance for same-group and different-group pairs.
inline GroupSeparation group_separation(const std::vector<std::vector<double>>& d, std::span<const std::string> group) {
  double w = 0.0, b = 0.0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      if (group[i] == group[j]) {
        w += d[i][j];
        ++nw;
      } else {
        b += d[i][j];
        ++nb;
      }
    }
  return {nw ? w / static_cast<double>(nw) : 0.0, nb ? b / static_cast<double>(nb) : 0.0};
}

}  // namespace sts
