#ifndef ERGODEC_STATS_HPP
#define ERGODEC_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ergodec {

// Pairwise (cascade) summation in a fixed index order; the result depends
// only on the input sequence.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// sup_t |F_n(t) - F(t)| for the empirical distribution of `samples`.
inline double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

struct GapCluster {
  std::size_t begin = 0;  // into the sorted order
  std::size_t end = 0;
  double mean = 0.0;
};

/**
 * 1-D gap clustering: sorts the values and starts a new cluster wherever two
 * consecutive values differ by at least `min_gap`. Returns the clusters in
 * increasing order together with the sorting permutation.
 */
inline std::vector<GapCluster> gap_clusters(std::span<const double> values, double min_gap,
                                            std::vector<std::size_t>* order_out = nullptr) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<GapCluster> clusters;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r == 0 || values[order[r]] - values[order[r - 1]] >= min_gap) {
      clusters.push_back({r, r, 0.0});
    }
    clusters.back().end = r + 1;
  }
  std::vector<double> members;
  for (auto& c : clusters) {
    members.clear();
    for (std::size_t r = c.begin; r < c.end; ++r) members.push_back(values[order[r]]);
    c.mean = pairwise_sum(members) / static_cast<double>(members.size());
  }
  if (order_out) *order_out = std::move(order);
  return clusters;
}

}  // namespace ergodec

#endif  // ERGODEC_STATS_HPP
