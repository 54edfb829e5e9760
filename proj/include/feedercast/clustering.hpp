#pragma once

// Feeder grouping by customer-type load composition: average load shares per
// feeder, min-max normalisation, K-means (Lloyd with seeded restarts), mean
// silhouette scoring and silhouette-based selection of the cluster count.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "feedercast/domain.hpp"
#include "feedercast/rng.hpp"

namespace feedercast::cluster {

// Average share of residential / commercial / industrial load at peak over
// the most recent n_years records (0 = all). Shares are relative to the
// recorded peak, so r + c + i <= 1 with the remainder being unclassified load.
struct LoadComposition {
  std::string feeder_id;
  double residential = 0;
  double commercial = 0;
  double industrial = 0;
};

inline LoadComposition compute_composition(const domain::FeederHistory& h, int n_years = 0) {
  if (h.empty()) throw std::invalid_argument("composition of empty history for " + h.feeder_id);
  std::size_t n = h.records.size();
  if (n_years > 0) n = std::min<std::size_t>(n, static_cast<std::size_t>(n_years));
  LoadComposition comp;
  comp.feeder_id = h.feeder_id;
  for (std::size_t i = h.records.size() - n; i < h.records.size(); ++i) {
    const auto& r = h.records[i];
    if (r.peak_demand <= 0)
      throw std::invalid_argument("feeder " + h.feeder_id + " year " + std::to_string(r.year) +
                                  " has zero peak demand; composition undefined");
    comp.residential += r.residential_at_peak / r.peak_demand;
    comp.commercial += r.commercial_at_peak / r.peak_demand;
    comp.industrial += r.industrial_at_peak / r.peak_demand;
  }
  comp.residential /= static_cast<double>(n);
  comp.commercial /= static_cast<double>(n);
  comp.industrial /= static_cast<double>(n);
  return comp;
}

// (v - min) / (max - min); order preserving, range [0, 1].
inline std::vector<double> minmax_normalize(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("minmax_normalize: empty input");
  auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) throw std::invalid_argument("minmax_normalize: constant input");
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) out.push_back((x - lo) / (hi - lo));
  return out;
}

struct ClusterAssignment {
  int k = 0;
  std::vector<int> labels;                 // one per input point
  std::vector<Eigen::Vector2d> centroids;  // sorted lexicographically
  double objective = 0;                    // sum of squared distances to centroids
  double q_avg = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> objective_trace;     // objective after each Lloyd iteration
};

namespace detail {

inline double sq_dist(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a - b).squaredNorm();
}

inline int nearest_centroid(const Eigen::Vector2d& p,
                            const std::vector<Eigen::Vector2d>& centroids) {
  int best = 0;
  double best_d = sq_dist(p, centroids[0]);
  for (int c = 1; c < static_cast<int>(centroids.size()); ++c) {
    double d = sq_dist(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// One seeded Lloyd run; centroids initialised from k distinct points.
inline ClusterAssignment lloyd_run(const std::vector<Eigen::Vector2d>& pts, int k,
                                   rng::Stream& stream, int max_iter) {
  const int n = static_cast<int>(pts.size());
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  stream.shuffle(order);

  ClusterAssignment a;
  a.k = k;
  a.centroids.reserve(k);
  for (int c = 0; c < k; ++c) a.centroids.push_back(pts[order[c]]);
  a.labels.assign(n, -1);

  std::vector<int> counts(k, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int c = nearest_centroid(pts[i], a.centroids);
      if (c != a.labels[i]) changed = true;
      a.labels[i] = c;
      ++counts[c];
    }
    // Re-seed any empty cluster with the point farthest from its centroid,
    // taken from a cluster that can spare one.
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int worst = -1;
      double worst_d = -1;
      for (int i = 0; i < n; ++i) {
        if (counts[a.labels[i]] < 2) continue;
        double d = sq_dist(pts[i], a.centroids[a.labels[i]]);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      if (worst < 0) throw std::logic_error("kmeans: cannot repair empty cluster");
      --counts[a.labels[worst]];
      a.labels[worst] = c;
      ++counts[c];
      changed = true;
    }
    std::vector<Eigen::Vector2d> sums(k, Eigen::Vector2d::Zero());
    for (int i = 0; i < n; ++i) sums[a.labels[i]] += pts[i];
    for (int c = 0; c < k; ++c) a.centroids[c] = sums[c] / counts[c];

    double obj = 0;
    for (int i = 0; i < n; ++i) obj += sq_dist(pts[i], a.centroids[a.labels[i]]);
    if (!a.objective_trace.empty()) {
      double prev = a.objective_trace.back();
      if (obj > prev + 1e-9 * std::max(1.0, prev))
        throw std::logic_error("kmeans: objective increased during Lloyd iteration");
    }
    a.objective_trace.push_back(obj);
    a.objective = obj;
    if (!changed) break;
  }
  return a;
}

// Relabel clusters so centroids are in lexicographic order.
inline void canonicalize(ClusterAssignment& a) {
  std::vector<int> idx(a.k);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) {
    if (a.centroids[x].x() != a.centroids[y].x()) return a.centroids[x].x() < a.centroids[y].x();
    return a.centroids[x].y() < a.centroids[y].y();
  });
  std::vector<int> new_label(a.k);
  for (int pos = 0; pos < a.k; ++pos) new_label[idx[pos]] = pos;
  std::vector<Eigen::Vector2d> centroids(a.k);
  for (int c = 0; c < a.k; ++c) centroids[new_label[c]] = a.centroids[c];
  a.centroids = std::move(centroids);
  for (int& l : a.labels) l = new_label[l];
}

}  // namespace detail

// K-means on 2-D points. Runs `restarts` seeded Lloyd passes and keeps the
// one with the lowest objective (first such restart on ties). Labels are
// canonical: clusters are numbered by centroid order, so the result is
// independent of restart internals.
inline ClusterAssignment kmeans(const std::vector<Eigen::Vector2d>& pts, int k,
                                std::uint64_t seed, int restarts = 10, int max_iter = 100) {
  const int n = static_cast<int>(pts.size());
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k)
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " exceeds " +
                                std::to_string(n) + " points");
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  ClusterAssignment best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    rng::Stream stream(rng::derive(seed, "kmeans", static_cast<std::uint64_t>(r)));
    ClusterAssignment a = detail::lloyd_run(pts, k, stream, max_iter);
    if (!have || a.objective < best.objective) {
      best = std::move(a);
      have = true;
    }
  }
  detail::canonicalize(best);
  return best;
}

// Mean silhouette coefficient. Singleton clusters score 0 by convention, as
// does a point whose separation and cohesion are both exactly zero.
inline std::pair<std::vector<double>, double> silhouette(
    const std::vector<Eigen::Vector2d>& pts, const std::vector<int>& labels, int k) {
  const int n = static_cast<int>(pts.size());
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("silhouette: labels do not match points");
  if (k < 2) throw std::invalid_argument("silhouette: needs at least two clusters");
  std::vector<int> counts(k, 0);
  for (int l : labels) {
    if (l < 0 || l >= k) throw std::invalid_argument("silhouette: label out of range");
    ++counts[l];
  }
  for (int c = 0; c < k; ++c)
    if (counts[c] == 0) throw std::invalid_argument("silhouette: empty cluster");

  std::vector<double> q(n, 0.0);
  std::vector<double> dist_sum(k, 0.0);
  for (int i = 0; i < n; ++i) {
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dist_sum[labels[j]] += (pts[i] - pts[j]).norm();
    }
    const int own = labels[i];
    if (counts[own] == 1) {
      q[i] = 0.0;
      continue;
    }
    const double a = dist_sum[own] / (counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own) continue;
      b = std::min(b, dist_sum[c] / counts[c]);
    }
    const double denom = std::max(a, b);
    q[i] = denom > 0 ? (b - a) / denom : 0.0;
  }
  const double avg = std::accumulate(q.begin(), q.end(), 0.0) / n;
  return {q, avg};
}

struct SelectKResult {
  ClusterAssignment best;
  std::vector<std::pair<int, double>> scores;  // (k, mean silhouette)
};

// Clusters at every candidate k and keeps the one with the highest mean
// silhouette (smallest k on ties).
inline SelectKResult select_k(const std::vector<Eigen::Vector2d>& pts,
                              const std::vector<int>& k_values, std::uint64_t seed,
                              int restarts = 10) {
  if (k_values.empty()) throw std::invalid_argument("select_k: no candidate k values");
  std::vector<int> ks = k_values;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  SelectKResult result;
  bool have = false;
  for (int k : ks) {
    if (k < 2 || k > static_cast<int>(pts.size()))
      throw std::invalid_argument("select_k: invalid k = " + std::to_string(k) + " for " +
                                  std::to_string(pts.size()) + " points");
    ClusterAssignment a = kmeans(pts, k, rng::derive(seed, "select_k", static_cast<std::uint64_t>(k)),
                                 restarts);
    a.q_avg = silhouette(pts, a.labels, k).second;
    result.scores.emplace_back(k, a.q_avg);
    // Strict > keeps the smallest k on ties since candidates come in order.
    if (!have || a.q_avg > result.best.q_avg) {
      result.best = std::move(a);
      have = true;
    }
  }
  return result;
}

}  // namespace feedercast::cluster
