#pragma once

// Independent reference implementations used to cross-check library results.
// These are deliberately written in the most literal way possible (textbook
// formulas, exhaustive enumeration) and share no code with the library
// internals they verify.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

namespace oracles {

// Textbook silhouette: per point, mean distance to every cluster via an
// explicit double loop.
inline std::pair<std::vector<double>, double> naive_silhouette(
    const std::vector<Eigen::Vector2d>& pts, const std::vector<int>& labels, int k) {
  const int n = static_cast<int>(pts.size());
  std::vector<double> q(n, 0.0);
  for (int i = 0; i < n; ++i) {
    int own = labels[i];
    int own_count = 0;
    for (int j = 0; j < n; ++j)
      if (labels[j] == own) ++own_count;
    if (own_count == 1) {
      q[i] = 0.0;
      continue;
    }
    double a = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i || labels[j] != own) continue;
      a += (pts[i] - pts[j]).norm();
    }
    a /= (own_count - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own) continue;
      double sum = 0.0;
      int count = 0;
      for (int j = 0; j < n; ++j) {
        if (labels[j] != c) continue;
        sum += (pts[i] - pts[j]).norm();
        ++count;
      }
      if (count > 0) b = std::min(b, sum / count);
    }
    double denom = std::max(a, b);
    q[i] = denom > 0 ? (b - a) / denom : 0.0;
  }
  double avg = 0.0;
  for (double v : q) avg += v;
  avg /= n;
  return {q, avg};
}

// Exhaustive minimum of the K-means objective over all label assignments
// with no empty cluster, centroids at cluster means. Only usable for tiny n.
inline double brute_force_kmeans_objective(const std::vector<Eigen::Vector2d>& pts, int k) {
  const int n = static_cast<int>(pts.size());
  std::vector<int> labels(n, 0);
  double best = std::numeric_limits<double>::infinity();
  const long long total = static_cast<long long>(std::pow(static_cast<double>(k), n) + 0.5);
  for (long long code = 0; code < total; ++code) {
    long long c = code;
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(c % k);
      ++counts[labels[i]];
      c /= k;
    }
    bool ok = true;
    for (int j = 0; j < k; ++j)
      if (counts[j] == 0) ok = false;
    if (!ok) continue;
    std::vector<Eigen::Vector2d> mean(k, Eigen::Vector2d::Zero());
    for (int i = 0; i < n; ++i) mean[labels[i]] += pts[i];
    for (int j = 0; j < k; ++j) mean[j] /= counts[j];
    double obj = 0.0;
    for (int i = 0; i < n; ++i) obj += (pts[i] - mean[labels[i]]).squaredNorm();
    best = std::min(best, obj);
  }
  return best;
}

// Cyclic Jacobi diagonalisation of a symmetric matrix. Eigenvectors come out
// as columns of `vectors`; nothing is sorted here.
inline void jacobi_symmetric_eigen(Eigen::MatrixXd a, Eigen::MatrixXd& vectors,
                                   Eigen::VectorXd& values) {
  const int n = static_cast<int>(a.rows());
  vectors = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t =
            (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = vectors(i, p), viq = vectors(i, q);
          vectors(i, p) = c * vip - s * viq;
          vectors(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  values = a.diagonal();
}

}  // namespace oracles
