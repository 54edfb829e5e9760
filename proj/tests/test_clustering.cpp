#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "feedercast/clustering.hpp"
#include "feedercast/rng.hpp"
#include "support/oracles.hpp"

using namespace feedercast;
using Eigen::Vector2d;

namespace {

domain::FeederHistory constant_share_history(const std::string& id, int years, double peak0,
                                             double r, double c, double i) {
  domain::FeederHistory h;
  h.feeder_id = id;
  h.season = domain::Season::summer;
  for (int y = 0; y < years; ++y) {
    domain::FeederYearRecord rec;
    rec.feeder_id = id;
    rec.year = 2000 + y;
    rec.season = h.season;
    rec.peak_demand = peak0 + 5.0 * y;
    rec.residential_at_peak = rec.peak_demand * r;
    rec.commercial_at_peak = rec.peak_demand * c;
    rec.industrial_at_peak = rec.peak_demand * i;
    h.records.push_back(rec);
  }
  return h;
}

std::vector<Vector2d> blob_points(rng::Stream& stream, const std::vector<Vector2d>& centers,
                                  int per_blob, double sigma, std::vector<int>* truth = nullptr) {
  std::vector<Vector2d> pts;
  for (std::size_t b = 0; b < centers.size(); ++b) {
    for (int i = 0; i < per_blob; ++i) {
      pts.emplace_back(centers[b].x() + stream.gaussian(0.0, sigma),
                       centers[b].y() + stream.gaussian(0.0, sigma));
      if (truth) truth->push_back(static_cast<int>(b));
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("composition: constant shares are recovered exactly") {
  auto h = constant_share_history("F1", 12, 400, 0.6, 0.3, 0.1);
  auto comp = cluster::compute_composition(h);
  REQUIRE(comp.residential == Catch::Approx(0.6).margin(1e-12));
  REQUIRE(comp.commercial == Catch::Approx(0.3).margin(1e-12));
  REQUIRE(comp.industrial == Catch::Approx(0.1).margin(1e-12));
}

TEST_CASE("composition: averages over the recent-year window") {
  domain::FeederHistory h;
  h.feeder_id = "F1";
  for (int y = 0; y < 2; ++y) {
    domain::FeederYearRecord rec;
    rec.year = 2000 + y;
    rec.peak_demand = 100;
    rec.residential_at_peak = (y == 0) ? 40 : 60;  // shares 0.4 then 0.6
    rec.commercial_at_peak = (y == 0) ? 60 : 40;
    rec.industrial_at_peak = 0;
    h.records.push_back(rec);
  }
  auto comp = cluster::compute_composition(h, 2);
  REQUIRE(comp.residential == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(comp.commercial == Catch::Approx(0.5).margin(1e-12));

  // Window of one year only sees the last record.
  auto last = cluster::compute_composition(h, 1);
  REQUIRE(last.residential == Catch::Approx(0.6).margin(1e-12));
}

TEST_CASE("composition: fully residential feeder and zero-peak error") {
  auto h = constant_share_history("F1", 5, 200, 1.0, 0.0, 0.0);
  auto comp = cluster::compute_composition(h);
  REQUIRE(comp.residential == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(comp.commercial == 0.0);
  REQUIRE(comp.industrial == 0.0);

  h.records[2].peak_demand = 0;
  h.records[2].residential_at_peak = 0;
  REQUIRE_THROWS_AS(cluster::compute_composition(h), std::invalid_argument);
}

TEST_CASE("minmax: known values and degenerate input") {
  std::vector<double> v = {433, 502, 554};
  auto n = cluster::minmax_normalize(v);
  REQUIRE(n[0] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(n[1] == Catch::Approx(69.0 / 121.0).margin(1e-12));
  REQUIRE(n[2] == Catch::Approx(1.0).margin(1e-12));

  std::vector<double> two = {3.5, 9.0};
  auto n2 = cluster::minmax_normalize(two);
  REQUIRE(n2[0] == 0.0);
  REQUIRE(n2[1] == 1.0);

  REQUIRE_THROWS_AS(cluster::minmax_normalize(std::vector<double>{5, 5, 5}),
                    std::invalid_argument);
}

TEST_CASE("minmax: preserves order on random input") {
  rng::Stream stream(11);
  std::vector<double> v;
  for (int i = 0; i < 50; ++i) v.push_back(stream.uniform(-100, 100));
  auto n = cluster::minmax_normalize(v);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j)
      if (v[i] < v[j]) REQUIRE(n[i] < n[j]);
}

TEST_CASE("kmeans: k equal to point count gives zero objective") {
  std::vector<Vector2d> pts = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  auto a = cluster::kmeans(pts, 4, 1);
  REQUIRE(a.objective == Catch::Approx(0.0).margin(1e-12));
  std::vector<int> seen(4, 0);
  for (int l : a.labels) ++seen[l];
  for (int c : seen) REQUIRE(c == 1);
}

TEST_CASE("kmeans: k=1 centroid is the mean") {
  std::vector<Vector2d> pts = {{0, 0}, {2, 0}, {0, 2}, {2, 2}, {1, 1}};
  auto a = cluster::kmeans(pts, 1, 3);
  REQUIRE(a.centroids[0].x() == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(a.centroids[0].y() == Catch::Approx(1.0).margin(1e-12));
  double expect = 0;
  for (const auto& p : pts) expect += (p - Vector2d(1, 1)).squaredNorm();
  REQUIRE(a.objective == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("kmeans: two tight pairs split cleanly at k=2") {
  std::vector<Vector2d> pts = {{0.0, 0.0}, {0.01, 0.0}, {1.0, 1.0}, {1.01, 1.0}};
  auto a = cluster::kmeans(pts, 2, 5);
  REQUIRE(a.labels[0] == a.labels[1]);
  REQUIRE(a.labels[2] == a.labels[3]);
  REQUIRE(a.labels[0] != a.labels[2]);
  // Canonical order: centroid 0 is the lexicographically smaller one.
  REQUIRE(a.centroids[0].x() < a.centroids[1].x());
  REQUIRE(a.labels[0] == 0);
}

TEST_CASE("kmeans: matches exhaustive optimum on small separated instances") {
  rng::Stream stream(17);
  for (int trial = 0; trial < 10; ++trial) {
    int k = 2 + static_cast<int>(stream.index(2));  // 2 or 3
    std::vector<Vector2d> centers;
    for (int c = 0; c < k; ++c)
      centers.emplace_back(stream.uniform(0, 10), stream.uniform(0, 10));
    // Keep blobs apart so the global optimum is unambiguous.
    bool apart = true;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        if ((centers[i] - centers[j]).norm() < 3.0) apart = false;
    if (!apart) continue;
    std::vector<Vector2d> pts = blob_points(stream, centers, 3, 0.15);
    double brute = oracles::brute_force_kmeans_objective(pts, k);
    auto a = cluster::kmeans(pts, k, 1000 + trial);
    REQUIRE(a.objective >= brute - 1e-9);  // cannot beat the exhaustive optimum
    REQUIRE(a.objective == Catch::Approx(brute).margin(1e-9));
  }
}

TEST_CASE("kmeans: never beats the exhaustive optimum on random instances") {
  rng::Stream stream(19);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<Vector2d> pts;
    for (int i = 0; i < 8; ++i) pts.emplace_back(stream.uniform(0, 1), stream.uniform(0, 1));
    double brute = oracles::brute_force_kmeans_objective(pts, 2);
    auto a = cluster::kmeans(pts, 2, 99 + trial);
    REQUIRE(a.objective >= brute - 1e-9);
  }
}

TEST_CASE("kmeans: objective trace is non-increasing") {
  rng::Stream stream(23);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vector2d> pts;
    int n = 30 + static_cast<int>(stream.index(40));
    for (int i = 0; i < n; ++i) pts.emplace_back(stream.uniform(0, 1), stream.uniform(0, 1));
    auto a = cluster::kmeans(pts, 2 + static_cast<int>(stream.index(4)), 7000 + trial, 3);
    REQUIRE(a.objective_trace.size() >= 1);
    for (std::size_t i = 1; i < a.objective_trace.size(); ++i)
      REQUIRE(a.objective_trace[i] <= a.objective_trace[i - 1] + 1e-9);
  }
}

TEST_CASE("kmeans: deterministic for a fixed seed") {
  rng::Stream stream(29);
  std::vector<Vector2d> pts;
  for (int i = 0; i < 60; ++i) pts.emplace_back(stream.uniform(0, 1), stream.uniform(0, 1));
  auto a = cluster::kmeans(pts, 4, 42);
  auto b = cluster::kmeans(pts, 4, 42);
  REQUIRE(a.labels == b.labels);
  REQUIRE(a.objective == b.objective);
}

TEST_CASE("kmeans: argument validation") {
  std::vector<Vector2d> pts = {{0, 0}, {1, 1}};
  REQUIRE_THROWS_AS(cluster::kmeans(pts, 3, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(cluster::kmeans(pts, 0, 1), std::invalid_argument);
}

TEST_CASE("silhouette: matches hand computation on two pairs") {
  // Clusters {0, 0.1} and {10, 10.1} on a line.
  std::vector<Vector2d> pts = {{0, 0}, {0.1, 0}, {10, 0}, {10.1, 0}};
  std::vector<int> labels = {0, 0, 1, 1};
  auto [q, avg] = cluster::silhouette(pts, labels, 2);
  // For the first point: a = 0.1, b = (10 + 10.1)/2 = 10.05.
  REQUIRE(q[0] == Catch::Approx((10.05 - 0.1) / 10.05).margin(1e-12));
  REQUIRE(avg > 0.98);
}

TEST_CASE("silhouette: perfectly separated tight clusters approach 1") {
  rng::Stream stream(31);
  std::vector<Vector2d> centers = {{0, 0}, {100, 0}, {0, 100}};
  std::vector<int> truth;
  auto pts = blob_points(stream, centers, 10, 0.01, &truth);
  auto [q, avg] = cluster::silhouette(pts, truth, 3);
  REQUIRE(avg > 0.999);
}

TEST_CASE("silhouette: coincident clusters score near zero") {
  // Two interleaved copies of the same point set, assigned to two clusters.
  std::vector<Vector2d> pts;
  std::vector<int> labels;
  rng::Stream stream(37);
  for (int i = 0; i < 40; ++i) {
    Vector2d p(stream.uniform(0, 1), stream.uniform(0, 1));
    pts.push_back(p);
    labels.push_back(0);
    pts.push_back(p);
    labels.push_back(1);
  }
  // Exact value for n copies per cluster is -1/n, approaching zero.
  auto [q, avg] = cluster::silhouette(pts, labels, 2);
  REQUIRE(std::abs(avg) < 0.05);
  REQUIRE(avg == Catch::Approx(-1.0 / 40.0).margin(1e-9));
}

TEST_CASE("silhouette: singleton cluster scores zero") {
  std::vector<Vector2d> pts = {{0, 0}, {0.1, 0}, {5, 5}};
  std::vector<int> labels = {0, 0, 1};
  auto [q, avg] = cluster::silhouette(pts, labels, 2);
  REQUIRE(q[2] == 0.0);
}

TEST_CASE("silhouette: agrees with the naive oracle on random instances") {
  rng::Stream stream(41);
  for (int trial = 0; trial < 12; ++trial) {
    int n = 20 + static_cast<int>(stream.index(180));
    int k = 2 + static_cast<int>(stream.index(5));
    std::vector<Vector2d> pts;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      pts.emplace_back(stream.uniform(0, 1), stream.uniform(0, 1));
      labels.push_back(static_cast<int>(stream.index(k)));
    }
    // Ensure no empty cluster: force the first k points to distinct labels.
    for (int c = 0; c < k; ++c) labels[c] = c;
    auto [q, avg] = cluster::silhouette(pts, labels, k);
    auto [oq, oavg] = oracles::naive_silhouette(pts, labels, k);
    REQUIRE(avg == Catch::Approx(oavg).margin(1e-12));
    for (int i = 0; i < n; ++i) REQUIRE(q[i] == Catch::Approx(oq[i]).margin(1e-12));
  }
}

TEST_CASE("select_k: two blobs select k=2") {
  rng::Stream stream(43);
  auto pts = blob_points(stream, {{0.2, 0.2}, {0.8, 0.8}}, 20, 0.03);
  auto result = cluster::select_k(pts, {2, 3, 4, 5, 6, 7, 8}, 77);
  REQUIRE(result.best.k == 2);
  REQUIRE(result.scores.size() == 7);
  // The reported score for the winner matches its standalone silhouette.
  auto [q, avg] = cluster::silhouette(pts, result.best.labels, result.best.k);
  REQUIRE(result.best.q_avg == Catch::Approx(avg).margin(1e-12));
}

TEST_CASE("select_k: single candidate is returned as-is") {
  rng::Stream stream(47);
  auto pts = blob_points(stream, {{0.2, 0.2}, {0.8, 0.8}}, 15, 0.05);
  auto result = cluster::select_k(pts, {3}, 5);
  REQUIRE(result.best.k == 3);
}

TEST_CASE("select_k: empty candidate list is an error") {
  std::vector<Vector2d> pts = {{0, 0}, {1, 1}, {2, 2}};
  REQUIRE_THROWS_AS(cluster::select_k(pts, {}, 1), std::invalid_argument);
}

TEST_CASE("select_k: recovers four planted composition blobs") {
  rng::Stream stream(53);
  std::vector<Vector2d> centers = {{0.77, 0.15}, {0.30, 0.48}, {0.21, 0.19}, {0.27, 0.31}};
  std::vector<int> truth;
  auto pts = blob_points(stream, centers, 75, 0.012, &truth);
  auto result = cluster::select_k(pts, {2, 3, 4, 5, 6, 7, 8}, 101);
  REQUIRE(result.best.k == 4);

  // Majority-label agreement with the planted assignment.
  std::map<std::pair<int, int>, int> confusion;
  for (std::size_t i = 0; i < pts.size(); ++i) ++confusion[{result.best.labels[i], truth[i]}];
  int agree = 0;
  for (int c = 0; c < 4; ++c) {
    int best = 0;
    for (int t = 0; t < 4; ++t) {
      auto it = confusion.find({c, t});
      if (it != confusion.end()) best = std::max(best, it->second);
    }
    agree += best;
  }
  REQUIRE(static_cast<double>(agree) / pts.size() >= 0.95);
}
