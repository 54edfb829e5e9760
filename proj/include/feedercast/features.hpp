#pragma once

// Model input preparation: principal components of the area's economic and
// demographic indicators, virtual feeders for load-transfer continuity, and
// per-year feature vectors (single-year and summed-interval forms).

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "feedercast/domain.hpp"

namespace feedercast::features {

inline constexpr int econ_count = domain::AreaYearFeatures::economic_count;

// Principal component transform fitted on z-scored area indicators.
struct PcaModel {
  Eigen::VectorXd mean;                // per-column mean over training years
  Eigen::VectorXd stddev;              // per-column sample std (n-1)
  Eigen::MatrixXd components;          // n_components x econ_count, orthonormal rows
  Eigen::VectorXd explained_variance;  // descending eigenvalues of the correlation matrix

  int n_components() const { return static_cast<int>(components.rows()); }

  Eigen::VectorXd project(const std::array<double, econ_count>& raw) const {
    Eigen::VectorXd z(econ_count);
    for (int j = 0; j < econ_count; ++j) z(j) = (raw[j] - mean(j)) / stddev(j);
    return components * z;
  }
};

namespace detail {

// Flip each component row so its largest-magnitude loading is positive;
// ties resolved toward the lowest column index.
inline void fix_component_signs(Eigen::MatrixXd& components) {
  for (int r = 0; r < components.rows(); ++r) {
    int arg = 0;
    double best = std::abs(components(r, 0));
    for (int j = 1; j < components.cols(); ++j) {
      if (std::abs(components(r, j)) > best) {
        best = std::abs(components(r, j));
        arg = j;
      }
    }
    if (components(r, arg) < 0) components.row(r) = -components.row(r);
  }
}

}  // namespace detail

// Fits the transform on the training years [first_year, last_year], which
// must all be present. Columns are standardised to zero mean and unit sample
// variance, so the decomposition is of the correlation matrix.
inline PcaModel fit_pca(const domain::AreaHistory& area, int first_year, int last_year,
                        int n_components = 2) {
  if (n_components < 1 || n_components > econ_count)
    throw std::invalid_argument("fit_pca: n_components out of range");
  const int n = last_year - first_year + 1;
  if (n < 3) throw std::invalid_argument("fit_pca: need at least 3 training years");
  Eigen::MatrixXd x(n, econ_count);
  for (int y = first_year; y <= last_year; ++y) {
    const auto raw = area.at_year(y).economic();
    for (int j = 0; j < econ_count; ++j) x(y - first_year, j) = raw[j];
  }
  PcaModel model;
  model.mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  model.stddev = (centered.array().square().colwise().sum() / (n - 1)).sqrt();
  for (int j = 0; j < econ_count; ++j) {
    if (model.stddev(j) < 1e-10 * (std::abs(model.mean(j)) + 1.0))
      throw std::invalid_argument("fit_pca: zero-variance column '" +
                                  std::string(domain::area_columns()[j + 1]) + "'");
  }
  Eigen::MatrixXd z = centered.array().rowwise() / model.stddev.transpose().array();
  Eigen::MatrixXd corr = (z.transpose() * z) / (n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(corr);
  if (solver.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigensolver failed");

  // Eigen returns ascending eigenvalues; take the top ones in descending order.
  model.components.resize(n_components, econ_count);
  model.explained_variance.resize(n_components);
  for (int c = 0; c < n_components; ++c) {
    const int src = econ_count - 1 - c;
    model.explained_variance(c) = solver.eigenvalues()(src);
    model.components.row(c) = solver.eigenvectors().col(src).transpose();
  }
  detail::fix_component_signs(model.components);
  return model;
}

// First two projection coordinates of a raw indicator vector.
inline std::pair<double, double> apply_pca(const PcaModel& model,
                                           const std::array<double, econ_count>& raw) {
  if (model.n_components() < 2)
    throw std::invalid_argument("apply_pca: model has fewer than two components");
  Eigen::VectorXd p = model.project(raw);
  return {p(0), p(1)};
}

// ---------------------------------------------------------------------------
// Virtual feeders.
//
// Feeders connected by load-transfer events are replaced by a single summed
// history so that year-over-year peaks stay comparable across the transfer.
// Merging is driven purely by connectivity; members must cover identical
// year spans.

struct MergeResult {
  std::vector<domain::FeederHistory> histories;           // merged + untouched, sorted by id
  std::map<std::string, std::vector<std::string>> merge_map;  // virtual id -> member ids
};

inline MergeResult virtual_feeder_merge(const std::vector<domain::FeederHistory>& histories,
                                        const std::vector<domain::LoadTransferEvent>& events) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < histories.size(); ++i) {
    if (index.count(histories[i].feeder_id))
      throw std::invalid_argument("virtual_feeder_merge: duplicate feeder " +
                                  histories[i].feeder_id);
    index[histories[i].feeder_id] = i;
  }
  // Union-find over feeder indices.
  std::vector<std::size_t> parent(histories.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  for (const auto& e : events) {
    auto from = index.find(e.from_feeder);
    auto to = index.find(e.to_feeder);
    if (from == index.end())
      throw std::invalid_argument("virtual_feeder_merge: unknown feeder " + e.from_feeder);
    if (to == index.end())
      throw std::invalid_argument("virtual_feeder_merge: unknown feeder " + e.to_feeder);
    parent[find(from->second)] = find(to->second);
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < histories.size(); ++i) groups[find(i)].push_back(i);

  MergeResult result;
  for (auto& [root, members] : groups) {
    if (members.size() == 1) {
      result.histories.push_back(histories[members[0]]);
      continue;
    }
    std::vector<std::string> ids;
    for (std::size_t m : members) ids.push_back(histories[m].feeder_id);
    std::sort(ids.begin(), ids.end());
    std::string virtual_id = ids[0];
    for (std::size_t i = 1; i < ids.size(); ++i) virtual_id += "+" + ids[i];

    const auto& base = histories[members[0]];
    domain::FeederHistory merged;
    merged.feeder_id = virtual_id;
    merged.season = base.season;
    for (std::size_t m : members) {
      const auto& h = histories[m];
      if (h.season != base.season || h.first_year() != base.first_year() ||
          h.last_year() != base.last_year())
        throw std::invalid_argument("virtual_feeder_merge: members of " + virtual_id +
                                    " do not cover identical year spans");
    }
    for (int y = base.first_year(); y <= base.last_year(); ++y) {
      domain::FeederYearRecord rec;
      rec.feeder_id = virtual_id;
      rec.year = y;
      rec.season = base.season;
      for (std::size_t m : members) {
        const auto& r = histories[m].at_year(y);
        rec.peak_demand += r.peak_demand;
        rec.residential_at_peak += r.residential_at_peak;
        rec.commercial_at_peak += r.commercial_at_peak;
        rec.industrial_at_peak += r.industrial_at_peak;
        rec.mcnlc += r.mcnlc;
        rec.der_ev += r.der_ev;
      }
      merged.records.push_back(std::move(rec));
    }
    result.merge_map[virtual_id] = std::move(ids);
    result.histories.push_back(std::move(merged));
  }
  std::sort(result.histories.begin(), result.histories.end(),
            [](const domain::FeederHistory& a, const domain::FeederHistory& b) {
              return a.feeder_id < b.feeder_id;
            });
  return result;
}

// ---------------------------------------------------------------------------
// Per-year model inputs.

struct YearlyFeatureVector {
  double base_peak = 0;  // previous year's peak (amperes)
  double ep1 = 0;        // first economic principal component
  double ep2 = 0;        // second economic principal component
  double etaa = 0;       // seasonal extreme temperature anomaly (deg C)
  double mcnlc = 0;      // expected manual load change (amperes)
  double der_ev = 0;     // expected DER/EV adjustment (amperes)

  static constexpr int size(bool include_der_ev) { return include_der_ev ? 6 : 5; }

  Eigen::VectorXd to_vector(bool include_der_ev) const {
    Eigen::VectorXd v(size(include_der_ev));
    v(0) = base_peak;
    v(1) = ep1;
    v(2) = ep2;
    v(3) = etaa;
    v(4) = mcnlc;
    if (include_der_ev) v(5) = der_ev;
    return v;
  }
};

// Features describing `year`: the prior year's peak plus the area and feeder
// expectations for the year itself.
inline YearlyFeatureVector assemble_features(const domain::FeederHistory& feeder,
                                             const domain::AreaHistory& area,
                                             const PcaModel& pca, int year) {
  YearlyFeatureVector f;
  f.base_peak = feeder.peak(year - 1);
  const auto& rec = feeder.at_year(year);
  f.mcnlc = rec.mcnlc;
  f.der_ev = rec.der_ev;
  const auto& af = area.at_year(year);
  auto [ep1, ep2] = apply_pca(pca, af.economic());
  f.ep1 = ep1;
  f.ep2 = ep2;
  f.etaa = af.etaa(feeder.season);
  return f;
}

// Interval form: cumulative drivers from the last known year to the forecast
// year, expressed per jump year so the step shares the scale of ordinary
// yearly steps. Raw indicators and load changes are accumulated over
// (base_year, forecast_year] and divided by the jump length (the projection
// of the mean raw vector equals the mean of the yearly projections), the
// anomaly is the forecast year's own, and the base peak is the base year's
// actual. With forecast_year == base_year + 1 this reduces exactly to
// assemble_features.
inline YearlyFeatureVector sum_interval_features(const domain::FeederHistory& feeder,
                                                 const domain::AreaHistory& area,
                                                 const PcaModel& pca, int base_year,
                                                 int forecast_year) {
  if (forecast_year <= base_year)
    throw std::invalid_argument("sum_interval_features: forecast year must follow base year");
  YearlyFeatureVector f;
  f.base_peak = feeder.peak(base_year);
  const double span = forecast_year - base_year;
  std::array<double, econ_count> raw_sum{};
  for (int y = base_year + 1; y <= forecast_year; ++y) {
    const auto raw = area.at_year(y).economic();
    for (int j = 0; j < econ_count; ++j) raw_sum[j] += raw[j];
    const auto& rec = feeder.at_year(y);
    f.mcnlc += rec.mcnlc;
    f.der_ev += rec.der_ev;
  }
  for (int j = 0; j < econ_count; ++j) raw_sum[j] /= span;
  f.mcnlc /= span;
  f.der_ev /= span;
  auto [ep1, ep2] = apply_pca(pca, raw_sum);
  f.ep1 = ep1;
  f.ep2 = ep2;
  f.etaa = area.at_year(forecast_year).etaa(feeder.season);
  return f;
}

}  // namespace feedercast::features
