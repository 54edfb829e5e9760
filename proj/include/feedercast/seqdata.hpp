#pragma once

// Sliding-window training records for the three sequential forecast forms:
//
//   recursive  — predict the last input year's peak, one year ahead;
//   interval   — predict f years past the last actual year, with the final
//                step carrying interval-summed drivers;
//   multiyear  — predict the next T peaks at once from one input window.
//
// Every step's features describe one year: prior-year peak, two economic
// principal components, temperature anomaly, expected load changes. Records
// are scaled per pool: features to [0, 1], targets to [0.1, 0.9].

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "feedercast/domain.hpp"
#include "feedercast/features.hpp"

namespace feedercast::seqdata {

enum class Config { recursive, interval, multiyear };

inline std::string config_name(Config c) {
  switch (c) {
    case Config::recursive: return "recursive";
    case Config::interval: return "interval";
    case Config::multiyear: return "multiyear";
  }
  return "?";
}

inline bool parse_config(std::string_view text, Config& out) {
  if (text == "recursive") {
    out = Config::recursive;
    return true;
  }
  if (text == "interval") {
    out = Config::interval;
    return true;
  }
  if (text == "multiyear") {
    out = Config::multiyear;
    return true;
  }
  return false;
}

struct SequenceRecord {
  std::string feeder_id;
  domain::Season season = domain::Season::summer;
  Config config = Config::recursive;
  int interval_f = 1;                               // interval form only
  std::vector<int> input_years;                     // year described by each step
  std::vector<features::YearlyFeatureVector> steps; // exactly t_in entries
  std::vector<std::pair<int, double>> targets;      // (year, actual peak in amperes)
};

// One record per window of t_in consecutive years; the target is the last
// input year's own peak. A history of L years yields L - t_in records (the
// earliest year only ever serves as a base peak).
inline std::vector<SequenceRecord> build_recursive(const domain::FeederHistory& feeder,
                                                   const domain::AreaHistory& area,
                                                   const features::PcaModel& pca, int t_in = 3) {
  if (t_in < 1) throw std::invalid_argument("build_recursive: t_in must be >= 1");
  std::vector<SequenceRecord> records;
  if (feeder.empty()) return records;
  for (int s = feeder.first_year() + 1; s + t_in - 1 <= feeder.last_year(); ++s) {
    SequenceRecord rec;
    rec.feeder_id = feeder.feeder_id;
    rec.season = feeder.season;
    rec.config = Config::recursive;
    for (int y = s; y < s + t_in; ++y) {
      rec.input_years.push_back(y);
      rec.steps.push_back(features::assemble_features(feeder, area, pca, y));
    }
    const int target_year = s + t_in - 1;
    rec.targets.emplace_back(target_year, feeder.peak(target_year));
    records.push_back(std::move(rec));
  }
  return records;
}

// Interval form: the first t_in - 1 steps are ordinary years ending at the
// base year B; the final step jumps from B to B + f with summed drivers.
// Yields L - t_in - f + 1 records. With f = 1 this coincides with the
// recursive layout record-for-record.
inline std::vector<SequenceRecord> build_interval(const domain::FeederHistory& feeder,
                                                  const domain::AreaHistory& area,
                                                  const features::PcaModel& pca, int f,
                                                  int t_in = 3) {
  if (t_in < 1) throw std::invalid_argument("build_interval: t_in must be >= 1");
  if (f < 1) throw std::invalid_argument("build_interval: f must be >= 1");
  std::vector<SequenceRecord> records;
  if (feeder.empty()) return records;
  for (int base = feeder.first_year() + t_in - 1; base + f <= feeder.last_year(); ++base) {
    SequenceRecord rec;
    rec.feeder_id = feeder.feeder_id;
    rec.season = feeder.season;
    rec.config = Config::interval;
    rec.interval_f = f;
    for (int y = base - t_in + 2; y <= base; ++y) {
      rec.input_years.push_back(y);
      rec.steps.push_back(features::assemble_features(feeder, area, pca, y));
    }
    const int target_year = base + f;
    rec.input_years.push_back(target_year);
    rec.steps.push_back(features::sum_interval_features(feeder, area, pca, base, target_year));
    rec.targets.emplace_back(target_year, feeder.peak(target_year));
    records.push_back(std::move(rec));
  }
  return records;
}

// Multi-year form: same input windows as the recursive layout but the record
// carries the next `horizon` actual peaks starting at the last input year.
// Yields L - t_in - horizon + 1 records.
inline std::vector<SequenceRecord> build_multiyear(const domain::FeederHistory& feeder,
                                                   const domain::AreaHistory& area,
                                                   const features::PcaModel& pca,
                                                   int horizon = 3, int t_in = 3) {
  if (t_in < 1) throw std::invalid_argument("build_multiyear: t_in must be >= 1");
  if (horizon < 1) throw std::invalid_argument("build_multiyear: horizon must be >= 1");
  std::vector<SequenceRecord> records;
  if (feeder.empty()) return records;
  for (int s = feeder.first_year() + 1; s + t_in + horizon - 2 <= feeder.last_year(); ++s) {
    SequenceRecord rec;
    rec.feeder_id = feeder.feeder_id;
    rec.season = feeder.season;
    rec.config = Config::multiyear;
    for (int y = s; y < s + t_in; ++y) {
      rec.input_years.push_back(y);
      rec.steps.push_back(features::assemble_features(feeder, area, pca, y));
    }
    for (int k = 0; k < horizon; ++k) {
      const int target_year = s + t_in - 1 + k;
      rec.targets.emplace_back(target_year, feeder.peak(target_year));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Pool scaling.

struct ScalingStats {
  bool include_der_ev = false;
  Eigen::VectorXd feat_min, feat_max;  // per feature dimension
  double target_min = 0;
  double target_max = 1;

  int feature_size() const { return static_cast<int>(feat_min.size()); }
};

struct ScalingFit {
  ScalingStats stats;
  std::vector<std::string> warnings;
};

inline const char* feature_dim_name(int dim) {
  static const char* names[] = {"base_peak", "ep1", "ep2", "etaa", "mcnlc", "der_ev"};
  return names[dim];
}

// Min/max over every step and target in the pool. Degenerate feature
// dimensions are tolerated with a warning (they scale to zero); a degenerate
// target range is likewise flagged and maps to the interval midpoint.
inline ScalingFit fit_scaling(const std::vector<SequenceRecord>& records, bool include_der_ev) {
  if (records.empty()) throw std::invalid_argument("fit_scaling: empty record pool");
  ScalingFit fit;
  auto& st = fit.stats;
  st.include_der_ev = include_der_ev;
  const int dim = features::YearlyFeatureVector::size(include_der_ev);
  st.feat_min = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity());
  st.feat_max = Eigen::VectorXd::Constant(dim, -std::numeric_limits<double>::infinity());
  st.target_min = std::numeric_limits<double>::infinity();
  st.target_max = -std::numeric_limits<double>::infinity();
  for (const auto& rec : records) {
    for (const auto& step : rec.steps) {
      Eigen::VectorXd v = step.to_vector(include_der_ev);
      st.feat_min = st.feat_min.cwiseMin(v);
      st.feat_max = st.feat_max.cwiseMax(v);
    }
    for (const auto& [year, amps] : rec.targets) {
      st.target_min = std::min(st.target_min, amps);
      st.target_max = std::max(st.target_max, amps);
    }
  }
  for (int j = 0; j < dim; ++j) {
    if (st.feat_max(j) == st.feat_min(j))
      fit.warnings.push_back(std::string("feature '") + feature_dim_name(j) +
                             "' is constant in this pool; scaled to 0");
  }
  if (st.target_max == st.target_min)
    fit.warnings.push_back("target peaks are constant in this pool");
  return fit;
}

inline Eigen::VectorXd scale_features(const ScalingStats& st,
                                      const features::YearlyFeatureVector& f) {
  Eigen::VectorXd v = f.to_vector(st.include_der_ev);
  for (int j = 0; j < v.size(); ++j) {
    const double range = st.feat_max(j) - st.feat_min(j);
    v(j) = range > 0 ? (v(j) - st.feat_min(j)) / range : 0.0;
  }
  return v;
}

// Targets map to [0.1, 0.9] so the rectified output head never has to emit
// values at the dead end of its range.
inline double scale_target(const ScalingStats& st, double amps) {
  const double range = st.target_max - st.target_min;
  if (range <= 0) return 0.5;
  return 0.1 + 0.8 * (amps - st.target_min) / range;
}

inline double invert_target(const ScalingStats& st, double scaled) {
  const double range = st.target_max - st.target_min;
  if (range <= 0) return st.target_min;
  return st.target_min + (scaled - 0.1) * range / 0.8;
}

struct ScaledRecord {
  std::vector<Eigen::VectorXd> steps;
  Eigen::VectorXd targets;
};

inline ScaledRecord scale_record(const ScalingStats& st, const SequenceRecord& rec) {
  ScaledRecord out;
  out.steps.reserve(rec.steps.size());
  for (const auto& step : rec.steps) out.steps.push_back(scale_features(st, step));
  out.targets.resize(static_cast<Eigen::Index>(rec.targets.size()));
  for (std::size_t i = 0; i < rec.targets.size(); ++i)
    out.targets(static_cast<Eigen::Index>(i)) = scale_target(st, rec.targets[i].second);
  return out;
}

inline std::vector<ScaledRecord> scale_records(const ScalingStats& st,
                                               const std::vector<SequenceRecord>& records) {
  std::vector<ScaledRecord> out;
  out.reserve(records.size());
  for (const auto& rec : records) out.push_back(scale_record(st, rec));
  return out;
}

}  // namespace feedercast::seqdata
