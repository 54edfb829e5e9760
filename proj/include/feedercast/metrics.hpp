#pragma once

// Forecast accuracy metrics and grouped breakdowns.
//
// AMAPE is the mean absolute percent error over every (feeder, year) pair,
// with the actual in the denominator; actuals below one ampere are excluded
// from the mean and reported as a count rather than poisoning the ratio.
// RMSE is in amperes. R-squared compares squared error to the variance of
// the actuals about their mean, so the mean predictor scores exactly zero.

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "feedercast/domain.hpp"
#include "feedercast/seqdata.hpp"

namespace feedercast::metrics {

inline constexpr double amape_floor = 1.0;  // amperes

struct AmapeResult {
  double percent = 0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // actuals below the floor
};

inline AmapeResult amape(const std::vector<double>& actuals,
                         const std::vector<double>& forecasts) {
  if (actuals.size() != forecasts.size())
    throw std::invalid_argument("amape: length mismatch");
  if (actuals.empty()) throw std::invalid_argument("amape: empty input");
  AmapeResult r;
  double total = 0;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    if (actuals[i] < amape_floor) {
      ++r.excluded;
      continue;
    }
    total += std::abs(actuals[i] - forecasts[i]) / actuals[i];
    ++r.used;
  }
  if (r.used == 0) throw std::invalid_argument("amape: every record fell below the 1 A floor");
  r.percent = total / static_cast<double>(r.used) * 100.0;
  return r;
}

inline double rmse(const std::vector<double>& actuals, const std::vector<double>& forecasts) {
  if (actuals.size() != forecasts.size()) throw std::invalid_argument("rmse: length mismatch");
  if (actuals.empty()) throw std::invalid_argument("rmse: empty input");
  double total = 0;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    const double d = actuals[i] - forecasts[i];
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(actuals.size()));
}

inline double r_squared(const std::vector<double>& actuals,
                        const std::vector<double>& forecasts) {
  if (actuals.size() != forecasts.size())
    throw std::invalid_argument("r_squared: length mismatch");
  if (actuals.empty()) throw std::invalid_argument("r_squared: empty input");
  double mean = 0;
  for (double a : actuals) mean += a;
  mean /= static_cast<double>(actuals.size());
  double sse = 0, sst = 0;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    const double e = actuals[i] - forecasts[i];
    const double d = actuals[i] - mean;
    sse += e * e;
    sst += d * d;
  }
  if (sst == 0)
    throw std::invalid_argument("r_squared: actuals are all equal, variance is zero");
  return 1.0 - sse / sst;
}

// ---------------------------------------------------------------------------
// Annotated per-(feeder, year) results for grouped reporting.

struct EvalRecord {
  std::string feeder_id;
  domain::Season season = domain::Season::summer;
  int year = 0;        // calendar year
  int year_index = 0;  // 1-based position within the forecast window
  std::string cluster;
  seqdata::Config config = seqdata::Config::recursive;
  double actual = 0;
  double forecast = 0;
};

enum class GroupBy { cluster, year_index, config, season };

inline std::string group_key(const EvalRecord& r, GroupBy by) {
  switch (by) {
    case GroupBy::cluster: return r.cluster;
    case GroupBy::year_index: return "year" + std::to_string(r.year_index);
    case GroupBy::config: return seqdata::config_name(r.config);
    case GroupBy::season: return domain::season_name(r.season);
  }
  throw std::invalid_argument("group_key: unknown grouping");
}

struct GroupMetrics {
  std::string key;
  std::size_t count = 0;  // records in the group (before the AMAPE floor)
  AmapeResult amape;
  double rmse = 0;
  double r2 = std::numeric_limits<double>::quiet_NaN();  // NaN when variance is zero
};

inline GroupMetrics summarize(const std::string& key, const std::vector<double>& actuals,
                              const std::vector<double>& forecasts) {
  GroupMetrics g;
  g.key = key;
  g.count = actuals.size();
  g.amape = amape(actuals, forecasts);
  g.rmse = rmse(actuals, forecasts);
  try {
    g.r2 = r_squared(actuals, forecasts);
  } catch (const std::invalid_argument&) {
    // constant actuals within the group; leave NaN
  }
  return g;
}

// Metrics per group, sorted by key. Every record must carry its annotations.
inline std::vector<GroupMetrics> breakdown(const std::vector<EvalRecord>& records, GroupBy by) {
  if (records.empty()) throw std::invalid_argument("breakdown: no records");
  for (const auto& r : records) {
    if (r.cluster.empty())
      throw std::invalid_argument("breakdown: record for feeder " + r.feeder_id +
                                  " is missing its cluster label");
    if (r.year_index < 1)
      throw std::invalid_argument("breakdown: record for feeder " + r.feeder_id +
                                  " is missing its window year index");
  }
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    auto& [actuals, forecasts] = groups[group_key(r, by)];
    actuals.push_back(r.actual);
    forecasts.push_back(r.forecast);
  }
  std::vector<GroupMetrics> out;
  out.reserve(groups.size());
  for (const auto& [key, vecs] : groups) out.push_back(summarize(key, vecs.first, vecs.second));
  return out;
}

inline GroupMetrics overall(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw std::invalid_argument("overall: no records");
  std::vector<double> actuals, forecasts;
  actuals.reserve(records.size());
  forecasts.reserve(records.size());
  for (const auto& r : records) {
    actuals.push_back(r.actual);
    forecasts.push_back(r.forecast);
  }
  return summarize("all", actuals, forecasts);
}

}  // namespace feedercast::metrics
