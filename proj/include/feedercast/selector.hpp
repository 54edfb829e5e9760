#pragma once

// Per-feeder learning of the best sequential form.
//
// A T'-year forecast window slides across the training years. For each
// window position, every sequential form re-forecasts the window from the
// years before it (the drivers recorded for the window years stand in for
// a scenario, since they were the expectations available at the time), and
// the absolute errors accumulate. The performance index of a form is the
// window-averaged sum of absolute errors over the window years; the form
// with the smallest index is registered for the feeder, ties favouring
// interval, then whole-window, then year-by-year recursion.

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "feedercast/csv.hpp"
#include "feedercast/domain.hpp"
#include "feedercast/seqdata.hpp"

namespace feedercast::selector {

struct PerformanceIndex {
  double recursive = std::numeric_limits<double>::quiet_NaN();
  double interval = std::numeric_limits<double>::quiet_NaN();
  double multiyear = std::numeric_limits<double>::quiet_NaN();
  int windows = 0;

  double of(seqdata::Config c) const {
    switch (c) {
      case seqdata::Config::recursive: return recursive;
      case seqdata::Config::interval: return interval;
      case seqdata::Config::multiyear: return multiyear;
    }
    throw std::invalid_argument("PerformanceIndex: unknown configuration");
  }
};

// Absolute-error totals, poolable across seasons before averaging.
struct WindowErrors {
  double recursive = 0, interval = 0, multiyear = 0;
  int windows = 0;

  WindowErrors& operator+=(const WindowErrors& o) {
    recursive += o.recursive;
    interval += o.interval;
    multiyear += o.multiyear;
    windows += o.windows;
    return *this;
  }

  PerformanceIndex index() const {
    if (windows < 1) throw std::logic_error("WindowErrors: no windows accumulated");
    PerformanceIndex p;
    p.recursive = recursive / windows;
    p.interval = interval / windows;
    p.multiyear = multiyear / windows;
    p.windows = windows;
    return p;
  }
};

// History cut after `last_actual`, with the following `horizon` years kept
// only as driver expectations (peaks blanked out).
inline domain::FeederHistory truncate_with_drivers(const domain::FeederHistory& h,
                                                   int last_actual, int horizon) {
  if (!h.has_year(last_actual) || !h.has_year(last_actual + horizon))
    throw std::invalid_argument("truncate_with_drivers: window exceeds history of feeder " +
                                h.feeder_id);
  domain::FeederHistory out;
  out.feeder_id = h.feeder_id;
  out.season = h.season;
  for (int y = h.first_year(); y <= last_actual + horizon; ++y) {
    domain::FeederYearRecord r = h.at_year(y);
    if (y > last_actual) {
      r.peak_demand = std::numeric_limits<double>::quiet_NaN();
      r.residential_at_peak = r.commercial_at_peak = r.industrial_at_peak = 0;
    }
    out.records.push_back(r);
  }
  return out;
}

// Slide the window over one feeder-season history. `forecast` is invoked as
//   forecast(config, extended_history, last_actual_year, window_years)
// and must return (year, amperes) pairs covering the window; it sees only
// pre-window peaks. The first window starts t_in years into the history so
// every form has a full input context.
template <class ForecastFn>
WindowErrors window_errors(const domain::FeederHistory& feeder, int window_years, int t_in,
                           ForecastFn&& forecast) {
  if (window_years < 1) throw std::invalid_argument("window_errors: window must be >= 1 year");
  if (t_in < 1) throw std::invalid_argument("window_errors: t_in must be >= 1");
  if (feeder.empty()) throw std::invalid_argument("window_errors: empty history");
  const int first_start = feeder.first_year() + t_in;
  const int last_start = feeder.last_year() - window_years + 1;
  if (last_start < first_start)
    throw std::invalid_argument("window_errors: feeder " + feeder.feeder_id + " has only " +
                                std::to_string(feeder.last_year() - feeder.first_year() + 1) +
                                " training years, not enough for a " +
                                std::to_string(window_years) + "-year window");
  WindowErrors totals;
  for (int start = first_start; start <= last_start; ++start) {
    domain::FeederHistory cut = truncate_with_drivers(feeder, start - 1, window_years);
    for (seqdata::Config config :
         {seqdata::Config::recursive, seqdata::Config::interval, seqdata::Config::multiyear}) {
      auto series = forecast(config, cut, start - 1, window_years);
      if (static_cast<int>(series.size()) != window_years)
        throw std::logic_error("window_errors: forecast did not cover the window");
      double err = 0;
      for (const auto& [year, amps] : series) err += std::abs(feeder.peak(year) - amps);
      switch (config) {
        case seqdata::Config::recursive: totals.recursive += err; break;
        case seqdata::Config::interval: totals.interval += err; break;
        case seqdata::Config::multiyear: totals.multiyear += err; break;
      }
    }
    ++totals.windows;
  }
  return totals;
}

// Smallest index wins; ties within the tolerance go interval, whole-window,
// then recursive.
inline seqdata::Config pick_best(const PerformanceIndex& p, double tolerance = 1e-9) {
  const double best = std::min({p.recursive, p.interval, p.multiyear});
  if (std::isnan(best)) throw std::invalid_argument("pick_best: incomplete performance index");
  if (p.interval <= best + tolerance) return seqdata::Config::interval;
  if (p.multiyear <= best + tolerance) return seqdata::Config::multiyear;
  return seqdata::Config::recursive;
}

struct FeederSelection {
  std::string feeder_id;
  seqdata::Config selected = seqdata::Config::recursive;
  double p_recursive = 0, p_interval = 0, p_multiyear = 0;
  int windows = 0;
};

using Registry = std::map<std::string, FeederSelection>;

inline FeederSelection select_feeder(const std::string& feeder_id, const PerformanceIndex& p) {
  FeederSelection s;
  s.feeder_id = feeder_id;
  s.selected = pick_best(p);
  s.p_recursive = p.recursive;
  s.p_interval = p.interval;
  s.p_multiyear = p.multiyear;
  s.windows = p.windows;
  if (p.of(s.selected) > std::min({p.recursive, p.interval, p.multiyear}) + 1e-9)
    throw std::logic_error("select_feeder: registered form does not have the smallest index");
  return s;
}

inline const FeederSelection& selection_for(const Registry& reg, const std::string& feeder_id) {
  auto it = reg.find(feeder_id);
  if (it == reg.end())
    throw std::invalid_argument("no registered configuration for feeder " + feeder_id);
  return it->second;
}

// Share of feeders registered to each form, for reporting.
inline std::map<seqdata::Config, double> config_shares(const Registry& reg) {
  std::map<seqdata::Config, double> shares{{seqdata::Config::recursive, 0.0},
                                           {seqdata::Config::interval, 0.0},
                                           {seqdata::Config::multiyear, 0.0}};
  if (reg.empty()) return shares;
  for (const auto& [id, sel] : reg) shares[sel.selected] += 1.0;
  for (auto& [config, share] : shares) share /= static_cast<double>(reg.size());
  return shares;
}

// ---------------------------------------------------------------------------
// Registry file format.

inline void write_registry_csv(const std::string& path, const Registry& reg) {
  csv::Writer w({"feeder_id", "selected_config", "p_recursive", "p_interval", "p_multiyear",
                 "windows"});
  for (const auto& [id, s] : reg)
    w.add_row({s.feeder_id, seqdata::config_name(s.selected), csv::format_double(s.p_recursive),
               csv::format_double(s.p_interval), csv::format_double(s.p_multiyear),
               std::to_string(s.windows)});
  w.write(path);
}

inline Registry load_registry(const std::string& path) {
  csv::Table t = csv::read_file(path);
  for (const char* col : {"feeder_id", "selected_config", "p_recursive", "p_interval",
                          "p_multiyear", "windows"})
    if (!t.has_column(col))
      throw std::runtime_error(path + ": missing column " + col);
  Registry reg;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = path + " line " + std::to_string(csv::Table::line_of_row(i));
    FeederSelection s;
    s.feeder_id = row[t.column("feeder_id")];
    const std::string& config = row[t.column("selected_config")];
    if (!seqdata::parse_config(config, s.selected))
      throw std::runtime_error(where + ": unknown configuration '" + config + "'");
    auto need_double = [&](const char* col, double& out) {
      if (!csv::parse_double(row[t.column(col)], out))
        throw std::runtime_error(where + ": non-numeric " + col + " '" + row[t.column(col)] + "'");
    };
    need_double("p_recursive", s.p_recursive);
    need_double("p_interval", s.p_interval);
    need_double("p_multiyear", s.p_multiyear);
    long long w = 0;
    if (!csv::parse_int(row[t.column("windows")], w) || w < 1)
      throw std::runtime_error(where + ": bad windows '" + row[t.column("windows")] + "'");
    s.windows = static_cast<int>(w);
    if (reg.count(s.feeder_id))
      throw std::runtime_error(path + ": duplicate feeder " + s.feeder_id);
    reg.emplace(s.feeder_id, s);
  }
  return reg;
}

}  // namespace feedercast::selector
