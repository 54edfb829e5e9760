#pragma once

// Core domain types and file ingestion: per-feeder seasonal peak histories,
// area-level economic/demographic features, load transfer events, and
// forward scenarios. Loaders validate aggressively and report every bad row
// with its file line number instead of dropping rows silently.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "feedercast/csv.hpp"

namespace feedercast::domain {

enum class Season { summer, winter };

inline std::string season_name(Season s) { return s == Season::summer ? "summer" : "winter"; }

inline bool parse_season(std::string_view text, Season& out) {
  if (text == "summer") {
    out = Season::summer;
    return true;
  }
  if (text == "winter") {
    out = Season::winter;
    return true;
  }
  return false;
}

// One feeder-season-year observation, all load quantities in amperes.
struct FeederYearRecord {
  std::string feeder_id;
  int year = 0;
  Season season = Season::summer;
  double peak_demand = 0;        // seasonal peak demand
  double residential_at_peak = 0;
  double commercial_at_peak = 0;
  double industrial_at_peak = 0;
  double mcnlc = 0;              // manual customer/net-load change, signed
  double der_ev = 0;             // DER/EV adjustment, signed
};

// Consecutive-year history of one feeder in one season.
struct FeederHistory {
  std::string feeder_id;
  Season season = Season::summer;
  std::vector<FeederYearRecord> records;  // ascending, consecutive years

  bool empty() const { return records.empty(); }
  int first_year() const { return records.front().year; }
  int last_year() const { return records.back().year; }
  int n_years() const { return static_cast<int>(records.size()); }

  bool has_year(int year) const {
    return !records.empty() && year >= first_year() && year <= last_year();
  }

  const FeederYearRecord& at_year(int year) const {
    if (!has_year(year))
      throw std::invalid_argument("feeder " + feeder_id + " has no record for year " +
                                  std::to_string(year));
    return records[static_cast<std::size_t>(year - first_year())];
  }

  FeederYearRecord& at_year(int year) {
    return const_cast<FeederYearRecord&>(std::as_const(*this).at_year(year));
  }

  double peak(int year) const { return at_year(year).peak_demand; }
};

// Area-level features for one year. The seven economic/demographic fields
// feed the principal component transform; the two anomaly fields are
// seasonal extreme-temperature deviations in degrees Celsius.
struct AreaYearFeatures {
  int year = 0;
  double gdp_growth = 0;        // percent
  double employment_growth = 0; // percent
  double industrial_production_index = 0;
  double commodity_price = 0;
  double population_growth = 0; // percent
  double net_migration = 0;
  double housing_starts = 0;
  double etaa_summer = 0;       // deg C anomaly of summer max temperature
  double etaa_winter = 0;       // deg C anomaly, positive = colder winter

  static constexpr int economic_count = 7;

  std::array<double, economic_count> economic() const {
    return {gdp_growth,        employment_growth, industrial_production_index,
            commodity_price,   population_growth, net_migration,
            housing_starts};
  }

  double etaa(Season s) const { return s == Season::summer ? etaa_summer : etaa_winter; }
};

struct AreaHistory {
  std::vector<AreaYearFeatures> years;  // ascending, consecutive

  bool empty() const { return years.empty(); }
  int first_year() const { return years.front().year; }
  int last_year() const { return years.back().year; }

  bool has_year(int year) const {
    return !years.empty() && year >= first_year() && year <= last_year();
  }

  const AreaYearFeatures& at_year(int year) const {
    if (!has_year(year))
      throw std::invalid_argument("area history has no record for year " + std::to_string(year));
    return years[static_cast<std::size_t>(year - first_year())];
  }
};

struct LoadTransferEvent {
  int year = 0;
  std::string from_feeder;
  std::string to_feeder;
  Season season = Season::summer;
};

// Forward inputs for the forecast horizon: area features for future years
// plus per-feeder expected load changes keyed by (feeder, year).
struct ScenarioInput {
  std::vector<AreaYearFeatures> area_years;  // ascending, consecutive
  struct Changes {
    double mcnlc = 0;
    double der_ev = 0;
  };
  std::map<std::pair<std::string, int>, Changes> feeder_changes;

  bool covers(const std::string& feeder_id, int year) const {
    return feeder_changes.count({feeder_id, year}) != 0;
  }

  const Changes& changes(const std::string& feeder_id, int year) const {
    auto it = feeder_changes.find({feeder_id, year});
    if (it == feeder_changes.end())
      throw std::invalid_argument("scenario missing feeder " + feeder_id + " year " +
                                  std::to_string(year));
    return it->second;
  }
};

struct IngestError {
  std::size_t line = 0;  // 1-based file line (header is line 1)
  std::string message;
};

inline std::string format_errors(const std::vector<IngestError>& errors) {
  std::string out;
  for (const auto& e : errors) {
    out += "line " + std::to_string(e.line) + ": " + e.message + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extreme temperature adjusted anomaly.
//
// `extremes[i]` is the seasonal extreme temperature (summer max or winter min)
// of consecutive years. For every year with at least `window` preceding years
// the anomaly is the deviation of that year's extreme from the mean extreme of
// the `window` years before it. Winter values are negated so that a
// colder-than-usual winter yields a positive anomaly (more heating demand).
// Returns one value per evaluated year, i.e. extremes.size() - window values.
inline std::vector<double> compute_etaa(const std::vector<double>& extremes, Season season,
                                        int window = 10) {
  if (window < 1) throw std::invalid_argument("etaa window must be >= 1");
  if (static_cast<int>(extremes.size()) <= window)
    throw std::invalid_argument("etaa needs more than " + std::to_string(window) + " years");
  std::vector<double> out;
  out.reserve(extremes.size() - static_cast<std::size_t>(window));
  for (std::size_t i = static_cast<std::size_t>(window); i < extremes.size(); ++i) {
    double mean = 0;
    for (std::size_t j = i - static_cast<std::size_t>(window); j < i; ++j) mean += extremes[j];
    mean /= window;
    double dev = extremes[i] - mean;
    out.push_back(season == Season::winter ? -dev : dev);
  }
  return out;
}

// ---------------------------------------------------------------------------
// feeders.csv

inline const std::vector<std::string>& feeders_columns() {
  static const std::vector<std::string> cols = {
      "feeder_id", "year",          "season",        "peak_demand_a", "res_at_peak_a",
      "com_at_peak_a", "ind_at_peak_a", "mcnlc_a",   "der_ev_a"};
  return cols;
}

struct FeederLoadResult {
  std::vector<FeederHistory> histories;  // sorted by (feeder_id, season)
  std::vector<IngestError> errors;
};

namespace detail {

inline bool get_double(const std::vector<std::string>& row, std::size_t col,
                       const std::string& name, std::size_t line, double& out,
                       std::vector<IngestError>& errors) {
  if (!csv::parse_double(row[col], out)) {
    errors.push_back({line, "non-numeric " + name + " '" + row[col] + "'"});
    return false;
  }
  return true;
}

inline bool get_year(const std::vector<std::string>& row, std::size_t col, std::size_t line,
                     int& out, std::vector<IngestError>& errors) {
  long long y = 0;
  if (!csv::parse_int(row[col], y) || y < 1800 || y > 3000) {
    errors.push_back({line, "bad year '" + row[col] + "'"});
    return false;
  }
  out = static_cast<int>(y);
  return true;
}

// Splits (line, record) pairs grouped per feeder-season into a consecutive
// history, reporting duplicates and anything after the first year gap.
inline void finish_history(const std::string& feeder_id, Season season,
                           std::vector<std::pair<std::size_t, FeederYearRecord>>& rows,
                           std::vector<FeederHistory>& out, std::vector<IngestError>& errors) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second.year < b.second.year; });
  FeederHistory h;
  h.feeder_id = feeder_id;
  h.season = season;
  for (auto& [line, rec] : rows) {
    if (h.records.empty()) {
      h.records.push_back(std::move(rec));
      continue;
    }
    int prev = h.records.back().year;
    if (rec.year == prev) {
      errors.push_back({line, "duplicate year " + std::to_string(rec.year) + " for feeder " +
                                  feeder_id + " (" + season_name(season) + ")"});
    } else if (rec.year != prev + 1) {
      errors.push_back({line, "year gap before " + std::to_string(rec.year) + " for feeder " +
                                  feeder_id + " (" + season_name(season) +
                                  "); history kept through " + std::to_string(prev)});
    } else {
      h.records.push_back(std::move(rec));
    }
  }
  if (!h.records.empty()) out.push_back(std::move(h));
}

}  // namespace detail

// Loads every feeder-season history in the file. Each rejected row produces
// exactly one error, so rows in == records kept + errors reported.
inline FeederLoadResult load_feeders(const std::string& path) {
  FeederLoadResult result;
  csv::Table t = csv::read_file(path);
  for (const auto& name : feeders_columns()) {
    if (!t.has_column(name)) {
      result.errors.push_back({1, "missing column '" + name + "'"});
      return result;
    }
  }
  const std::size_t c_id = t.column("feeder_id"), c_year = t.column("year"),
                    c_season = t.column("season"), c_peak = t.column("peak_demand_a"),
                    c_res = t.column("res_at_peak_a"), c_com = t.column("com_at_peak_a"),
                    c_ind = t.column("ind_at_peak_a"), c_mcnlc = t.column("mcnlc_a"),
                    c_der = t.column("der_ev_a");

  std::map<std::pair<std::string, Season>, std::vector<std::pair<std::size_t, FeederYearRecord>>>
      groups;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = csv::Table::line_of_row(i);
    if (row.size() != t.columns.size()) {
      result.errors.push_back({line, "expected " + std::to_string(t.columns.size()) +
                                         " fields, got " + std::to_string(row.size())});
      continue;
    }
    FeederYearRecord rec;
    rec.feeder_id = row[c_id];
    if (rec.feeder_id.empty()) {
      result.errors.push_back({line, "empty feeder_id"});
      continue;
    }
    if (!detail::get_year(row, c_year, line, rec.year, result.errors)) continue;
    if (!parse_season(row[c_season], rec.season)) {
      result.errors.push_back({line, "unknown season '" + row[c_season] + "'"});
      continue;
    }
    if (!detail::get_double(row, c_peak, "peak_demand_a", line, rec.peak_demand, result.errors) ||
        !detail::get_double(row, c_res, "res_at_peak_a", line, rec.residential_at_peak,
                            result.errors) ||
        !detail::get_double(row, c_com, "com_at_peak_a", line, rec.commercial_at_peak,
                            result.errors) ||
        !detail::get_double(row, c_ind, "ind_at_peak_a", line, rec.industrial_at_peak,
                            result.errors) ||
        !detail::get_double(row, c_mcnlc, "mcnlc_a", line, rec.mcnlc, result.errors) ||
        !detail::get_double(row, c_der, "der_ev_a", line, rec.der_ev, result.errors))
      continue;
    if (rec.peak_demand < 0) {
      result.errors.push_back({line, "negative peak_demand_a for feeder " + rec.feeder_id});
      continue;
    }
    if (rec.residential_at_peak < 0 || rec.commercial_at_peak < 0 || rec.industrial_at_peak < 0) {
      result.errors.push_back({line, "negative load component for feeder " + rec.feeder_id});
      continue;
    }
    const double parts =
        rec.residential_at_peak + rec.commercial_at_peak + rec.industrial_at_peak;
    if (parts > rec.peak_demand * (1.0 + 1e-6) + 1e-9) {
      result.errors.push_back(
          {line, "load components exceed peak_demand_a for feeder " + rec.feeder_id});
      continue;
    }
    groups[{rec.feeder_id, rec.season}].emplace_back(line, std::move(rec));
  }
  for (auto& [key, rows] : groups)
    detail::finish_history(key.first, key.second, rows, result.histories, result.errors);
  std::sort(result.histories.begin(), result.histories.end(),
            [](const FeederHistory& a, const FeederHistory& b) {
              return std::tie(a.feeder_id, a.season) < std::tie(b.feeder_id, b.season);
            });
  return result;
}

// Single-season view of load_feeders.
inline FeederLoadResult load_feeder_history(const std::string& path, Season season) {
  FeederLoadResult all = load_feeders(path);
  FeederLoadResult out;
  out.errors = std::move(all.errors);
  for (auto& h : all.histories)
    if (h.season == season) out.histories.push_back(std::move(h));
  return out;
}

inline void write_feeders_csv(const std::string& path, std::vector<FeederHistory> histories) {
  std::sort(histories.begin(), histories.end(),
            [](const FeederHistory& a, const FeederHistory& b) {
              return std::tie(a.feeder_id, a.season) < std::tie(b.feeder_id, b.season);
            });
  csv::Writer w(feeders_columns());
  for (const auto& h : histories) {
    for (const auto& r : h.records) {
      w.add_row({r.feeder_id, std::to_string(r.year), season_name(r.season),
                 csv::format_double(r.peak_demand), csv::format_double(r.residential_at_peak),
                 csv::format_double(r.commercial_at_peak),
                 csv::format_double(r.industrial_at_peak), csv::format_double(r.mcnlc),
                 csv::format_double(r.der_ev)});
    }
  }
  w.write(path);
}

// ---------------------------------------------------------------------------
// area.csv

inline const std::vector<std::string>& area_columns() {
  static const std::vector<std::string> cols = {
      "year",           "gdp_growth_pct", "emp_growth_pct", "ipi",
      "commodity_price", "pop_growth_pct", "net_migration",  "housing_starts",
      "etaa_summer_c",  "etaa_winter_c"};
  return cols;
}

struct AreaLoadResult {
  AreaHistory area;
  std::vector<IngestError> errors;
};

inline AreaLoadResult load_area(const std::string& path) {
  AreaLoadResult result;
  csv::Table t = csv::read_file(path);
  for (const auto& name : area_columns()) {
    if (!t.has_column(name)) {
      result.errors.push_back({1, "missing column '" + name + "'"});
      return result;
    }
  }
  std::vector<std::pair<std::size_t, AreaYearFeatures>> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = csv::Table::line_of_row(i);
    if (row.size() != t.columns.size()) {
      result.errors.push_back({line, "expected " + std::to_string(t.columns.size()) +
                                         " fields, got " + std::to_string(row.size())});
      continue;
    }
    AreaYearFeatures f;
    if (!detail::get_year(row, t.column("year"), line, f.year, result.errors)) continue;
    bool ok = detail::get_double(row, t.column("gdp_growth_pct"), "gdp_growth_pct", line,
                                 f.gdp_growth, result.errors) &&
              detail::get_double(row, t.column("emp_growth_pct"), "emp_growth_pct", line,
                                 f.employment_growth, result.errors) &&
              detail::get_double(row, t.column("ipi"), "ipi", line,
                                 f.industrial_production_index, result.errors) &&
              detail::get_double(row, t.column("commodity_price"), "commodity_price", line,
                                 f.commodity_price, result.errors) &&
              detail::get_double(row, t.column("pop_growth_pct"), "pop_growth_pct", line,
                                 f.population_growth, result.errors) &&
              detail::get_double(row, t.column("net_migration"), "net_migration", line,
                                 f.net_migration, result.errors) &&
              detail::get_double(row, t.column("housing_starts"), "housing_starts", line,
                                 f.housing_starts, result.errors) &&
              detail::get_double(row, t.column("etaa_summer_c"), "etaa_summer_c", line,
                                 f.etaa_summer, result.errors) &&
              detail::get_double(row, t.column("etaa_winter_c"), "etaa_winter_c", line,
                                 f.etaa_winter, result.errors);
    if (ok) rows.emplace_back(line, f);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second.year < b.second.year; });
  for (auto& [line, f] : rows) {
    if (result.area.years.empty()) {
      result.area.years.push_back(f);
      continue;
    }
    int prev = result.area.years.back().year;
    if (f.year == prev) {
      result.errors.push_back({line, "duplicate area year " + std::to_string(f.year)});
    } else if (f.year != prev + 1) {
      result.errors.push_back({line, "area year gap before " + std::to_string(f.year) +
                                         "; history kept through " + std::to_string(prev)});
    } else {
      result.area.years.push_back(f);
    }
  }
  return result;
}

inline void write_area_csv(const std::string& path, const AreaHistory& area) {
  csv::Writer w(area_columns());
  for (const auto& f : area.years) {
    w.add_row({std::to_string(f.year), csv::format_double(f.gdp_growth),
               csv::format_double(f.employment_growth),
               csv::format_double(f.industrial_production_index),
               csv::format_double(f.commodity_price), csv::format_double(f.population_growth),
               csv::format_double(f.net_migration), csv::format_double(f.housing_starts),
               csv::format_double(f.etaa_summer), csv::format_double(f.etaa_winter)});
  }
  w.write(path);
}

// ---------------------------------------------------------------------------
// transfers.csv

struct TransferLoadResult {
  std::vector<LoadTransferEvent> events;
  std::vector<IngestError> errors;
};

inline TransferLoadResult load_transfers(const std::string& path) {
  TransferLoadResult result;
  csv::Table t = csv::read_file(path);
  for (const char* name : {"year", "from_feeder", "to_feeder", "season"}) {
    if (!t.has_column(name)) {
      result.errors.push_back({1, std::string("missing column '") + name + "'"});
      return result;
    }
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = csv::Table::line_of_row(i);
    if (row.size() != t.columns.size()) {
      result.errors.push_back({line, "expected " + std::to_string(t.columns.size()) +
                                         " fields, got " + std::to_string(row.size())});
      continue;
    }
    LoadTransferEvent e;
    if (!detail::get_year(row, t.column("year"), line, e.year, result.errors)) continue;
    e.from_feeder = row[t.column("from_feeder")];
    e.to_feeder = row[t.column("to_feeder")];
    if (e.from_feeder.empty() || e.to_feeder.empty()) {
      result.errors.push_back({line, "empty feeder id in transfer"});
      continue;
    }
    if (e.from_feeder == e.to_feeder) {
      result.errors.push_back({line, "transfer from feeder " + e.from_feeder + " to itself"});
      continue;
    }
    if (!parse_season(row[t.column("season")], e.season)) {
      result.errors.push_back({line, "unknown season '" + row[t.column("season")] + "'"});
      continue;
    }
    result.events.push_back(std::move(e));
  }
  return result;
}

inline void write_transfers_csv(const std::string& path, std::vector<LoadTransferEvent> events) {
  std::sort(events.begin(), events.end(),
            [](const LoadTransferEvent& a, const LoadTransferEvent& b) {
              return std::tie(a.year, a.from_feeder, a.to_feeder, a.season) <
                     std::tie(b.year, b.from_feeder, b.to_feeder, b.season);
            });
  csv::Writer w({"year", "from_feeder", "to_feeder", "season"});
  for (const auto& e : events)
    w.add_row({std::to_string(e.year), e.from_feeder, e.to_feeder, season_name(e.season)});
  w.write(path);
}

// ---------------------------------------------------------------------------
// scenario.csv
//
// One file holds two row kinds. Area rows leave feeder_id empty and fill the
// area columns; feeder rows carry feeder_id, year, mcnlc_a and der_ev_a and
// leave the area columns empty.

inline const std::vector<std::string>& scenario_columns() {
  static const std::vector<std::string> cols = {
      "feeder_id",      "year",           "gdp_growth_pct", "emp_growth_pct", "ipi",
      "commodity_price", "pop_growth_pct", "net_migration",  "housing_starts",
      "etaa_summer_c",  "etaa_winter_c",  "mcnlc_a",        "der_ev_a"};
  return cols;
}

struct ScenarioLoadResult {
  ScenarioInput scenario;
  std::vector<IngestError> errors;
};

inline ScenarioLoadResult load_scenario(const std::string& path) {
  ScenarioLoadResult result;
  csv::Table t = csv::read_file(path);
  for (const auto& name : scenario_columns()) {
    if (!t.has_column(name)) {
      result.errors.push_back({1, "missing column '" + name + "'"});
      return result;
    }
  }
  std::vector<std::pair<std::size_t, AreaYearFeatures>> area_rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = csv::Table::line_of_row(i);
    if (row.size() != t.columns.size()) {
      result.errors.push_back({line, "expected " + std::to_string(t.columns.size()) +
                                         " fields, got " + std::to_string(row.size())});
      continue;
    }
    const std::string& feeder_id = row[t.column("feeder_id")];
    int year = 0;
    if (!detail::get_year(row, t.column("year"), line, year, result.errors)) continue;
    if (feeder_id.empty()) {
      AreaYearFeatures f;
      f.year = year;
      bool ok = detail::get_double(row, t.column("gdp_growth_pct"), "gdp_growth_pct", line,
                                   f.gdp_growth, result.errors) &&
                detail::get_double(row, t.column("emp_growth_pct"), "emp_growth_pct", line,
                                   f.employment_growth, result.errors) &&
                detail::get_double(row, t.column("ipi"), "ipi", line,
                                   f.industrial_production_index, result.errors) &&
                detail::get_double(row, t.column("commodity_price"), "commodity_price", line,
                                   f.commodity_price, result.errors) &&
                detail::get_double(row, t.column("pop_growth_pct"), "pop_growth_pct", line,
                                   f.population_growth, result.errors) &&
                detail::get_double(row, t.column("net_migration"), "net_migration", line,
                                   f.net_migration, result.errors) &&
                detail::get_double(row, t.column("housing_starts"), "housing_starts", line,
                                   f.housing_starts, result.errors);
      if (!ok) continue;
      // Anomaly forecasts are optional; blank means no expected deviation.
      if (!row[t.column("etaa_summer_c")].empty() &&
          !detail::get_double(row, t.column("etaa_summer_c"), "etaa_summer_c", line,
                              f.etaa_summer, result.errors))
        continue;
      if (!row[t.column("etaa_winter_c")].empty() &&
          !detail::get_double(row, t.column("etaa_winter_c"), "etaa_winter_c", line,
                              f.etaa_winter, result.errors))
        continue;
      area_rows.emplace_back(line, f);
    } else {
      ScenarioInput::Changes ch;
      if (!detail::get_double(row, t.column("mcnlc_a"), "mcnlc_a", line, ch.mcnlc,
                              result.errors))
        continue;
      if (!row[t.column("der_ev_a")].empty() &&
          !detail::get_double(row, t.column("der_ev_a"), "der_ev_a", line, ch.der_ev,
                              result.errors))
        continue;
      auto key = std::make_pair(feeder_id, year);
      if (result.scenario.feeder_changes.count(key)) {
        result.errors.push_back({line, "duplicate scenario row for feeder " + feeder_id +
                                           " year " + std::to_string(year)});
        continue;
      }
      result.scenario.feeder_changes[key] = ch;
    }
  }
  std::stable_sort(area_rows.begin(), area_rows.end(),
                   [](const auto& a, const auto& b) { return a.second.year < b.second.year; });
  for (auto& [line, f] : area_rows) {
    if (!result.scenario.area_years.empty()) {
      int prev = result.scenario.area_years.back().year;
      if (f.year == prev) {
        result.errors.push_back({line, "duplicate scenario area year " + std::to_string(f.year)});
        continue;
      }
      if (f.year != prev + 1) {
        result.errors.push_back({line, "scenario area year gap before " + std::to_string(f.year)});
        continue;
      }
    }
    result.scenario.area_years.push_back(f);
  }
  return result;
}

inline void write_scenario_csv(const std::string& path, const ScenarioInput& sc) {
  csv::Writer w(scenario_columns());
  for (const auto& f : sc.area_years) {
    w.add_row({"", std::to_string(f.year), csv::format_double(f.gdp_growth),
               csv::format_double(f.employment_growth),
               csv::format_double(f.industrial_production_index),
               csv::format_double(f.commodity_price), csv::format_double(f.population_growth),
               csv::format_double(f.net_migration), csv::format_double(f.housing_starts),
               csv::format_double(f.etaa_summer), csv::format_double(f.etaa_winter), "", ""});
  }
  for (const auto& [key, ch] : sc.feeder_changes) {
    w.add_row({key.first, std::to_string(key.second), "", "", "", "", "", "", "", "", "",
               csv::format_double(ch.mcnlc), csv::format_double(ch.der_ev)});
  }
  w.write(path);
}

// ---------------------------------------------------------------------------
// truth.csv — held-out actual peaks for evaluating horizon forecasts.

using TruthMap = std::map<std::tuple<std::string, Season, int>, double>;

struct TruthLoadResult {
  TruthMap truth;
  std::vector<IngestError> errors;
};

inline TruthLoadResult load_truth(const std::string& path) {
  TruthLoadResult result;
  csv::Table t = csv::read_file(path);
  for (const char* name : {"feeder_id", "season", "year", "peak_demand_a"}) {
    if (!t.has_column(name)) {
      result.errors.push_back({1, std::string("missing column '") + name + "'"});
      return result;
    }
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = csv::Table::line_of_row(i);
    if (row.size() != t.columns.size()) {
      result.errors.push_back({line, "expected " + std::to_string(t.columns.size()) +
                                         " fields, got " + std::to_string(row.size())});
      continue;
    }
    const std::string& id = row[t.column("feeder_id")];
    Season season;
    int year = 0;
    double peak = 0;
    if (id.empty()) {
      result.errors.push_back({line, "empty feeder_id"});
      continue;
    }
    if (!parse_season(row[t.column("season")], season)) {
      result.errors.push_back({line, "unknown season '" + row[t.column("season")] + "'"});
      continue;
    }
    if (!detail::get_year(row, t.column("year"), line, year, result.errors)) continue;
    if (!detail::get_double(row, t.column("peak_demand_a"), "peak_demand_a", line, peak,
                            result.errors))
      continue;
    result.truth[{id, season, year}] = peak;
  }
  return result;
}

inline void write_truth_csv(const std::string& path, const TruthMap& truth) {
  csv::Writer w({"feeder_id", "season", "year", "peak_demand_a"});
  for (const auto& [key, peak] : truth) {
    w.add_row({std::get<0>(key), season_name(std::get<1>(key)),
               std::to_string(std::get<2>(key)), csv::format_double(peak)});
  }
  w.write(path);
}

// ---------------------------------------------------------------------------
// Scenario extension helpers used at forecast time.

// Appends the scenario's area years to the history; the scenario must start
// exactly one year after the history ends and cover the horizon.
inline AreaHistory extend_area(const AreaHistory& area, const ScenarioInput& sc, int horizon) {
  if (area.empty()) throw std::invalid_argument("area history is empty");
  AreaHistory out = area;
  int next = area.last_year() + 1;
  for (const auto& f : sc.area_years) {
    if (f.year < next) continue;  // overlapping years already covered by history
    if (f.year != out.last_year() + 1)
      throw std::invalid_argument("scenario area years do not continue history at year " +
                                  std::to_string(f.year));
    out.years.push_back(f);
  }
  if (out.last_year() < area.last_year() + horizon)
    throw std::invalid_argument("scenario missing area year " +
                                std::to_string(out.last_year() + 1));
  return out;
}

// Extends a feeder history with placeholder rows for the horizon years.
// Future peaks start as NaN and are filled in as forecasts materialise;
// mcnlc/der_ev come from the scenario. For merged (virtual) feeders pass the
// member ids so their expected changes can be summed.
inline FeederHistory extend_with_scenario(const FeederHistory& h, const ScenarioInput& sc,
                                          int horizon,
                                          const std::vector<std::string>& members = {}) {
  if (h.empty()) throw std::invalid_argument("feeder history is empty");
  const std::vector<std::string> ids = members.empty() ? std::vector<std::string>{h.feeder_id}
                                                       : members;
  FeederHistory out = h;
  for (int f = 1; f <= horizon; ++f) {
    const int year = h.last_year() + f;
    FeederYearRecord rec;
    rec.feeder_id = h.feeder_id;
    rec.year = year;
    rec.season = h.season;
    rec.peak_demand = std::numeric_limits<double>::quiet_NaN();
    for (const auto& id : ids) {
      const auto& ch = sc.changes(id, year);  // throws naming feeder/year if absent
      rec.mcnlc += ch.mcnlc;
      rec.der_ev += ch.der_ev;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace feedercast::domain
