#pragma once

// Seeded generator of a synthetic planning area. Area indicators follow two
// autoregressive latent factors (economy, demographics); each feeder's load
// level responds to the factors through its customer composition, absorbs
// manual net-load-change events, and is observed per season with a weather
// anomaly response. Feeder families plant distinct dynamics -- driver-following
// growth, event-driven swings, saturation with unreliable change records -- so
// per-family model behaviour can be verified against known labels. The two
// event-carrying families share one composition center on purpose: models
// pooled over that blob must learn a compromise event response, which is what
// separates the sequential forms on those feeders. Generation is a pure
// function of the spec.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "feedercast/csv.hpp"
#include "feedercast/domain.hpp"
#include "feedercast/rng.hpp"

namespace feedercast::synthetic {

// Growth sensitivity of each customer type: residential load follows the
// demographic factor, commercial and industrial load follow the economic
// factor (industrial most strongly).
struct TypeResponse {
  double residential = 0.9;
  double commercial = 0.8;
  double industrial = 1.8;
};

struct FamilyProfile {
  std::string name;  // label emitted for validation
  int count = 0;

  // composition center in (residential, commercial) share space
  double res_share = 0.33;
  double com_share = 0.33;
  double spread = 0.03;  // per-axis share jitter sd

  // level dynamics
  double driver_gain = 1.0;    // scales the composition-weighted factor response
  double curve = 0.0;          // quadratic term on the factor response
  double trend = 0.0;          // deterministic relative growth per year
  double momentum = 0.0;       // carry-over of last year's organic load change
  double weather_gain = 0.0;   // observed-peak response per deg C of anomaly
  double noise_sd = 0.002;     // relative level noise per year
  double event_rate = 0.0;     // net-load-change events per year
  double event_rate_far = -1;  // rate past the first forecast year (-1 = event_rate)
  double event_min = 0.0;      // |event| range in amperes
  double event_max = 0.0;
  double event_up_prob = 0.6;
  double event_realization = 1.0;  // fraction of a recorded event realized in load
  double reversion = 0.0;          // yearly pull toward the capacity level (0 = off)
  double cap_gain = 0.0;           // capacity = cap_gain * initial level (0 = off)
};

struct SyntheticSpec {
  std::uint64_t seed = 1;
  int first_year = 2001;
  int years = 20;   // emitted history length
  int horizon = 3;  // held-out future with true peaks
  int t_in = 3;     // model input window the data must support
  std::vector<FamilyProfile> families;
  TypeResponse response;
  double transfer_rate = 0.0;  // expected transfer events per feeder over the history
  double init_level_min = 250, init_level_max = 650;
  double winter_ratio_min = 0.80, winter_ratio_max = 1.05;

  int n_feeders() const {
    int n = 0;
    for (const auto& f : families) n += f.count;
    return n;
  }

  void validate() const {
    if (families.empty()) throw std::invalid_argument("spec: no feeder families");
    if (n_feeders() < 1 || n_feeders() > 9999)
      throw std::invalid_argument("spec: feeder count out of range");
    if (horizon < 1 || t_in < 1) throw std::invalid_argument("spec: horizon and t_in must be >= 1");
    if (years < 2 * horizon + t_in + 2)
      throw std::invalid_argument("spec: need at least " + std::to_string(2 * horizon + t_in + 2) +
                                  " history years, got " + std::to_string(years));
    for (const auto& f : families) {
      if (f.count < 1) throw std::invalid_argument("spec: family " + f.name + " is empty");
      if (f.res_share < 0.02 || f.com_share < 0.02 || f.res_share + f.com_share > 0.96)
        throw std::invalid_argument("spec: family " + f.name + " center is not a valid share mix");
      if (f.spread < 0 || f.noise_sd < 0 || f.curve < 0 || std::abs(f.trend) > 0.2 ||
          f.momentum < 0 || f.momentum > 0.6 || f.event_rate < 0 || f.event_rate > 1 ||
          (f.event_rate_far != -1 && (f.event_rate_far < 0 || f.event_rate_far > 1)) ||
          f.event_min < 0 || f.event_max < f.event_min || f.event_up_prob < 0 ||
          f.event_up_prob > 1 || f.event_realization < 0 || f.reversion < 0 ||
          f.reversion >= 1 || f.cap_gain < 0)
        throw std::invalid_argument("spec: family " + f.name + " has invalid dynamics");
    }
    if (transfer_rate < 0) throw std::invalid_argument("spec: negative transfer rate");
    if (transfer_rate > 0) {
      if (years < 12)
        throw std::invalid_argument("spec: transfers need at least 12 history years");
      for (const auto& f : families)
        if (f.count < 2)
          throw std::invalid_argument("spec: transfers need at least 2 feeders per family");
    }
    if (init_level_min <= 0 || init_level_max < init_level_min)
      throw std::invalid_argument("spec: invalid initial level range");
    if (winter_ratio_min <= 0 || winter_ratio_max < winter_ratio_min)
      throw std::invalid_argument("spec: invalid winter ratio range");
  }
};

struct FeederLabel {
  std::string feeder_id;
  std::string family;
  int family_index = 0;
};

struct SyntheticData {
  std::vector<domain::FeederHistory> feeders;  // history years; per feeder: summer, winter
  domain::AreaHistory area;                    // history years
  std::vector<domain::LoadTransferEvent> transfers;
  domain::ScenarioInput scenario;  // horizon-year area features and feeder changes
  domain::TruthMap truth;          // horizon-year actual peaks
  std::vector<FeederLabel> labels;
};

namespace detail {

inline std::string feeder_id_of(int index) {
  std::string id = std::to_string(index + 1);
  return std::string(4 - std::min<std::size_t>(4, id.size()), '0') + id;
}

// AR(1) path with a fixed warm-up so the start is near-stationary.
inline std::vector<double> ar1_path(rng::Stream& stream, int n, double rho, double noise_sd) {
  double x = 0;
  for (int i = 0; i < 8; ++i) x = rho * x + noise_sd * stream.gaussian();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) {
    x = rho * x + noise_sd * stream.gaussian();
    v = x;
  }
  return out;
}

struct AreaPath {
  std::vector<double> econ, demo;            // latent factors per year
  std::vector<domain::AreaYearFeatures> years;  // indicators + anomalies per year
};

inline AreaPath build_area(const SyntheticSpec& spec, int total_years) {
  AreaPath path;
  rng::Stream econ(rng::derive(spec.seed, "area", "econ"));
  rng::Stream demo(rng::derive(spec.seed, "area", "demo"));
  path.econ = ar1_path(econ, total_years, 0.7, 0.30);
  path.demo = ar1_path(demo, total_years, 0.8, 0.25);

  // Seasonal extremes need a lead-in window before the first anomaly.
  constexpr int anomaly_window = 10;
  rng::Stream summer(rng::derive(spec.seed, "area", "summer"));
  rng::Stream winter(rng::derive(spec.seed, "area", "winter"));
  std::vector<double> tmax, tmin;
  for (int i = 0; i < total_years + anomaly_window; ++i) {
    tmax.push_back(summer.gaussian(29.0, 1.6));
    tmin.push_back(winter.gaussian(-24.0, 2.2));
  }
  std::vector<double> etaa_s = domain::compute_etaa(tmax, domain::Season::summer, anomaly_window);
  std::vector<double> etaa_w = domain::compute_etaa(tmin, domain::Season::winter, anomaly_window);

  rng::Stream ind(rng::derive(spec.seed, "area", "indicators"));
  for (int t = 0; t < total_years; ++t) {
    const double g = path.econ[static_cast<std::size_t>(t)];
    const double d = path.demo[static_cast<std::size_t>(t)];
    domain::AreaYearFeatures f;
    f.year = spec.first_year + t;
    f.gdp_growth = 2.5 + 1.8 * g + 0.3 * d + 0.10 * ind.gaussian();
    f.employment_growth = 1.2 + 1.1 * g + 0.5 * d + 0.10 * ind.gaussian();
    f.industrial_production_index = 105 + 9.0 * g + 1.5 * d + 0.60 * ind.gaussian();
    f.commodity_price = 70 + 12.0 * g - 2.5 * d + 1.20 * ind.gaussian();
    f.population_growth = 1.4 + 0.3 * g + 1.2 * d + 0.06 * ind.gaussian();
    f.net_migration = 5000 + 700 * g + 2600 * d + 160 * ind.gaussian();
    f.housing_starts = 1800 + 250 * g + 520 * d + 70 * ind.gaussian();
    f.etaa_summer = etaa_s[static_cast<std::size_t>(t)];
    f.etaa_winter = etaa_w[static_cast<std::size_t>(t)];
    path.years.push_back(f);
  }
  return path;
}

// Everything random about one feeder, drawn up front from its own stream so
// the coupling pass below stays deterministic and order-independent.
struct FeederTape {
  std::string id;
  int family_index = 0;
  const FamilyProfile* profile = nullptr;
  double res = 0, com = 0;
  double level0 = 0, winter_ratio = 1, cap = 0;
  std::vector<double> mcnlc;  // recorded events per year, [0] = 0
  std::vector<double> noise;  // standard normals per year, [0] unused
};

inline FeederTape draw_tape(const SyntheticSpec& spec, int index, int family_index,
                            const FamilyProfile& prof, int total_years) {
  rng::Stream stream(rng::derive(spec.seed, "feeder", static_cast<std::uint64_t>(index)));
  FeederTape tape;
  tape.id = feeder_id_of(index);
  tape.family_index = family_index;
  tape.profile = &prof;
  tape.res = std::clamp(prof.res_share + prof.spread * stream.gaussian(), 0.02, 0.94);
  tape.com = std::clamp(prof.com_share + prof.spread * stream.gaussian(), 0.02, 0.96 - tape.res);
  tape.level0 = stream.uniform(spec.init_level_min, spec.init_level_max);
  tape.winter_ratio = stream.uniform(spec.winter_ratio_min, spec.winter_ratio_max);
  tape.cap = prof.cap_gain > 0 ? prof.cap_gain * tape.level0 : 0;
  tape.mcnlc.assign(static_cast<std::size_t>(total_years), 0.0);
  tape.noise.assign(static_cast<std::size_t>(total_years), 0.0);
  for (int t = 1; t < total_years; ++t) {
    // past the first forecast year the change pipeline may thin out
    const double rate =
        t > spec.years && prof.event_rate_far >= 0 ? prof.event_rate_far : prof.event_rate;
    if (rate > 0 && stream.bernoulli(rate)) {
      double magnitude = stream.uniform(prof.event_min, prof.event_max);
      if (!stream.bernoulli(prof.event_up_prob)) magnitude = -magnitude;
      tape.mcnlc[static_cast<std::size_t>(t)] = magnitude;
    }
    tape.noise[static_cast<std::size_t>(t)] = stream.gaussian();
  }
  return tape;
}

struct PlannedTransfer {
  int t = 0;  // year offset from first_year
  int from = 0, to = 0;
  double fraction = 0;
};

inline std::vector<PlannedTransfer> plan_transfers(const SyntheticSpec& spec,
                                                   const std::vector<FeederTape>& tapes) {
  const int n_events = static_cast<int>(std::llround(spec.transfer_rate * spec.n_feeders()));
  std::vector<PlannedTransfer> plans;
  if (n_events == 0) return plans;
  rng::Stream stream(rng::derive(spec.seed, "transfers"));
  std::set<std::tuple<int, int, int>> used;
  while (static_cast<int>(plans.size()) < n_events) {
    PlannedTransfer p;
    p.t = 4 + static_cast<int>(stream.index(static_cast<std::size_t>(spec.years - 8)));
    p.from = static_cast<int>(stream.index(static_cast<std::size_t>(spec.n_feeders())));
    // keep the counterpart in the same family so families stay pure
    const int family = tapes[static_cast<std::size_t>(p.from)].family_index;
    do {
      p.to = static_cast<int>(stream.index(static_cast<std::size_t>(spec.n_feeders())));
    } while (p.to == p.from || tapes[static_cast<std::size_t>(p.to)].family_index != family);
    p.fraction = stream.uniform(0.2, 0.4);
    if (!used.insert({p.t, p.from, p.to}).second) continue;
    plans.push_back(p);
  }
  return plans;
}

}  // namespace detail

inline SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  const int total_years = spec.years + spec.horizon;
  detail::AreaPath area = detail::build_area(spec, total_years);

  std::vector<detail::FeederTape> tapes;
  tapes.reserve(static_cast<std::size_t>(spec.n_feeders()));
  int family_index = 0;
  for (const auto& prof : spec.families) {
    for (int j = 0; j < prof.count; ++j)
      tapes.push_back(detail::draw_tape(spec, static_cast<int>(tapes.size()), family_index, prof,
                                        total_years));
    ++family_index;
  }
  std::vector<detail::PlannedTransfer> plans = detail::plan_transfers(spec, tapes);

  // Synchronous level recursion with transfer coupling. All randomness lives
  // in the tapes, so the year-by-year order is the only one that matters.
  // Momentum feeds on the organic year-over-year change only; transfer jumps
  // are excluded so a relocation does not masquerade as a growth wave.
  const std::size_t n = tapes.size();
  std::vector<std::vector<double>> levels(n, std::vector<double>(static_cast<std::size_t>(total_years)));
  std::vector<double> caps(n), organic(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    levels[i][0] = tapes[i].level0;
    caps[i] = tapes[i].cap;
  }
  for (int t = 1; t < total_years; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const detail::FeederTape& tape = tapes[i];
      const FamilyProfile& prof = *tape.profile;
      const double ind_share = 1.0 - tape.res - tape.com;
      const double mix =
          tape.res * spec.response.residential * area.demo[static_cast<std::size_t>(t)] +
          tape.com * spec.response.commercial * area.econ[static_cast<std::size_t>(t)] +
          ind_share * spec.response.industrial * area.econ[static_cast<std::size_t>(t)];
      const double growth =
          prof.driver_gain * 0.01 * (mix + prof.curve * mix * mix) + prof.trend;
      const double base = levels[i][static_cast<std::size_t>(t - 1)];
      double level = base * (1.0 + growth) + prof.momentum * organic[i];
      level += prof.event_realization * tape.mcnlc[static_cast<std::size_t>(t)];
      if (prof.reversion > 0 && caps[i] > 0)
        level = caps[i] + prof.reversion * (level - caps[i]);
      level *= 1.0 + prof.noise_sd * tape.noise[static_cast<std::size_t>(t)];
      level = std::max(level, 25.0);
      levels[i][static_cast<std::size_t>(t)] = level;
      organic[i] = level - base;
    }
    for (const auto& p : plans) {
      if (p.t != t) continue;
      const std::size_t from = static_cast<std::size_t>(p.from);
      const std::size_t to = static_cast<std::size_t>(p.to);
      const double delta = p.fraction * levels[from][static_cast<std::size_t>(t)];
      levels[from][static_cast<std::size_t>(t)] -= delta;
      levels[to][static_cast<std::size_t>(t)] += delta;
      // transferred load permanently occupies (frees) feeder capacity
      if (caps[from] > 0) caps[from] = std::max(caps[from] - delta, 25.0);
      if (caps[to] > 0) caps[to] += delta;
    }
  }

  SyntheticData data;
  data.area.years.assign(area.years.begin(), area.years.begin() + spec.years);
  data.scenario.area_years.assign(area.years.begin() + spec.years, area.years.end());

  for (const auto& p : plans) {
    for (domain::Season season : {domain::Season::summer, domain::Season::winter})
      data.transfers.push_back({spec.first_year + p.t, tapes[static_cast<std::size_t>(p.from)].id,
                                tapes[static_cast<std::size_t>(p.to)].id, season});
  }

  for (std::size_t i = 0; i < n; ++i) {
    const detail::FeederTape& tape = tapes[i];
    const FamilyProfile& prof = *tape.profile;
    data.labels.push_back({tape.id, prof.name, tape.family_index});
    for (domain::Season season : {domain::Season::summer, domain::Season::winter}) {
      domain::FeederHistory h;
      h.feeder_id = tape.id;
      h.season = season;
      for (int t = 0; t < total_years; ++t) {
        const auto& af = area.years[static_cast<std::size_t>(t)];
        const double anomaly =
            season == domain::Season::summer ? af.etaa_summer : af.etaa_winter;
        const double ratio = season == domain::Season::summer ? 1.0 : tape.winter_ratio;
        domain::FeederYearRecord r;
        r.feeder_id = tape.id;
        r.year = spec.first_year + t;
        r.season = season;
        r.peak_demand =
            levels[i][static_cast<std::size_t>(t)] * ratio * (1.0 + prof.weather_gain * anomaly);
        r.residential_at_peak = tape.res * r.peak_demand;
        r.commercial_at_peak = tape.com * r.peak_demand;
        r.industrial_at_peak = r.peak_demand - r.residential_at_peak - r.commercial_at_peak;
        r.mcnlc = tape.mcnlc[static_cast<std::size_t>(t)];
        r.der_ev = 0;
        if (t < spec.years) {
          h.records.push_back(r);
        } else {
          data.truth[{tape.id, season, r.year}] = r.peak_demand;
        }
      }
      data.feeders.push_back(std::move(h));
    }
    for (int t = spec.years; t < total_years; ++t)
      data.scenario.feeder_changes[{tape.id, spec.first_year + t}] = {
          tape.mcnlc[static_cast<std::size_t>(t)], 0.0};
  }
  return data;
}

// ---------------------------------------------------------------------------
// Presets.

// Three families whose dynamics favour different sequential forms.
//
// smooth: growth is fully carried by announced signals -- a deterministic
// trend, a strong (and partly quadratic) response to the area factors, and a
// large weather response. Walking the window year by year keeps the whole
// feature path; summing features over the jump years loses the quadratic
// part, and ignoring later-year features loses the weather.
//
// eventful: announced load changes that do materialize and echo forward
// (momentum), on top of permanent surprise level shocks. Walking the window
// recursively feeds predictions back through the momentum dynamics, so
// one-step errors amplify; direct forms anchor on actual peaks. Changes are
// only announced about a year ahead, so the far end of a forecast window
// carries few records for this family.
//
// saturated: flat feeders whose frequent change records barely materialize.
// It shares the eventful composition center, so pooled models learn a
// compromise event response and chase these phantoms whenever later-year
// records are in the features; the whole-window form never sees them.
inline SyntheticSpec default_spec(std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.years = 20;
  spec.horizon = 3;
  spec.transfer_rate = 0.03;

  FamilyProfile smooth;
  smooth.name = "smooth";
  smooth.count = 30;
  smooth.res_share = 0.30;
  smooth.com_share = 0.35;
  smooth.driver_gain = 3.0;
  smooth.curve = 1.2;
  smooth.trend = 0.030;
  smooth.weather_gain = 0.045;
  smooth.noise_sd = 0.002;

  FamilyProfile eventful;
  eventful.name = "eventful";
  eventful.count = 18;
  eventful.res_share = 0.20;
  eventful.com_share = 0.46;
  eventful.driver_gain = 1.5;
  eventful.momentum = 0.35;
  eventful.weather_gain = 0.005;
  eventful.noise_sd = 0.012;
  eventful.event_rate = 0.35;
  eventful.event_rate_far = 0.08;
  eventful.event_min = 12;
  eventful.event_max = 26;
  eventful.event_realization = 1.0;

  FamilyProfile saturated;
  saturated.name = "saturated";
  saturated.count = 18;
  saturated.res_share = 0.20;
  saturated.com_share = 0.46;
  saturated.driver_gain = 0.15;
  saturated.weather_gain = 0.002;
  saturated.noise_sd = 0.012;
  saturated.event_rate = 0.50;
  saturated.event_min = 10;
  saturated.event_max = 20;
  saturated.event_up_prob = 0.6;
  saturated.event_realization = 0.2;
  saturated.reversion = 0.55;
  saturated.cap_gain = 1.04;

  spec.families = {smooth, eventful, saturated};
  return spec;
}

// 300 feeders in four tight composition blobs with bland dynamics; exercises
// cluster-count recovery on a known layout.
inline SyntheticSpec clustering_benchmark_spec(std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.years = 12;
  spec.horizon = 3;
  spec.transfer_rate = 0;
  const double shares[4][2] = {{0.77, 0.15}, {0.30, 0.48}, {0.21, 0.19}, {0.27, 0.31}};
  for (int b = 0; b < 4; ++b) {
    FamilyProfile f;
    f.name = "blob" + std::to_string(b + 1);
    f.count = 75;
    f.res_share = shares[b][0];
    f.com_share = shares[b][1];
    f.spread = 0.008;
    f.driver_gain = 0.5;
    f.noise_sd = 0.003;
    spec.families.push_back(f);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Dataset directory.

inline void write_labels_csv(const std::string& path, const std::vector<FeederLabel>& labels) {
  csv::Writer w({"feeder_id", "family", "family_index"});
  for (const auto& l : labels)
    w.add_row({l.feeder_id, l.family, std::to_string(l.family_index)});
  w.write(path);
}

inline std::vector<FeederLabel> load_labels(const std::string& path) {
  csv::Table t = csv::read_file(path);
  for (const char* col : {"feeder_id", "family", "family_index"})
    if (!t.has_column(col)) throw std::runtime_error(path + ": missing column " + col);
  std::vector<FeederLabel> labels;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    FeederLabel l;
    l.feeder_id = t.rows[i][t.column("feeder_id")];
    l.family = t.rows[i][t.column("family")];
    long long idx = 0;
    if (!csv::parse_int(t.rows[i][t.column("family_index")], idx))
      throw std::runtime_error(path + " line " + std::to_string(csv::Table::line_of_row(i)) +
                               ": bad family_index");
    l.family_index = static_cast<int>(idx);
    labels.push_back(std::move(l));
  }
  return labels;
}

inline void write_dataset(const std::string& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  auto at = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
  domain::write_feeders_csv(at("feeders.csv"), data.feeders);
  domain::write_area_csv(at("area.csv"), data.area);
  domain::write_transfers_csv(at("transfers.csv"), data.transfers);
  domain::write_scenario_csv(at("scenario.csv"), data.scenario);
  domain::write_truth_csv(at("truth.csv"), data.truth);
  write_labels_csv(at("labels.csv"), data.labels);
}

}  // namespace feedercast::synthetic
