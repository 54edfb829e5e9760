#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "feedercast/clustering.hpp"
#include "feedercast/features.hpp"
#include "feedercast/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace feedercast;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

// Single-family spec with every stochastic influence switched off.
synthetic::SyntheticSpec still_spec(int count) {
  synthetic::SyntheticSpec spec;
  spec.seed = 3;
  spec.years = 20;
  spec.horizon = 3;
  synthetic::FamilyProfile f;
  f.name = "still";
  f.count = count;
  f.res_share = 0.4;
  f.com_share = 0.3;
  f.spread = 0;
  f.driver_gain = 0;
  f.weather_gain = 0;
  f.noise_sd = 0;
  spec.families = {f};
  spec.winter_ratio_min = spec.winter_ratio_max = 1.0;
  return spec;
}

const domain::FeederHistory& history_of(const synthetic::SyntheticData& data,
                                        const std::string& id, domain::Season season) {
  for (const auto& h : data.feeders)
    if (h.feeder_id == id && h.season == season) return h;
  throw std::runtime_error("no history for " + id);
}

}  // namespace

TEST_CASE("spec validation enforces history length and family shape") {
  synthetic::SyntheticSpec spec = synthetic::default_spec();
  REQUIRE_NOTHROW(spec.validate());
  REQUIRE(spec.n_feeders() == 66);

  SECTION("history must cover selection windows and the horizon") {
    spec.years = 8;
    REQUIRE_THROWS_WITH(spec.validate(), ContainsSubstring("at least 11"));
  }
  SECTION("share centers must be a valid mix") {
    spec.families[0].res_share = 0.9;
    spec.families[0].com_share = 0.2;
    REQUIRE_THROWS_WITH(spec.validate(), ContainsSubstring("share mix"));
  }
  SECTION("empty families are rejected") {
    spec.families[1].count = 0;
    REQUIRE_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SECTION("transfers need pairs within each family") {
    spec.families[2].count = 1;
    REQUIRE_THROWS_WITH(spec.validate(), ContainsSubstring("2 feeders per family"));
  }
}

TEST_CASE("generation is a pure function of the spec") {
  synthetic::SyntheticSpec spec = synthetic::default_spec(7);
  testsupport::TempDir dir("synthgen");
  synthetic::write_dataset(dir.file("a"), synthetic::generate(spec));
  synthetic::write_dataset(dir.file("b"), synthetic::generate(spec));
  synthetic::write_dataset(dir.file("c"), synthetic::generate(synthetic::default_spec(8)));

  bool any_differs = false;
  for (const char* name : {"feeders.csv", "area.csv", "transfers.csv", "scenario.csv",
                           "truth.csv", "labels.csv"}) {
    const std::string a = testsupport::read_text(dir.file("a") + "/" + name);
    REQUIRE(!a.empty());
    REQUIRE(a == testsupport::read_text(dir.file("b") + "/" + name));
    if (a != testsupport::read_text(dir.file("c") + "/" + name)) any_differs = true;
  }
  REQUIRE(any_differs);  // the seed actually reaches the data
}

TEST_CASE("all dynamics off yields constant histories") {
  synthetic::SyntheticData data = synthetic::generate(still_spec(3));
  REQUIRE(data.feeders.size() == 6);
  for (const auto& h : data.feeders) {
    REQUIRE(h.n_years() == 20);
    const double first = h.records.front().peak_demand;
    for (const auto& r : h.records) {
      REQUIRE(r.peak_demand == first);
      REQUIRE(r.mcnlc == 0);
      REQUIRE(r.der_ev == 0);
    }
    // the held-out horizon continues the same level
    for (int year = 2021; year <= 2023; ++year)
      REQUIRE(data.truth.at({h.feeder_id, h.season, year}) == first);
  }
}

TEST_CASE("default area dataset has coherent structure") {
  synthetic::SyntheticSpec spec = synthetic::default_spec(5);
  synthetic::SyntheticData data = synthetic::generate(spec);

  REQUIRE(data.feeders.size() == 132);
  REQUIRE(data.labels.size() == 66);
  REQUIRE(data.area.years.size() == 20);
  REQUIRE(data.area.years.front().year == 2001);
  REQUIRE(data.scenario.area_years.size() == 3);
  REQUIRE(data.scenario.area_years.front().year == 2021);
  REQUIRE(data.truth.size() == 132 * 3);

  std::map<std::string, std::string> family_of;
  for (const auto& l : data.labels) family_of[l.feeder_id] = l.family;
  REQUIRE(family_of.size() == 66);  // ids unique
  REQUIRE(family_of.count("0001") == 1);
  REQUIRE(family_of.count("0066") == 1);

  for (const auto& h : data.feeders) {
    REQUIRE(h.n_years() == 20);
    REQUIRE(h.first_year() == 2001);
    const domain::FeederHistory& summer = history_of(data, h.feeder_id, domain::Season::summer);
    for (const auto& r : h.records) {
      REQUIRE(r.peak_demand > 0);
      // composition identity (industrial is the exact complement)
      REQUIRE_THAT(r.residential_at_peak + r.commercial_at_peak + r.industrial_at_peak,
                   WithinAbs(r.peak_demand, 1e-9));
      REQUIRE(r.residential_at_peak >= 0);
      REQUIRE(r.commercial_at_peak >= 0);
      REQUIRE(r.industrial_at_peak >= 0);
      // recorded net-load changes are season-independent
      REQUIRE(r.mcnlc == summer.at_year(r.year).mcnlc);
    }
    for (int year = 2021; year <= 2023; ++year) {
      REQUIRE(data.truth.count({h.feeder_id, h.season, year}) == 1);
      REQUIRE(data.scenario.covers(h.feeder_id, year));
    }
  }

  SECTION("transfers stay inside one family and the history interior") {
    REQUIRE(data.transfers.size() == 4);  // two physical events, one row per season
    for (const auto& e : data.transfers) {
      REQUIRE(e.year >= 2005);
      REQUIRE(e.year <= 2016);
      REQUIRE(family_of.at(e.from_feeder) == family_of.at(e.to_feeder));
      REQUIRE(e.from_feeder != e.to_feeder);
    }
  }

  SECTION("written dataset loads back cleanly through the domain readers") {
    testsupport::TempDir dir("synthload");
    synthetic::write_dataset(dir.file("run"), data);
    auto feeders = domain::load_feeders(dir.file("run") + "/feeders.csv");
    REQUIRE(feeders.errors.empty());
    REQUIRE(feeders.histories.size() == 132);
    auto area = domain::load_area(dir.file("run") + "/area.csv");
    REQUIRE(area.errors.empty());
    REQUIRE(area.area.years.size() == 20);
    auto transfers = domain::load_transfers(dir.file("run") + "/transfers.csv");
    REQUIRE(transfers.errors.empty());
    REQUIRE(transfers.events.size() == 4);
    auto scenario = domain::load_scenario(dir.file("run") + "/scenario.csv");
    REQUIRE(scenario.errors.empty());
    REQUIRE(scenario.scenario.area_years.size() == 3);
    REQUIRE(scenario.scenario.feeder_changes.size() == 66 * 3);
    auto truth = domain::load_truth(dir.file("run") + "/truth.csv");
    REQUIRE(truth.errors.empty());
    REQUIRE(truth.truth == data.truth);
    auto labels = synthetic::load_labels(dir.file("run") + "/labels.csv");
    REQUIRE(labels.size() == 66);
    REQUIRE(labels.front().feeder_id == data.labels.front().feeder_id);
    REQUIRE(labels.back().family == data.labels.back().family);
  }
}

TEST_CASE("transfers conserve load between the paired feeders") {
  synthetic::SyntheticSpec spec = still_spec(2);
  spec.transfer_rate = 0.5;  // exactly one planted event
  synthetic::SyntheticData data = synthetic::generate(spec);
  REQUIRE(data.transfers.size() == 2);  // both seasons of one physical event
  const int year = data.transfers.front().year;
  const std::string from = data.transfers.front().from_feeder;
  const std::string to = data.transfers.front().to_feeder;

  const domain::FeederHistory& hf = history_of(data, from, domain::Season::summer);
  const domain::FeederHistory& ht = history_of(data, to, domain::Season::summer);
  const double total0 = hf.peak(2001) + ht.peak(2001);
  for (int y = 2001; y <= 2020; ++y)
    REQUIRE_THAT(hf.peak(y) + ht.peak(y), WithinAbs(total0, 1e-9));
  REQUIRE(hf.peak(year) < hf.peak(year - 1));
  REQUIRE(ht.peak(year) > ht.peak(year - 1));
  // the post-transfer levels persist
  REQUIRE_THAT(hf.peak(2020), WithinAbs(hf.peak(year), 1e-9));
}

TEST_CASE("share jitter is clipped to a valid mix") {
  synthetic::SyntheticSpec spec = still_spec(40);
  spec.families[0].spread = 0.5;
  synthetic::SyntheticData data = synthetic::generate(spec);
  for (const auto& h : data.feeders) {
    const auto& r = h.records.front();
    const double res = r.residential_at_peak / r.peak_demand;
    const double com = r.commercial_at_peak / r.peak_demand;
    REQUIRE(res >= 0.02);
    REQUIRE(com >= 0.02);
    REQUIRE(res + com <= 0.96 + 1e-12);
  }
}

TEST_CASE("four planted composition blobs are recovered") {
  synthetic::SyntheticSpec spec = synthetic::clustering_benchmark_spec(11);
  synthetic::SyntheticData data = synthetic::generate(spec);

  std::vector<double> res, com;
  std::vector<int> family;
  std::map<std::string, int> family_of;
  for (const auto& l : data.labels) family_of[l.feeder_id] = l.family_index;
  for (const auto& h : data.feeders) {
    if (h.season != domain::Season::summer) continue;
    cluster::LoadComposition c = cluster::compute_composition(h);
    res.push_back(c.residential);
    com.push_back(c.commercial);
    family.push_back(family_of.at(h.feeder_id));
  }
  REQUIRE(res.size() == 300);

  std::vector<double> rn = cluster::minmax_normalize(res);
  std::vector<double> cn = cluster::minmax_normalize(com);
  std::vector<Eigen::Vector2d> pts;
  for (std::size_t i = 0; i < rn.size(); ++i) pts.emplace_back(rn[i], cn[i]);

  cluster::SelectKResult pick = cluster::select_k(pts, {2, 3, 4, 5, 6, 7, 8}, 11);
  REQUIRE(pick.best.k == 4);

  // majority-family agreement within each recovered cluster
  std::map<int, std::map<int, int>> counts;
  for (std::size_t i = 0; i < pts.size(); ++i) ++counts[pick.best.labels[i]][family[i]];
  int agree = 0;
  for (const auto& [clus, fams] : counts) {
    int best = 0;
    for (const auto& [fam, cnt] : fams) best = std::max(best, cnt);
    agree += best;
  }
  REQUIRE(agree >= 285);  // >= 95% of 300
}

TEST_CASE("area indicators carry a two-factor structure") {
  synthetic::SyntheticData data = synthetic::generate(synthetic::default_spec(4));
  features::PcaModel pca = features::fit_pca(data.area, 2001, 2020, 2);
  REQUIRE(pca.explained_variance.sum() / 7.0 > 0.6);
  double mean_anomaly = 0;
  for (const auto& y : data.area.years) {
    REQUIRE(std::isfinite(y.gdp_growth));
    REQUIRE(std::isfinite(y.net_migration));
    mean_anomaly += y.etaa_summer;
  }
  REQUIRE(std::abs(mean_anomaly / 20.0) < 1.0);
}

TEST_CASE("families move the way their names say") {
  synthetic::SyntheticData data = synthetic::generate(synthetic::default_spec(6));
  std::map<std::string, std::string> family_of;
  for (const auto& l : data.labels) family_of[l.feeder_id] = l.family;
  std::set<std::string> transferred;
  for (const auto& e : data.transfers) {
    transferred.insert(e.from_feeder);
    transferred.insert(e.to_feeder);
  }

  // fraction of the recorded change that shows up in the load the same year
  auto realized_fraction = [&](const std::string& family) {
    double realized = 0, recorded = 0;
    for (const auto& h : data.feeders) {
      if (h.season != domain::Season::summer || family_of.at(h.feeder_id) != family ||
          transferred.count(h.feeder_id))
        continue;
      for (std::size_t i = 1; i < h.records.size(); ++i) {
        const double e = h.records[i].mcnlc;
        if (e == 0) continue;
        realized += (h.records[i].peak_demand - h.records[i - 1].peak_demand) *
                    (e > 0 ? 1.0 : -1.0);
        recorded += std::abs(e);
      }
    }
    REQUIRE(recorded > 0);
    return realized / recorded;
  };
  REQUIRE(realized_fraction("eventful") > 0.6);    // announced changes materialize
  REQUIRE(realized_fraction("saturated") < 0.35);  // announced changes mostly do not

  for (const auto& h : data.feeders) {
    if (h.season != domain::Season::summer || transferred.count(h.feeder_id)) continue;
    const std::string& family = family_of.at(h.feeder_id);
    if (family == "smooth") {
      // trend plus driver response dominates everything else
      REQUIRE(h.peak(2020) > 1.2 * h.peak(2001));
      for (const auto& r : h.records) REQUIRE(r.mcnlc == 0);
    } else if (family == "saturated") {
      // settles near capacity and stays flat
      double lo = 1e18, hi = 0;
      for (int y = 2006; y <= 2020; ++y) {
        lo = std::min(lo, h.peak(y));
        hi = std::max(hi, h.peak(y));
      }
      REQUIRE((hi - lo) / (0.5 * (hi + lo)) < 0.12);
    }
  }
}
