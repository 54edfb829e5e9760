#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "feedercast/csv.hpp"
#include "feedercast/domain.hpp"
#include "feedercast/modelio.hpp"
#include "feedercast/pipeline.hpp"
#include "feedercast/selector.hpp"
#include "feedercast/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace feedercast;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

// Two well-separated families, one load transfer, short histories: enough
// structure for every stage without slow training.
synthetic::SyntheticSpec tiny_spec(std::uint64_t seed) {
  synthetic::SyntheticSpec spec = synthetic::default_spec(seed);
  spec.families.resize(2);
  spec.families[0].count = 4;
  spec.families[1].count = 4;
  spec.years = 12;
  spec.transfer_rate = 0.15;  // rounds to one planned transfer
  return spec;
}

pipeline::RunConfig tiny_config(const std::string& data_dir, std::uint64_t seed) {
  pipeline::RunConfig cfg;
  cfg.data_dir = data_dir;
  cfg.seed = seed;
  cfg.k_max = 4;
  cfg.hidden = 6;
  cfg.max_epochs = 30;
  cfg.patience = 30;
  cfg.batch_size = 16;
  return cfg;
}

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
    if (entry.is_regular_file())
      files[std::filesystem::relative(entry.path(), dir).generic_string()] =
          testsupport::read_text(entry.path().string());
  return files;
}

}  // namespace

TEST_CASE("run config text survives a round trip and rejects malformed lines") {
  pipeline::RunConfig cfg;
  cfg.data_dir = "some/data dir";
  cfg.seed = 42;
  cfg.horizon = 5;
  cfg.include_der_ev = true;
  cfg.learning_rate = 5e-4;
  cfg.jobs = 3;

  const std::string text = pipeline::format_run_config(cfg);
  const pipeline::RunConfig back = pipeline::parse_run_config(text);
  CHECK(pipeline::format_run_config(back) == text);
  CHECK(back.data_dir == "some/data dir");
  CHECK(back.seed == 42);
  CHECK(back.horizon == 5);
  CHECK(back.include_der_ev);
  CHECK(back.learning_rate == 5e-4);
  CHECK(back.jobs == 3);

  SECTION("comments and blank lines are ignored") {
    const pipeline::RunConfig c = pipeline::parse_run_config(
        "  # full-line comment\n\n  seed = 9   # trailing comment\ndata_dir = d\n");
    CHECK(c.seed == 9);
    CHECK(c.data_dir == "d");
    CHECK(c.t_in == 3);  // untouched default
  }
  SECTION("malformed input names the offending line") {
    CHECK_THROWS_WITH(pipeline::parse_run_config("frequency = 50\n"),
                      ContainsSubstring("line 1") && ContainsSubstring("unknown key 'frequency'"));
    CHECK_THROWS_WITH(pipeline::parse_run_config("seed = 1\nseed = 2\n"),
                      ContainsSubstring("line 2") && ContainsSubstring("duplicate key 'seed'"));
    CHECK_THROWS_WITH(pipeline::parse_run_config("just words\n"),
                      ContainsSubstring("expected 'key = value'"));
    CHECK_THROWS_WITH(pipeline::parse_run_config("t_in = soon\n"),
                      ContainsSubstring("'t_in' wants an integer"));
    CHECK_THROWS_WITH(pipeline::parse_run_config("include_der_ev = maybe\n"),
                      ContainsSubstring("wants true or false"));
    CHECK_THROWS_WITH(pipeline::parse_run_config("seed = -3\n"),
                      ContainsSubstring("non-negative"));
    CHECK_THROWS_WITH(pipeline::parse_run_config("dropout = high\n"),
                      ContainsSubstring("'dropout' wants a number"));
  }
  SECTION("validation rejects out-of-range settings") {
    pipeline::RunConfig bad;
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("data_dir"));
    bad.data_dir = "d";
    bad.k_min = 1;
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("k_min"));
    bad.k_min = 4;
    bad.k_max = 3;
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("k_max"));
    bad.k_max = 8;
    bad.jobs = 0;
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("jobs"));
    bad.jobs = 1;
    bad.dropout = 1.5;
    CHECK_THROWS(bad.validate());
  }
}

TEST_CASE("trained models and the feature projection round-trip through text files") {
  testsupport::TempDir dir("modelio");
  const synthetic::SyntheticData data = synthetic::generate(tiny_spec(5));
  const features::PcaModel pca =
      features::fit_pca(data.area, data.area.first_year(), data.area.last_year(), 2);

  domain::FeederHistory summer;
  for (const auto& h : data.feeders)
    if (h.season == domain::Season::summer) {
      summer = h;
      break;
    }
  REQUIRE_FALSE(summer.empty());
  const int last = summer.last_year();
  const domain::FeederHistory extended =
      domain::extend_with_scenario(summer, data.scenario, 3);
  const domain::AreaHistory area_ext = domain::extend_area(data.area, data.scenario, 3);

  SECTION("sequence model") {
    nets::TrainSpec spec;
    spec.hidden = 5;
    spec.hp.max_epochs = 20;
    spec.hp.seed = 11;
    const nets::TrainedModel tm =
        nets::train_gru(seqdata::build_recursive(summer, data.area, pca, 3), spec);

    const std::string path = dir.file("gru.txt");
    modelio::save_model(path, tm);
    const nets::TrainedModel back = modelio::load_model(path);
    CHECK(modelio::format_model(back) == modelio::format_model(tm));

    const auto want = nets::forecast_recursive(tm, extended, area_ext, pca, last, 3);
    const auto got = nets::forecast_recursive(back, extended, area_ext, pca, last, 3);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got[i].first == want[i].first);
      CHECK(got[i].second == want[i].second);  // text round-trip is exact
    }
  }

  SECTION("feed-forward model") {
    nets::Hyperparams hp;
    hp.max_epochs = 20;
    hp.seed = 12;
    const baselines::TrainedFnn tf = baselines::train_fnn(
        baselines::FnnKind::orf, seqdata::build_recursive(summer, data.area, pca, 1), false, hp);

    const std::string path = dir.file("fnn.txt");
    modelio::save_fnn(path, tf);
    const baselines::TrainedFnn back = modelio::load_fnn(path);
    CHECK(modelio::format_fnn(back) == modelio::format_fnn(tf));

    const auto want = baselines::forecast_fnn(tf, extended, area_ext, pca, last, 3);
    const auto got = baselines::forecast_fnn(back, extended, area_ext, pca, last, 3);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i].second == want[i].second);
  }

  SECTION("feature projection") {
    const std::string path = dir.file("pca.txt");
    modelio::save_pca(path, pca);
    const features::PcaModel back = modelio::load_pca(path);
    CHECK(modelio::format_pca(back) == modelio::format_pca(pca));
    CHECK(back.mean == pca.mean);
    CHECK(back.stddev == pca.stddev);
    CHECK(back.components == pca.components);
    CHECK(back.explained_variance == pca.explained_variance);
  }

  SECTION("damaged files are rejected with the file named") {
    const std::string path = dir.file("bad.txt");
    testsupport::write_text(path, "feedercast_model gru\nconfig quarterly\n");
    CHECK_THROWS_WITH(modelio::load_model(path),
                      ContainsSubstring("bad.txt") && ContainsSubstring("unknown configuration"));
    testsupport::write_text(path, "feedercast_model gru\nconfig recursive\n");
    CHECK_THROWS_WITH(modelio::load_model(path), ContainsSubstring("unexpected end of file"));
    testsupport::write_text(path, "something else\n");
    CHECK_THROWS_WITH(modelio::load_fnn(path), ContainsSubstring("expected 'feedercast_model'"));
  }
}

TEST_CASE("missing dataset files are reported by name") {
  testsupport::TempDir dir("dataset");
  const synthetic::SyntheticData data = synthetic::generate(tiny_spec(6));
  domain::write_feeders_csv(dir.file("feeders.csv"), data.feeders);
  domain::write_area_csv(dir.file("area.csv"), data.area);

  CHECK_THROWS_WITH(pipeline::load_dataset("no/such/dir", false, false),
                    ContainsSubstring("does not exist"));
  CHECK_THROWS_WITH(pipeline::load_dataset(dir.path.string(), true, false),
                    ContainsSubstring("scenario.csv"));
  CHECK_THROWS_WITH(pipeline::load_dataset(dir.path.string(), false, true),
                    ContainsSubstring("truth.csv"));

  const pipeline::Dataset ds = pipeline::load_dataset(dir.path.string(), false, false);
  CHECK(ds.feeders.size() == data.feeders.size());
  CHECK_FALSE(ds.has_scenario);
  CHECK_FALSE(ds.has_truth);
  CHECK(ds.transfers.empty());  // transfers.csv is optional
}

TEST_CASE("pipeline runs produce complete artifacts and are reproducible") {
  testsupport::TempDir dir("pipeline");
  const synthetic::SyntheticData data = synthetic::generate(tiny_spec(7));
  synthetic::write_dataset(dir.file("data"), data);
  REQUIRE_FALSE(data.transfers.empty());  // the spec plans one transfer

  pipeline::RunConfig cfg = tiny_config(dir.file("data"), 3);
  cfg.jobs = 2;
  const std::string run1 = dir.file("run1");
  const pipeline::RunSummary summary = pipeline::run_pipeline(cfg, run1);

  const pipeline::StageContext ctx = pipeline::make_context(cfg, true, true);
  const std::size_t n_ids = ctx.clusters.ids.size();
  REQUIRE(n_ids == 7);  // 8 feeders, one pair merged by the transfer

  SECTION("summary reflects the run") {
    CHECK(summary.k >= 2);
    CHECK(summary.silhouette > 0);
    double share_sum = 0;
    for (const auto& [config, share] : summary.shares) share_sum += share;
    CHECK_THAT(share_sum, WithinAbs(1.0, 1e-12));
    CHECK(summary.overall.count == n_ids * 2 * 3);  // ids x seasons x horizon
  }

  SECTION("every artifact is on disk") {
    for (const char* name :
         {"config.txt", "clusters.csv", "cluster_scores.csv", "pca.txt", "features.csv",
          "registry.csv", "forecasts.csv", "forecasts_by_config.csv", "baselines.csv",
          "cluster_growth.csv", "metrics.csv", "metrics_by_cluster.csv", "metrics_by_year.csv",
          "metrics_by_config.csv", "metrics_by_season.csv", "compare.csv"})
      CHECK(std::filesystem::exists(std::filesystem::path(run1) / name));

    std::size_t model_files = 0;
    for (const auto& entry :
         std::filesystem::directory_iterator(std::filesystem::path(run1) / "models"))
      if (entry.is_regular_file()) ++model_files;
    std::set<int> clusters;
    for (const auto& [id, c] : ctx.clusters.cluster_of) clusters.insert(c);
    CHECK(model_files == clusters.size() * 2 * 7);  // 4 sequence + 3 dense per cluster-season
  }

  SECTION("registry covers every merged feeder") {
    const selector::Registry reg =
        selector::load_registry((std::filesystem::path(run1) / "registry.csv").string());
    REQUIRE(reg.size() == n_ids);
    for (const auto& id : ctx.clusters.ids) CHECK(reg.count(id) == 1);
    bool merged = false;
    for (const auto& id : ctx.clusters.ids) merged = merged || id.find('+') != std::string::npos;
    CHECK(merged);
  }

  SECTION("forecast tables have the expected shape") {
    const auto chosen =
        pipeline::load_forecasts((std::filesystem::path(run1) / "forecasts.csv").string());
    CHECK(chosen.size() == n_ids * 2 * 3);
    const auto all =
        pipeline::load_forecasts((std::filesystem::path(run1) / "forecasts_by_config.csv").string());
    CHECK(all.size() == n_ids * 2 * 3 * 3);
    const auto base =
        pipeline::load_baselines((std::filesystem::path(run1) / "baselines.csv").string());
    CHECK(base.size() == n_ids * 2 * 3 * 5);
    for (const auto& row : chosen) {
      CHECK(row.year >= 2013);
      CHECK(row.year <= 2015);
      CHECK(row.peak >= 0);
    }
  }

  SECTION("comparison table lists six methods per season in a fixed order") {
    const csv::Table t =
        csv::read_file((std::filesystem::path(run1) / "compare.csv").string());
    REQUIRE(t.rows.size() == 12);
    const std::size_t c_method = t.column("method"), c_season = t.column("season");
    const std::vector<std::string> want = {"ssl", "bottom_up", "ar2", "orf", "trf", "tnf"};
    for (std::size_t m = 0; m < want.size(); ++m) {
      CHECK(t.rows[2 * m][c_method] == want[m]);
      CHECK(t.rows[2 * m][c_season] == "summer");
      CHECK(t.rows[2 * m + 1][c_method] == want[m]);
      CHECK(t.rows[2 * m + 1][c_season] == "winter");
    }
  }

  SECTION("a rerun with a different worker count is byte-identical") {
    pipeline::RunConfig cfg2 = cfg;
    cfg2.jobs = 1;
    const std::string run2 = dir.file("run2");
    pipeline::run_pipeline(cfg2, run2);
    auto a = snapshot(run1);
    auto b = snapshot(run2);
    a.erase("config.txt");  // records the differing jobs setting
    b.erase("config.txt");
    REQUIRE(a.size() == b.size());
    for (const auto& [name, text] : a) {
      INFO(name);
      REQUIRE(b.count(name) == 1);
      CHECK(b.at(name) == text);
    }
  }

  SECTION("selection from reloaded models matches the in-memory run") {
    const pipeline::ModelBank bank = pipeline::load_model_bank(ctx, run1);
    const std::string run3 = dir.file("run3");
    pipeline::prepare_run_dir(cfg, run3);
    pipeline::stage_select(ctx, bank, run3);
    CHECK(testsupport::read_text((std::filesystem::path(run3) / "registry.csv").string()) ==
          testsupport::read_text((std::filesystem::path(run1) / "registry.csv").string()));
  }
}

TEST_CASE("evaluation scores perfect forecasts as exact") {
  testsupport::TempDir dir("evaluate");
  const synthetic::SyntheticData data = synthetic::generate(tiny_spec(9));
  synthetic::write_dataset(dir.file("data"), data);

  const pipeline::RunConfig cfg = tiny_config(dir.file("data"), 1);
  const pipeline::StageContext ctx = pipeline::make_context(cfg, false, true);

  const std::string run = dir.file("run");
  pipeline::prepare_run_dir(cfg, run);
  csv::Writer fc({"feeder_id", "season", "year", "config", "peak_a"});
  for (const auto& id : ctx.clusters.ids) {
    std::vector<std::string> members = {id};
    if (ctx.clusters.members.count(id)) members = ctx.clusters.members.at(id);
    for (domain::Season s : pipeline::both_seasons) {
      for (int year = 2013; year <= 2015; ++year) {
        double actual = 0;
        for (const auto& m : members) actual += data.truth.at({m, s, year});
        fc.add_row({id, domain::season_name(s), std::to_string(year), "recursive",
                    csv::format_double(actual)});
      }
    }
  }
  fc.write((std::filesystem::path(run) / "forecasts.csv").string());

  const metrics::GroupMetrics overall = pipeline::stage_evaluate(ctx, run);
  CHECK(overall.count == ctx.clusters.ids.size() * 2 * 3);
  CHECK_THAT(overall.amape.percent, WithinAbs(0.0, 1e-12));
  CHECK_THAT(overall.rmse, WithinAbs(0.0, 1e-12));
  CHECK(overall.r2 == 1.0);

  const csv::Table by_year =
      csv::read_file((std::filesystem::path(run) / "metrics_by_year.csv").string());
  REQUIRE(by_year.rows.size() == 3);
  CHECK(by_year.rows[0][by_year.column("group")] == "year1");

  SECTION("forecast years must lie past the recorded history") {
    csv::Writer stale({"feeder_id", "season", "year", "config", "peak_a"});
    stale.add_row({ctx.clusters.ids.front(), "summer", "2012", "recursive", "100"});
    stale.write((std::filesystem::path(run) / "forecasts.csv").string());
    CHECK_THROWS_WITH(pipeline::stage_evaluate(ctx, run),
                      ContainsSubstring("inside the recorded history"));
  }
  SECTION("unknown actuals are reported") {
    csv::Writer odd({"feeder_id", "season", "year", "config", "peak_a"});
    odd.add_row({ctx.clusters.ids.front(), "summer", "2030", "recursive", "100"});
    odd.write((std::filesystem::path(run) / "forecasts.csv").string());
    CHECK_THROWS_WITH(pipeline::stage_evaluate(ctx, run),
                      ContainsSubstring("no recorded actual"));
  }
}
