// feedercast — per-feeder multi-year peak demand forecasting.
//
// Subcommands cover the whole run: generate synthetic data, cluster feeders
// on load composition, extract features, train the sequence models, select
// each feeder's best configuration, forecast the horizon, evaluate against
// recorded actuals, and compare with the reference methods. `pipeline` runs
// everything into one self-describing run directory.
//
// Exit codes: 0 success, 1 invalid input or settings, 2 runtime failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "feedercast/pipeline.hpp"
#include "feedercast/synthetic.hpp"

namespace {

using feedercast::pipeline::RunConfig;

struct StageArgs {
  CLI::App* cmd = nullptr;
  std::string run_dir;
  std::string config_file;

  // optional overrides; applied only when the flag was given
  std::string data_dir;
  std::uint64_t seed = 0;
  int t_in = 0, horizon = 0, hidden = 0;
  int k_min = 0, k_max = 0, restarts = 0;
  int max_epochs = 0, batch_size = 0, patience = 0, jobs = 0;
  double learning_rate = 0, dropout = 0, validation_fraction = 0;
  bool include_der_ev = false, shifted_multiyear = false;
};

StageArgs* add_stage(CLI::App& app, const char* name, const char* help) {
  auto* args = new StageArgs;  // lives for the whole process
  CLI::App* cmd = app.add_subcommand(name, help);
  args->cmd = cmd;
  cmd->add_option("--run", args->run_dir, "run directory for artifacts")->required();
  cmd->add_option("--config", args->config_file, "settings file (defaults to <run>/config.txt)");
  cmd->add_option("--data", args->data_dir, "input data directory");
  cmd->add_option("--seed", args->seed, "master seed");
  cmd->add_option("--t-in", args->t_in, "input window length in years");
  cmd->add_option("--horizon", args->horizon, "forecast horizon in years");
  cmd->add_option("--hidden", args->hidden, "recurrent state size");
  cmd->add_option("--k-min", args->k_min, "smallest cluster count to try");
  cmd->add_option("--k-max", args->k_max, "largest cluster count to try");
  cmd->add_option("--restarts", args->restarts, "clustering restarts per k");
  cmd->add_option("--learning-rate", args->learning_rate, "optimizer step size");
  cmd->add_option("--max-epochs", args->max_epochs, "training epoch cap");
  cmd->add_option("--batch-size", args->batch_size, "mini-batch size");
  cmd->add_option("--dropout", args->dropout, "dropout rate");
  cmd->add_option("--patience", args->patience, "early-stopping patience in epochs");
  cmd->add_option("--validation-fraction", args->validation_fraction,
                  "share of records held out for early stopping");
  cmd->add_option("--jobs", args->jobs, "parallel training workers");
  cmd->add_flag("--include-der-ev", args->include_der_ev,
                "add expected DER/EV changes to the feature vector");
  cmd->add_flag("--shifted-multiyear", args->shifted_multiyear,
                "whole-window model emits through a shared shifted head");
  return args;
}

RunConfig resolve_config(const StageArgs& a) {
  RunConfig cfg;
  if (!a.config_file.empty()) {
    cfg = feedercast::pipeline::load_run_config(a.config_file);
  } else {
    const std::string recorded =
        (std::filesystem::path(a.run_dir) / "config.txt").string();
    if (std::filesystem::exists(recorded)) cfg = feedercast::pipeline::load_run_config(recorded);
  }
  const CLI::App& cmd = *a.cmd;
  if (cmd.count("--data")) cfg.data_dir = a.data_dir;
  if (cmd.count("--seed")) cfg.seed = a.seed;
  if (cmd.count("--t-in")) cfg.t_in = a.t_in;
  if (cmd.count("--horizon")) cfg.horizon = a.horizon;
  if (cmd.count("--hidden")) cfg.hidden = a.hidden;
  if (cmd.count("--k-min")) cfg.k_min = a.k_min;
  if (cmd.count("--k-max")) cfg.k_max = a.k_max;
  if (cmd.count("--restarts")) cfg.restarts = a.restarts;
  if (cmd.count("--learning-rate")) cfg.learning_rate = a.learning_rate;
  if (cmd.count("--max-epochs")) cfg.max_epochs = a.max_epochs;
  if (cmd.count("--batch-size")) cfg.batch_size = a.batch_size;
  if (cmd.count("--dropout")) cfg.dropout = a.dropout;
  if (cmd.count("--patience")) cfg.patience = a.patience;
  if (cmd.count("--validation-fraction")) cfg.validation_fraction = a.validation_fraction;
  if (cmd.count("--jobs")) cfg.jobs = a.jobs;
  if (cmd.count("--include-der-ev")) cfg.include_der_ev = true;
  if (cmd.count("--shifted-multiyear")) cfg.shifted_multiyear = true;
  return cfg;
}

void print_shares(const std::map<feedercast::seqdata::Config, double>& shares) {
  std::printf("selected shares:");
  for (const auto& [config, share] : shares)
    std::printf(" %s %.1f%%", feedercast::seqdata::config_name(config).c_str(), 100.0 * share);
  std::printf("\n");
}

int run(int argc, char** argv) {
  namespace pl = feedercast::pipeline;
  CLI::App app{"per-feeder multi-year peak demand forecasting"};
  app.require_subcommand(1);

  // generate
  std::string gen_out, gen_preset = "default";
  std::uint64_t gen_seed = 1;
  CLI::App* gen = app.add_subcommand("generate", "write a seeded synthetic dataset");
  gen->add_option("--out", gen_out, "output data directory")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--preset", gen_preset, "dataset preset")
      ->check(CLI::IsMember({"default", "benchmark"}));

  StageArgs* cluster = add_stage(app, "cluster", "group feeders by load composition");
  StageArgs* features = add_stage(app, "features", "fit the area projection and emit features");
  StageArgs* train = add_stage(app, "train", "train all sequence and reference models");
  StageArgs* select = add_stage(app, "select", "pick each feeder's best configuration");
  StageArgs* forecast = add_stage(app, "forecast", "forecast the horizon for every feeder");
  StageArgs* evaluate = add_stage(app, "evaluate", "score forecasts against recorded actuals");
  StageArgs* compare = add_stage(app, "compare", "score every method side by side");
  StageArgs* pipeline = add_stage(app, "pipeline", "run every stage into one directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 1;
  }

  if (gen->parsed()) {
    const feedercast::synthetic::SyntheticSpec spec =
        gen_preset == "benchmark" ? feedercast::synthetic::clustering_benchmark_spec(gen_seed)
                                  : feedercast::synthetic::default_spec(gen_seed);
    const feedercast::synthetic::SyntheticData data = feedercast::synthetic::generate(spec);
    feedercast::synthetic::write_dataset(gen_out, data);
    std::printf("wrote %d feeders x %d years (+%d held-out) to %s\n", spec.n_feeders(),
                spec.years, spec.horizon, gen_out.c_str());
    return 0;
  }

  const StageArgs& args = cluster->cmd->parsed()    ? *cluster
                          : features->cmd->parsed() ? *features
                          : train->cmd->parsed()    ? *train
                          : select->cmd->parsed()   ? *select
                          : forecast->cmd->parsed() ? *forecast
                          : evaluate->cmd->parsed() ? *evaluate
                          : compare->cmd->parsed()  ? *compare
                                                    : *pipeline;
  const RunConfig cfg = resolve_config(args);
  const std::string& run_dir = args.run_dir;

  if (pipeline->cmd->parsed()) {
    const pl::RunSummary summary = pl::run_pipeline(cfg, run_dir);
    std::printf("k = %d (q_avg %.3f)\n", summary.k, summary.silhouette);
    print_shares(summary.shares);
    std::printf("overall: AMAPE %.2f%%  RMSE %.2f A  R2 %.4f  (%zu forecasts)\n",
                summary.overall.amape.percent, summary.overall.rmse, summary.overall.r2,
                summary.overall.count);
    return 0;
  }

  pl::prepare_run_dir(cfg, run_dir);
  if (cluster->cmd->parsed()) {
    const pl::StageContext ctx = pl::make_context(cfg, false, false);
    pl::stage_cluster(ctx, run_dir);
    std::printf("k = %d (q_avg %.3f) over %zu feeders -> clusters.csv\n",
                ctx.clusters.selection.best.k, ctx.clusters.selection.best.q_avg,
                ctx.clusters.ids.size());
  } else if (features->cmd->parsed()) {
    const pl::StageContext ctx = pl::make_context(cfg, false, false);
    pl::stage_features(ctx, run_dir);
    const auto& ev = ctx.pca.explained_variance;
    std::printf("top-2 components explain %.1f%% of indicator variance -> features.csv\n",
                100.0 * ev.sum() / static_cast<double>(ctx.pca.mean.size()));
  } else if (train->cmd->parsed()) {
    const pl::StageContext ctx = pl::make_context(cfg, false, false);
    const pl::ModelBank bank = pl::stage_train(ctx, run_dir);
    std::size_t n = 0;
    for (const auto& [key, set] : bank.sets) n += 2 + set.interval.size();
    for (const auto& [key, fnns] : bank.fnns) n += fnns.size();
    std::printf("trained %zu models -> models/\n", n);
  } else if (select->cmd->parsed()) {
    const pl::StageContext ctx = pl::make_context(cfg, false, false);
    const pl::ModelBank bank = pl::load_model_bank(ctx, run_dir);
    const feedercast::selector::Registry reg = pl::stage_select(ctx, bank, run_dir);
    print_shares(feedercast::selector::config_shares(reg));
  } else if (forecast->cmd->parsed()) {
    const pl::StageContext ctx = pl::make_context(cfg, true, false);
    const pl::ModelBank bank = pl::load_model_bank(ctx, run_dir);
    const feedercast::selector::Registry reg = feedercast::selector::load_registry(
        (std::filesystem::path(run_dir) / "registry.csv").string());
    pl::stage_forecast(ctx, bank, reg, run_dir);
    std::printf("forecast %zu feeders x 2 seasons x %d years -> forecasts.csv\n",
                ctx.clusters.ids.size(), cfg.horizon);
  } else if (evaluate->cmd->parsed()) {
    const pl::StageContext ctx = pl::make_context(cfg, false, true);
    const feedercast::metrics::GroupMetrics overall = pl::stage_evaluate(ctx, run_dir);
    std::printf("overall: AMAPE %.2f%%  RMSE %.2f A  R2 %.4f  (%zu forecasts)\n",
                overall.amape.percent, overall.rmse, overall.r2, overall.count);
  } else if (compare->cmd->parsed()) {
    const pl::StageContext ctx = pl::make_context(cfg, false, true);
    pl::stage_compare(ctx, run_dir);
    std::printf("scored %zu methods x 2 seasons -> compare.csv\n",
                pl::compare_methods().size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "feedercast: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "feedercast: %s\n", e.what());
    return 2;
  }
}
