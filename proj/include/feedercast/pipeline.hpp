#pragma once

// End-to-end run orchestration. A run lives in a directory of plain-text
// artifacts: config.txt (the resolved settings), clusters.csv, pca.txt,
// features.csv, models/, registry.csv, the forecast tables, and the metric
// tables. Every stage can be re-entered from disk: cheap deterministic
// preparation (ingest, merging, clustering, the feature projection) is
// recomputed, expensive artifacts (trained models, forecasts) are loaded.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "feedercast/baselines.hpp"
#include "feedercast/clustering.hpp"
#include "feedercast/csv.hpp"
#include "feedercast/domain.hpp"
#include "feedercast/features.hpp"
#include "feedercast/metrics.hpp"
#include "feedercast/modelio.hpp"
#include "feedercast/nets.hpp"
#include "feedercast/rng.hpp"
#include "feedercast/selector.hpp"
#include "feedercast/seqdata.hpp"

namespace feedercast::pipeline {

// ---------------------------------------------------------------------------
// Run configuration: `key = value` lines, `#` comments.

struct RunConfig {
  std::string data_dir;
  std::uint64_t seed = 1;
  int t_in = 3;
  int horizon = 3;
  int hidden = 10;
  int k_min = 2;
  int k_max = 8;
  int restarts = 10;
  bool include_der_ev = false;
  bool shifted_multiyear = false;
  double learning_rate = 1e-3;
  int max_epochs = 500;
  int batch_size = 32;
  double dropout = 0.2;
  int patience = 50;
  double validation_fraction = 0.1;
  int jobs = 1;

  nets::Hyperparams hyperparams() const {
    nets::Hyperparams hp;
    hp.learning_rate = learning_rate;
    hp.max_epochs = max_epochs;
    hp.batch_size = batch_size;
    hp.dropout_rate = dropout;
    hp.early_stop_patience = patience;
    hp.validation_fraction = validation_fraction;
    return hp;
  }

  void validate() const {
    if (data_dir.empty()) throw std::invalid_argument("run config: data_dir is not set");
    if (t_in < 1) throw std::invalid_argument("run config: t_in must be >= 1");
    if (horizon < 1) throw std::invalid_argument("run config: horizon must be >= 1");
    if (hidden < 1) throw std::invalid_argument("run config: hidden must be >= 1");
    if (k_min < 2) throw std::invalid_argument("run config: k_min must be >= 2");
    if (k_max < k_min) throw std::invalid_argument("run config: k_max must be >= k_min");
    if (restarts < 1) throw std::invalid_argument("run config: restarts must be >= 1");
    if (jobs < 1) throw std::invalid_argument("run config: jobs must be >= 1");
    hyperparams().validate();
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string::npos) return {};
  const auto to = s.find_last_not_of(" \t\r");
  return s.substr(from, to - from + 1);
}

inline bool parse_bool(const std::string& text, bool& out) {
  if (text == "true" || text == "1") return out = true, true;
  if (text == "false" || text == "0") return out = false, true;
  return false;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto where = "run config line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(where + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument(where + ": expected 'key = value'");
    if (!seen.insert(key).second)
      throw std::invalid_argument(where + ": duplicate key '" + key + "'");

    auto as_int = [&](int& out) {
      long long v = 0;
      if (!csv::parse_int(value, v)) throw std::invalid_argument(where + ": '" + key +
                                                                 "' wants an integer");
      out = static_cast<int>(v);
    };
    auto as_double = [&](double& out) {
      if (!csv::parse_double(value, out))
        throw std::invalid_argument(where + ": '" + key + "' wants a number");
    };
    auto as_bool = [&](bool& out) {
      if (!detail::parse_bool(value, out))
        throw std::invalid_argument(where + ": '" + key + "' wants true or false");
    };

    if (key == "data_dir") {
      cfg.data_dir = value;
    } else if (key == "seed") {
      long long v = 0;
      if (!csv::parse_int(value, v) || v < 0)
        throw std::invalid_argument(where + ": 'seed' wants a non-negative integer");
      cfg.seed = static_cast<std::uint64_t>(v);
    } else if (key == "t_in") {
      as_int(cfg.t_in);
    } else if (key == "horizon") {
      as_int(cfg.horizon);
    } else if (key == "hidden") {
      as_int(cfg.hidden);
    } else if (key == "k_min") {
      as_int(cfg.k_min);
    } else if (key == "k_max") {
      as_int(cfg.k_max);
    } else if (key == "restarts") {
      as_int(cfg.restarts);
    } else if (key == "include_der_ev") {
      as_bool(cfg.include_der_ev);
    } else if (key == "shifted_multiyear") {
      as_bool(cfg.shifted_multiyear);
    } else if (key == "learning_rate") {
      as_double(cfg.learning_rate);
    } else if (key == "max_epochs") {
      as_int(cfg.max_epochs);
    } else if (key == "batch_size") {
      as_int(cfg.batch_size);
    } else if (key == "dropout") {
      as_double(cfg.dropout);
    } else if (key == "patience") {
      as_int(cfg.patience);
    } else if (key == "validation_fraction") {
      as_double(cfg.validation_fraction);
    } else if (key == "jobs") {
      as_int(cfg.jobs);
    } else {
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline std::string format_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "data_dir = " << cfg.data_dir << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "t_in = " << cfg.t_in << '\n';
  out << "horizon = " << cfg.horizon << '\n';
  out << "hidden = " << cfg.hidden << '\n';
  out << "k_min = " << cfg.k_min << '\n';
  out << "k_max = " << cfg.k_max << '\n';
  out << "restarts = " << cfg.restarts << '\n';
  out << "include_der_ev = " << (cfg.include_der_ev ? "true" : "false") << '\n';
  out << "shifted_multiyear = " << (cfg.shifted_multiyear ? "true" : "false") << '\n';
  out << "learning_rate = " << csv::format_double(cfg.learning_rate) << '\n';
  out << "max_epochs = " << cfg.max_epochs << '\n';
  out << "batch_size = " << cfg.batch_size << '\n';
  out << "dropout = " << csv::format_double(cfg.dropout) << '\n';
  out << "patience = " << cfg.patience << '\n';
  out << "validation_fraction = " << csv::format_double(cfg.validation_fraction) << '\n';
  out << "jobs = " << cfg.jobs << '\n';
  return out.str();
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open run config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

inline void prepare_run_dir(const RunConfig& cfg, const std::string& run_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(run_dir));
  const std::string path = (fs::path(run_dir) / "config.txt").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write run config '" + path + "'");
  out << format_run_config(cfg);
}

// ---------------------------------------------------------------------------
// Dataset ingest.

struct Dataset {
  std::vector<domain::FeederHistory> feeders;
  domain::AreaHistory area;
  std::vector<domain::LoadTransferEvent> transfers;
  domain::ScenarioInput scenario;
  bool has_scenario = false;
  domain::TruthMap truth;
  bool has_truth = false;
};

namespace detail {

template <class Errors>
void reject(const std::string& path, const Errors& errors) {
  if (!errors.empty()) throw std::runtime_error(path + ":\n" + domain::format_errors(errors));
}

}  // namespace detail

// transfers.csv, scenario.csv, and truth.csv are optional on disk; stages
// that need them say so and get a clear error when the file is absent.
inline Dataset load_dataset(const std::string& data_dir, bool need_scenario, bool need_truth) {
  namespace fs = std::filesystem;
  const fs::path dir(data_dir);
  if (!fs::is_directory(dir))
    throw std::runtime_error("data directory '" + data_dir + "' does not exist");
  auto at = [&](const char* name) { return (dir / name).string(); };

  Dataset ds;
  auto feeders = domain::load_feeders(at("feeders.csv"));
  detail::reject(at("feeders.csv"), feeders.errors);
  ds.feeders = std::move(feeders.histories);
  if (ds.feeders.empty()) throw std::runtime_error(at("feeders.csv") + ": no histories");

  auto area = domain::load_area(at("area.csv"));
  detail::reject(at("area.csv"), area.errors);
  ds.area = std::move(area.area);
  if (ds.area.empty()) throw std::runtime_error(at("area.csv") + ": no years");

  if (fs::exists(dir / "transfers.csv")) {
    auto transfers = domain::load_transfers(at("transfers.csv"));
    detail::reject(at("transfers.csv"), transfers.errors);
    ds.transfers = std::move(transfers.events);
  }
  if (fs::exists(dir / "scenario.csv")) {
    auto scenario = domain::load_scenario(at("scenario.csv"));
    detail::reject(at("scenario.csv"), scenario.errors);
    ds.scenario = std::move(scenario.scenario);
    ds.has_scenario = true;
  } else if (need_scenario) {
    throw std::runtime_error("missing '" + at("scenario.csv") + "': future drivers are required");
  }
  if (fs::exists(dir / "truth.csv")) {
    auto truth = domain::load_truth(at("truth.csv"));
    detail::reject(at("truth.csv"), truth.errors);
    ds.truth = std::move(truth.truth);
    ds.has_truth = true;
  } else if (need_truth) {
    throw std::runtime_error("missing '" + at("truth.csv") + "': recorded actuals are required");
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Clustering over merged feeders.

struct ClusterRow {
  std::string feeder_id;  // merged id where transfers connected feeders
  int cluster_id = 0;
  cluster::LoadComposition composition;
  double res_norm = 0;
  double com_norm = 0;
};

struct Clustering {
  std::map<std::string, domain::FeederHistory> summer, winter;  // by merged id
  std::map<std::string, std::vector<std::string>> members;      // merged ids only
  std::vector<std::string> ids;                                 // sorted
  cluster::SelectKResult selection;
  std::map<std::string, int> cluster_of;
  std::vector<ClusterRow> rows;  // parallel to ids
  int first_year = 0;
  int last_year = 0;

  int cluster(const std::string& id) const {
    const auto it = cluster_of.find(id);
    if (it == cluster_of.end())
      throw std::invalid_argument("clustering: unknown feeder '" + id + "'");
    return it->second;
  }
};

inline Clustering run_clustering(const Dataset& ds, const RunConfig& cfg) {
  std::vector<domain::FeederHistory> summer, winter;
  for (const auto& h : ds.feeders)
    (h.season == domain::Season::summer ? summer : winter).push_back(h);
  if (summer.empty() || winter.empty())
    throw std::invalid_argument("clustering: need both summer and winter histories");

  std::set<std::string> summer_ids, winter_ids;
  for (const auto& h : summer) summer_ids.insert(h.feeder_id);
  for (const auto& h : winter) winter_ids.insert(h.feeder_id);
  if (summer_ids != winter_ids) {
    std::vector<std::string> odd;
    std::set_symmetric_difference(summer_ids.begin(), summer_ids.end(), winter_ids.begin(),
                                  winter_ids.end(), std::back_inserter(odd));
    throw std::invalid_argument("clustering: feeder " + odd.front() +
                                " is missing one season's history");
  }

  Clustering out;
  out.first_year = summer.front().first_year();
  out.last_year = summer.front().last_year();
  for (const auto* side : {&summer, &winter})
    for (const auto& h : *side)
      if (h.first_year() != out.first_year || h.last_year() != out.last_year)
        throw std::invalid_argument("clustering: feeder " + h.feeder_id + " covers " +
                                    std::to_string(h.first_year()) + "-" +
                                    std::to_string(h.last_year()) + " but the area covers " +
                                    std::to_string(out.first_year) + "-" +
                                    std::to_string(out.last_year));

  features::MergeResult merged_s = features::virtual_feeder_merge(summer, ds.transfers);
  features::MergeResult merged_w = features::virtual_feeder_merge(winter, ds.transfers);
  out.members = merged_s.merge_map;
  for (auto& h : merged_s.histories) {
    out.ids.push_back(h.feeder_id);
    out.summer.emplace(h.feeder_id, std::move(h));
  }
  for (auto& h : merged_w.histories) out.winter.emplace(h.feeder_id, std::move(h));

  std::vector<double> res, com;
  for (const auto& id : out.ids) {
    const cluster::LoadComposition cs = cluster::compute_composition(out.summer.at(id));
    const cluster::LoadComposition cw = cluster::compute_composition(out.winter.at(id));
    ClusterRow row;
    row.feeder_id = id;
    row.composition.feeder_id = id;
    row.composition.residential = (cs.residential + cw.residential) / 2;
    row.composition.commercial = (cs.commercial + cw.commercial) / 2;
    row.composition.industrial = (cs.industrial + cw.industrial) / 2;
    res.push_back(row.composition.residential);
    com.push_back(row.composition.commercial);
    out.rows.push_back(std::move(row));
  }

  auto normalized = [](const std::vector<double>& v, const char* what) {
    try {
      return cluster::minmax_normalize(v);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument(std::string("clustering: ") + what +
                                  " shares do not vary across feeders");
    }
  };
  const std::vector<double> rn = normalized(res, "residential");
  const std::vector<double> cn = normalized(com, "commercial");
  std::vector<Eigen::Vector2d> points;
  points.reserve(out.ids.size());
  for (std::size_t i = 0; i < out.ids.size(); ++i) {
    out.rows[i].res_norm = rn[i];
    out.rows[i].com_norm = cn[i];
    points.emplace_back(rn[i], cn[i]);
  }

  const int k_hi = std::min(cfg.k_max, static_cast<int>(points.size()));
  if (cfg.k_min > k_hi)
    throw std::invalid_argument("clustering: only " + std::to_string(points.size()) +
                                " feeders; cannot try k >= " + std::to_string(cfg.k_min));
  std::vector<int> ks;
  for (int k = cfg.k_min; k <= k_hi; ++k) ks.push_back(k);
  out.selection = cluster::select_k(points, ks, rng::derive(cfg.seed, "cluster"), cfg.restarts);

  for (std::size_t i = 0; i < out.ids.size(); ++i) {
    out.rows[i].cluster_id = out.selection.best.labels[i];
    out.cluster_of[out.ids[i]] = out.selection.best.labels[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared stage context.

struct StageContext {
  RunConfig cfg;
  Dataset data;
  Clustering clusters;
  features::PcaModel pca;
};

inline StageContext make_context(const RunConfig& cfg, bool need_scenario, bool need_truth) {
  cfg.validate();
  StageContext ctx;
  ctx.cfg = cfg;
  ctx.data = load_dataset(cfg.data_dir, need_scenario, need_truth);
  ctx.clusters = run_clustering(ctx.data, cfg);
  ctx.pca = features::fit_pca(ctx.data.area, ctx.data.area.first_year(),
                              ctx.data.area.last_year(), 2);
  return ctx;
}

inline const std::vector<std::string>& no_members() {
  static const std::vector<std::string> empty;
  return empty;
}

inline const std::vector<std::string>& members_of(const Clustering& c, const std::string& id) {
  const auto it = c.members.find(id);
  return it == c.members.end() ? no_members() : it->second;
}

inline constexpr domain::Season both_seasons[] = {domain::Season::summer, domain::Season::winter};

inline const domain::FeederHistory& history_of(const Clustering& c, const std::string& id,
                                               domain::Season s) {
  const auto& side = s == domain::Season::summer ? c.summer : c.winter;
  const auto it = side.find(id);
  if (it == side.end()) throw std::invalid_argument("clustering: unknown feeder '" + id + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Cluster artifacts.

inline void stage_cluster(const StageContext& ctx, const std::string& run_dir) {
  namespace fs = std::filesystem;
  csv::Writer rows({"feeder_id", "cluster_id", "r", "c", "i", "r_norm", "c_norm"});
  for (const auto& r : ctx.clusters.rows)
    rows.add_row({r.feeder_id, std::to_string(r.cluster_id),
                  csv::format_double(r.composition.residential),
                  csv::format_double(r.composition.commercial),
                  csv::format_double(r.composition.industrial), csv::format_double(r.res_norm),
                  csv::format_double(r.com_norm)});
  rows.write((fs::path(run_dir) / "clusters.csv").string());

  csv::Writer scores({"k", "q_avg"});
  for (const auto& [k, q] : ctx.clusters.selection.scores)
    scores.add_row({std::to_string(k), csv::format_double(q)});
  scores.write((fs::path(run_dir) / "cluster_scores.csv").string());
}

// ---------------------------------------------------------------------------
// Feature artifacts.

inline void stage_features(const StageContext& ctx, const std::string& run_dir) {
  namespace fs = std::filesystem;
  modelio::save_pca((fs::path(run_dir) / "pca.txt").string(), ctx.pca);

  csv::Writer out({"feeder_id", "season", "year", "base_peak", "ep1", "ep2", "etaa", "mcnlc",
                   "der_ev"});
  for (const auto& id : ctx.clusters.ids) {
    for (domain::Season s : both_seasons) {
      const auto& h = history_of(ctx.clusters, id, s);
      for (int y = h.first_year() + 1; y <= h.last_year(); ++y) {
        const features::YearlyFeatureVector f =
            features::assemble_features(h, ctx.data.area, ctx.pca, y);
        out.add_row({id, domain::season_name(s), std::to_string(y),
                     csv::format_double(f.base_peak), csv::format_double(f.ep1),
                     csv::format_double(f.ep2), csv::format_double(f.etaa),
                     csv::format_double(f.mcnlc), csv::format_double(f.der_ev)});
      }
    }
  }
  out.write((fs::path(run_dir) / "features.csv").string());
}

// ---------------------------------------------------------------------------
// Training.

struct ModelBank {
  std::map<std::pair<int, domain::Season>, nets::ModelSet> sets;
  std::map<std::pair<int, domain::Season>, std::map<baselines::FnnKind, baselines::TrainedFnn>>
      fnns;
};

namespace detail {

inline std::string gru_file(int cluster, domain::Season s, seqdata::Config c, int f) {
  std::string name = "gru_c" + std::to_string(cluster) + "_" + domain::season_name(s) + "_";
  switch (c) {
    case seqdata::Config::recursive: name += "recursive"; break;
    case seqdata::Config::interval: name += "interval_f" + std::to_string(f); break;
    case seqdata::Config::multiyear: name += "multiyear"; break;
  }
  return name + ".txt";
}

inline const char* fnn_tag(baselines::FnnKind k) {
  switch (k) {
    case baselines::FnnKind::orf: return "orf";
    case baselines::FnnKind::trf: return "trf";
    case baselines::FnnKind::tnf: return "tnf";
  }
  throw std::invalid_argument("fnn_tag: unknown kind");
}

inline std::string fnn_file(int cluster, domain::Season s, baselines::FnnKind k) {
  return "fnn_c" + std::to_string(cluster) + "_" + domain::season_name(s) + "_" + fnn_tag(k) +
         ".txt";
}

// Fixed worker pool over a task list; seeds are derived up front, so results
// do not depend on the worker count.
inline void run_tasks(std::vector<std::function<void()>>& tasks, int jobs) {
  if (tasks.empty()) return;
  const int n_threads =
      std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    for (auto& task : tasks) task();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks.size());
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w)
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        try {
          tasks[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<const domain::FeederHistory*> cluster_members(const Clustering& c, int id,
                                                                 domain::Season s) {
  std::vector<const domain::FeederHistory*> out;
  for (const auto& fid : c.ids)
    if (c.cluster_of.at(fid) == id) out.push_back(&history_of(c, fid, s));
  return out;
}

inline std::set<int> cluster_ids(const Clustering& c) {
  std::set<int> out;
  for (const auto& [id, k] : c.cluster_of) out.insert(k);
  return out;
}

}  // namespace detail

inline ModelBank stage_train(const StageContext& ctx, const std::string& run_dir) {
  namespace fs = std::filesystem;
  const RunConfig& cfg = ctx.cfg;
  const fs::path models = fs::path(run_dir) / "models";
  fs::create_directories(models);
  const std::set<int> clusters = detail::cluster_ids(ctx.clusters);

  ModelBank bank;
  for (int c : clusters) {
    for (domain::Season s : both_seasons) {
      auto& set = bank.sets[{c, s}];
      set.horizon = cfg.horizon;
      set.interval.resize(static_cast<std::size_t>(std::max(0, cfg.horizon - 1)));
      auto& fnns = bank.fnns[{c, s}];
      fnns[baselines::FnnKind::orf];
      fnns[baselines::FnnKind::trf];
      fnns[baselines::FnnKind::tnf];
    }
  }

  std::vector<std::function<void()>> tasks;
  for (int c : clusters) {
    for (domain::Season s : both_seasons) {
      const std::vector<const domain::FeederHistory*> members =
          detail::cluster_members(ctx.clusters, c, s);
      const std::string season = domain::season_name(s);
      auto& set = bank.sets.at({c, s});
      auto& fnns = bank.fnns.at({c, s});

      auto gru_task = [&, c, members, season](seqdata::Config config, int f,
                                              nets::TrainedModel& dest) {
        tasks.push_back([&ctx, &dest, c, members, season, config, f] {
          const RunConfig& rc = ctx.cfg;
          std::vector<seqdata::SequenceRecord> pool;
          for (const auto* h : members) {
            std::vector<seqdata::SequenceRecord> recs;
            switch (config) {
              case seqdata::Config::recursive:
                recs = seqdata::build_recursive(*h, ctx.data.area, ctx.pca, rc.t_in);
                break;
              case seqdata::Config::interval:
                recs = seqdata::build_interval(*h, ctx.data.area, ctx.pca, f, rc.t_in);
                break;
              case seqdata::Config::multiyear:
                recs = seqdata::build_multiyear(*h, ctx.data.area, ctx.pca, rc.horizon, rc.t_in);
                break;
            }
            pool.insert(pool.end(), recs.begin(), recs.end());
          }
          nets::TrainSpec spec;
          spec.config = config;
          spec.interval_f = f;
          spec.horizon = config == seqdata::Config::multiyear ? rc.horizon : 1;
          spec.shifted = config == seqdata::Config::multiyear && rc.shifted_multiyear;
          spec.hidden = rc.hidden;
          spec.include_der_ev = rc.include_der_ev;
          spec.hp = rc.hyperparams();
          spec.hp.seed = config == seqdata::Config::interval
                             ? rng::derive(rc.seed, "train", c, season, "interval", f)
                             : rng::derive(rc.seed, "train", c, season,
                                           seqdata::config_name(config));
          dest = nets::train_gru(pool, spec);
        });
      };
      gru_task(seqdata::Config::recursive, 1, set.recursive);
      for (int f = 2; f <= cfg.horizon; ++f)
        gru_task(seqdata::Config::interval, f, set.interval[static_cast<std::size_t>(f - 2)]);
      gru_task(seqdata::Config::multiyear, 1, set.multiyear);

      for (baselines::FnnKind kind :
           {baselines::FnnKind::orf, baselines::FnnKind::trf, baselines::FnnKind::tnf}) {
        auto& dest = fnns.at(kind);
        tasks.push_back([&ctx, &dest, c, members, season, kind] {
          const RunConfig& rc = ctx.cfg;
          const baselines::FnnLayout layout = baselines::fnn_layout(kind, rc.horizon);
          std::vector<seqdata::SequenceRecord> pool;
          for (const auto* h : members) {
            std::vector<seqdata::SequenceRecord> recs =
                kind == baselines::FnnKind::tnf
                    ? seqdata::build_multiyear(*h, ctx.data.area, ctx.pca, rc.horizon,
                                               layout.t_in)
                    : seqdata::build_recursive(*h, ctx.data.area, ctx.pca, layout.t_in);
            pool.insert(pool.end(), recs.begin(), recs.end());
          }
          nets::Hyperparams hp = rc.hyperparams();
          hp.seed = rng::derive(rc.seed, "train", c, season, detail::fnn_tag(kind));
          dest = baselines::train_fnn(kind, pool, rc.include_der_ev, hp, rc.horizon);
        });
      }
    }
  }
  detail::run_tasks(tasks, cfg.jobs);

  for (int c : clusters) {
    for (domain::Season s : both_seasons) {
      const auto& set = bank.sets.at({c, s});
      modelio::save_model(
          (models / detail::gru_file(c, s, seqdata::Config::recursive, 1)).string(),
          set.recursive);
      for (int f = 2; f <= cfg.horizon; ++f)
        modelio::save_model((models / detail::gru_file(c, s, seqdata::Config::interval, f)).string(),
                            set.interval[static_cast<std::size_t>(f - 2)]);
      modelio::save_model(
          (models / detail::gru_file(c, s, seqdata::Config::multiyear, 1)).string(),
          set.multiyear);
      for (const auto& [kind, tf] : bank.fnns.at({c, s}))
        modelio::save_fnn((models / detail::fnn_file(c, s, kind)).string(), tf);
    }
  }
  return bank;
}

inline ModelBank load_model_bank(const StageContext& ctx, const std::string& run_dir) {
  namespace fs = std::filesystem;
  const RunConfig& cfg = ctx.cfg;
  const fs::path models = fs::path(run_dir) / "models";
  ModelBank bank;
  auto check_gru = [&](const nets::TrainedModel& tm, const std::string& path,
                       seqdata::Config config, int f) {
    if (tm.model.config != config || (config == seqdata::Config::interval && tm.model.interval_f != f))
      throw std::runtime_error(path + ": wrong model form for its file name");
    if (tm.model.t_in != cfg.t_in)
      throw std::runtime_error(path + ": trained with a different input window");
    if (config == seqdata::Config::multiyear && tm.model.horizon != cfg.horizon)
      throw std::runtime_error(path + ": trained for a different horizon");
    if (tm.scaling.include_der_ev != cfg.include_der_ev)
      throw std::runtime_error(path + ": trained with a different feature set");
  };
  for (int c : detail::cluster_ids(ctx.clusters)) {
    for (domain::Season s : both_seasons) {
      auto& set = bank.sets[{c, s}];
      set.horizon = cfg.horizon;
      std::string path = (models / detail::gru_file(c, s, seqdata::Config::recursive, 1)).string();
      set.recursive = modelio::load_model(path);
      check_gru(set.recursive, path, seqdata::Config::recursive, 1);
      for (int f = 2; f <= cfg.horizon; ++f) {
        path = (models / detail::gru_file(c, s, seqdata::Config::interval, f)).string();
        set.interval.push_back(modelio::load_model(path));
        check_gru(set.interval.back(), path, seqdata::Config::interval, f);
      }
      path = (models / detail::gru_file(c, s, seqdata::Config::multiyear, 1)).string();
      set.multiyear = modelio::load_model(path);
      check_gru(set.multiyear, path, seqdata::Config::multiyear, 1);

      auto& fnns = bank.fnns[{c, s}];
      for (baselines::FnnKind kind :
           {baselines::FnnKind::orf, baselines::FnnKind::trf, baselines::FnnKind::tnf}) {
        path = (models / detail::fnn_file(c, s, kind)).string();
        baselines::TrainedFnn tf = modelio::load_fnn(path);
        if (tf.kind != kind) throw std::runtime_error(path + ": wrong network kind for its file name");
        if (tf.scaling.include_der_ev != cfg.include_der_ev)
          throw std::runtime_error(path + ": trained with a different feature set");
        fnns.emplace(kind, std::move(tf));
      }
    }
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Configuration selection.

inline selector::Registry stage_select(const StageContext& ctx, const ModelBank& bank,
                                       const std::string& run_dir) {
  namespace fs = std::filesystem;
  selector::Registry reg;
  for (const auto& id : ctx.clusters.ids) {
    const int c = ctx.clusters.cluster(id);
    selector::WindowErrors pooled;
    for (domain::Season s : both_seasons) {
      const auto& set = bank.sets.at({c, s});
      pooled += selector::window_errors(
          history_of(ctx.clusters, id, s), ctx.cfg.horizon, ctx.cfg.t_in,
          [&](seqdata::Config config, const domain::FeederHistory& cut, int last_actual,
              int window) {
            return nets::forecast_config(set, config, cut, ctx.data.area, ctx.pca, last_actual,
                                         window);
          });
    }
    reg.emplace(id, selector::select_feeder(id, pooled.index()));
  }
  selector::write_registry_csv((fs::path(run_dir) / "registry.csv").string(), reg);
  return reg;
}

// ---------------------------------------------------------------------------
// Forecasting.

inline const char* method_ssl() { return "ssl"; }

inline void stage_forecast(const StageContext& ctx, const ModelBank& bank,
                           const selector::Registry& reg, const std::string& run_dir) {
  namespace fs = std::filesystem;
  const RunConfig& cfg = ctx.cfg;
  if (!ctx.data.has_scenario)
    throw std::runtime_error("forecast: the data directory has no scenario.csv");
  const domain::AreaHistory area_ext =
      domain::extend_area(ctx.data.area, ctx.data.scenario, cfg.horizon);

  csv::Writer chosen({"feeder_id", "season", "year", "config", "peak_a"});
  csv::Writer by_config({"feeder_id", "season", "year", "config", "peak_a"});
  csv::Writer base({"feeder_id", "season", "year", "method", "peak_a"});

  // cluster -> season -> per-year forecast sums for the growth table.
  std::map<std::pair<int, domain::Season>, std::pair<double, std::vector<double>>> growth;

  for (const auto& id : ctx.clusters.ids) {
    const int c = ctx.clusters.cluster(id);
    for (domain::Season s : both_seasons) {
      const auto& h = history_of(ctx.clusters, id, s);
      const domain::FeederHistory h_ext = domain::extend_with_scenario(
          h, ctx.data.scenario, cfg.horizon, members_of(ctx.clusters, id));
      const int last = h.last_year();
      const auto& set = bank.sets.at({c, s});
      const seqdata::Config sel = selector::selection_for(reg, id).selected;

      auto& [base_sum, year_sums] = growth[{c, s}];
      if (year_sums.empty()) year_sums.resize(static_cast<std::size_t>(cfg.horizon), 0.0);
      base_sum += h.peak(last);

      for (seqdata::Config config :
           {seqdata::Config::recursive, seqdata::Config::interval, seqdata::Config::multiyear}) {
        const auto series =
            nets::forecast_config(set, config, h_ext, area_ext, ctx.pca, last, cfg.horizon);
        for (const auto& [year, amps] : series) {
          by_config.add_row({id, domain::season_name(s), std::to_string(year),
                             seqdata::config_name(config), csv::format_double(amps)});
          if (config == sel) {
            chosen.add_row({id, domain::season_name(s), std::to_string(year),
                            seqdata::config_name(config), csv::format_double(amps)});
            year_sums[static_cast<std::size_t>(year - last - 1)] += amps;
          }
        }
      }

      auto add_baseline = [&](const char* method, const std::vector<std::pair<int, double>>& series) {
        for (const auto& [year, amps] : series)
          base.add_row({id, domain::season_name(s), std::to_string(year), method,
                        csv::format_double(amps)});
      };
      add_baseline("bottom_up", baselines::bottom_up(h_ext, last, cfg.horizon));
      add_baseline("ar2", baselines::forecast_ar2(baselines::fit_ar2(h), h, last, cfg.horizon));
      for (baselines::FnnKind kind :
           {baselines::FnnKind::orf, baselines::FnnKind::trf, baselines::FnnKind::tnf})
        add_baseline(detail::fnn_tag(kind),
                     baselines::forecast_fnn(bank.fnns.at({c, s}).at(kind), h_ext, area_ext,
                                             ctx.pca, last, cfg.horizon));
    }
  }

  chosen.write((fs::path(run_dir) / "forecasts.csv").string());
  by_config.write((fs::path(run_dir) / "forecasts_by_config.csv").string());
  base.write((fs::path(run_dir) / "baselines.csv").string());

  csv::Writer grow({"cluster_id", "season", "year", "avg_peak_a", "growth_pct"});
  for (const auto& [key, sums] : growth) {
    const auto& [c, s] = key;
    double members = 0;
    for (const auto& id : ctx.clusters.ids)
      if (ctx.clusters.cluster_of.at(id) == c) ++members;
    double prev = sums.first / members;
    for (int f = 1; f <= cfg.horizon; ++f) {
      const double avg = sums.second[static_cast<std::size_t>(f - 1)] / members;
      const double pct = prev > 0 ? (avg / prev - 1.0) * 100.0
                                  : std::numeric_limits<double>::quiet_NaN();
      grow.add_row({std::to_string(c), domain::season_name(s),
                    std::to_string(ctx.clusters.last_year + f), csv::format_double(avg),
                    csv::format_double(pct)});
      prev = avg;
    }
  }
  grow.write((fs::path(run_dir) / "cluster_growth.csv").string());
}

// ---------------------------------------------------------------------------
// Reading forecast tables back.

struct ForecastRow {
  std::string feeder_id;
  domain::Season season = domain::Season::summer;
  int year = 0;
  seqdata::Config config = seqdata::Config::recursive;
  double peak = 0;
};

struct BaselineRow {
  std::string feeder_id;
  domain::Season season = domain::Season::summer;
  int year = 0;
  std::string method;
  double peak = 0;
};

namespace detail {

[[noreturn]] inline void row_fail(const std::string& path, std::size_t line,
                                  const std::string& what) {
  throw std::runtime_error(path + " line " + std::to_string(line) + ": " + what);
}

template <class Row, class Extra>
std::vector<Row> load_rows(const std::string& path, const char* extra_column, Extra&& extra) {
  csv::Table t = csv::read_file(path);
  for (const char* name : {"feeder_id", "season", "year", extra_column, "peak_a"})
    if (!t.has_column(name))
      throw std::runtime_error(path + ": missing column '" + std::string(name) + "'");
  const std::size_t c_id = t.column("feeder_id"), c_season = t.column("season"),
                    c_year = t.column("year"), c_extra = t.column(extra_column),
                    c_peak = t.column("peak_a");
  std::vector<Row> rows;
  rows.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& cells = t.rows[i];
    const std::size_t line = csv::Table::line_of_row(i);
    if (cells.size() != t.columns.size()) row_fail(path, line, "wrong cell count");
    Row r;
    r.feeder_id = cells[c_id];
    if (r.feeder_id.empty()) row_fail(path, line, "empty feeder_id");
    if (!domain::parse_season(cells[c_season], r.season))
      row_fail(path, line, "unknown season '" + cells[c_season] + "'");
    long long year = 0;
    if (!csv::parse_int(cells[c_year], year)) row_fail(path, line, "bad year");
    r.year = static_cast<int>(year);
    if (!csv::parse_double(cells[c_peak], r.peak)) row_fail(path, line, "bad peak_a");
    extra(r, cells[c_extra], path, line);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace detail

inline std::vector<ForecastRow> load_forecasts(const std::string& path) {
  return detail::load_rows<ForecastRow>(
      path, "config",
      [](ForecastRow& r, const std::string& cell, const std::string& p, std::size_t line) {
        if (!seqdata::parse_config(cell, r.config))
          detail::row_fail(p, line, "unknown configuration '" + cell + "'");
      });
}

inline std::vector<BaselineRow> load_baselines(const std::string& path) {
  return detail::load_rows<BaselineRow>(
      path, "method",
      [](BaselineRow& r, const std::string& cell, const std::string& p, std::size_t line) {
        if (cell.empty()) detail::row_fail(p, line, "empty method");
        r.method = cell;
      });
}

// ---------------------------------------------------------------------------
// Evaluation against recorded actuals.

namespace detail {

inline std::vector<std::string> split_members(const std::string& id) {
  std::vector<std::string> out;
  std::size_t from = 0;
  for (;;) {
    const std::size_t plus = id.find('+', from);
    if (plus == std::string::npos) {
      out.push_back(id.substr(from));
      return out;
    }
    out.push_back(id.substr(from, plus - from));
    from = plus + 1;
  }
}

inline double truth_for(const domain::TruthMap& truth, const std::string& id, domain::Season s,
                        int year) {
  double sum = 0;
  for (const auto& member : split_members(id)) {
    const auto it = truth.find({member, s, year});
    if (it == truth.end())
      throw std::runtime_error("evaluate: no recorded actual for feeder " + member + " " +
                               domain::season_name(s) + " " + std::to_string(year));
    sum += it->second;
  }
  return sum;
}

inline void write_metrics(const std::string& path, const std::vector<metrics::GroupMetrics>& groups) {
  csv::Writer out({"group", "count", "amape_pct", "amape_used", "amape_excluded", "rmse", "r2"});
  for (const auto& g : groups)
    out.add_row({g.key, std::to_string(g.count), csv::format_double(g.amape.percent),
                 std::to_string(g.amape.used), std::to_string(g.amape.excluded),
                 csv::format_double(g.rmse), csv::format_double(g.r2)});
  out.write(path);
}

}  // namespace detail

inline std::vector<metrics::EvalRecord> evaluation_records(const StageContext& ctx,
                                                           const std::vector<ForecastRow>& rows) {
  if (!ctx.data.has_truth)
    throw std::runtime_error("evaluate: the data directory has no truth.csv");
  std::vector<metrics::EvalRecord> records;
  records.reserve(rows.size());
  for (const auto& row : rows) {
    metrics::EvalRecord r;
    r.feeder_id = row.feeder_id;
    r.season = row.season;
    r.year = row.year;
    r.year_index = row.year - ctx.clusters.last_year;
    if (r.year_index < 1)
      throw std::runtime_error("evaluate: forecast year " + std::to_string(row.year) +
                               " is inside the recorded history");
    r.cluster = "c" + std::to_string(ctx.clusters.cluster(row.feeder_id));
    r.config = row.config;
    r.actual = detail::truth_for(ctx.data.truth, row.feeder_id, row.season, row.year);
    r.forecast = row.peak;
    records.push_back(std::move(r));
  }
  return records;
}

inline metrics::GroupMetrics stage_evaluate(const StageContext& ctx, const std::string& run_dir) {
  namespace fs = std::filesystem;
  const std::vector<ForecastRow> rows =
      load_forecasts((fs::path(run_dir) / "forecasts.csv").string());
  const std::vector<metrics::EvalRecord> records = evaluation_records(ctx, rows);

  const metrics::GroupMetrics all = metrics::overall(records);
  detail::write_metrics((fs::path(run_dir) / "metrics.csv").string(), {all});
  detail::write_metrics((fs::path(run_dir) / "metrics_by_cluster.csv").string(),
                        metrics::breakdown(records, metrics::GroupBy::cluster));
  detail::write_metrics((fs::path(run_dir) / "metrics_by_year.csv").string(),
                        metrics::breakdown(records, metrics::GroupBy::year_index));
  detail::write_metrics((fs::path(run_dir) / "metrics_by_config.csv").string(),
                        metrics::breakdown(records, metrics::GroupBy::config));
  detail::write_metrics((fs::path(run_dir) / "metrics_by_season.csv").string(),
                        metrics::breakdown(records, metrics::GroupBy::season));
  return all;
}

// ---------------------------------------------------------------------------
// Method comparison.

inline const std::vector<std::string>& compare_methods() {
  static const std::vector<std::string> methods = {"ssl", "bottom_up", "ar2",
                                                   "orf", "trf", "tnf"};
  return methods;
}

inline void stage_compare(const StageContext& ctx, const std::string& run_dir) {
  namespace fs = std::filesystem;
  if (!ctx.data.has_truth)
    throw std::runtime_error("compare: the data directory has no truth.csv");

  std::map<std::pair<std::string, domain::Season>, std::pair<std::vector<double>, std::vector<double>>>
      series;
  auto feed = [&](const std::string& method, const std::string& id, domain::Season s, int year,
                  double peak) {
    auto& [actuals, forecasts] = series[{method, s}];
    actuals.push_back(detail::truth_for(ctx.data.truth, id, s, year));
    forecasts.push_back(peak);
  };
  for (const auto& row : load_forecasts((fs::path(run_dir) / "forecasts.csv").string()))
    feed("ssl", row.feeder_id, row.season, row.year, row.peak);
  for (const auto& row : load_baselines((fs::path(run_dir) / "baselines.csv").string())) {
    const auto& methods = compare_methods();
    if (std::find(methods.begin() + 1, methods.end(), row.method) == methods.end())
      throw std::runtime_error("compare: unknown method '" + row.method + "' in baselines.csv");
    feed(row.method, row.feeder_id, row.season, row.year, row.peak);
  }

  csv::Writer out({"method", "season", "count", "amape_pct", "rmse", "r2"});
  for (const auto& method : compare_methods()) {
    for (domain::Season s : both_seasons) {
      const auto it = series.find({method, s});
      if (it == series.end())
        throw std::runtime_error("compare: no " + domain::season_name(s) + " forecasts for '" +
                                 method + "'");
      const metrics::GroupMetrics g =
          metrics::summarize(method, it->second.first, it->second.second);
      out.add_row({method, domain::season_name(s), std::to_string(g.count),
                   csv::format_double(g.amape.percent), csv::format_double(g.rmse),
                   csv::format_double(g.r2)});
    }
  }
  out.write((fs::path(run_dir) / "compare.csv").string());
}

// ---------------------------------------------------------------------------
// The whole run.

struct RunSummary {
  int k = 0;
  double silhouette = std::numeric_limits<double>::quiet_NaN();
  std::map<seqdata::Config, double> shares;
  metrics::GroupMetrics overall;
};

inline RunSummary run_pipeline(const RunConfig& cfg, const std::string& run_dir) {
  prepare_run_dir(cfg, run_dir);
  const StageContext ctx = make_context(cfg, true, true);
  stage_cluster(ctx, run_dir);
  stage_features(ctx, run_dir);
  const ModelBank bank = stage_train(ctx, run_dir);
  const selector::Registry reg = stage_select(ctx, bank, run_dir);
  stage_forecast(ctx, bank, reg, run_dir);

  RunSummary summary;
  summary.k = ctx.clusters.selection.best.k;
  summary.silhouette = ctx.clusters.selection.best.q_avg;
  summary.shares = selector::config_shares(reg);
  summary.overall = stage_evaluate(ctx, run_dir);
  stage_compare(ctx, run_dir);
  return summary;
}

}  // namespace feedercast::pipeline
