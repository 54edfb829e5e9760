#pragma once

// Comparison forecasters: the customer-information bottom-up recursion, a
// second-order autoregression, and three dense feed-forward networks that
// consume the same processed features as the sequence models but without
// any recurrence:
//
//   ORF — one input year,    layers in-6-6-1,   recursive over the horizon;
//   TRF — three input years, layers in-10-10-1, recursive over the horizon;
//   TNF — three input years, layers in-12-12-3, whole window at once.
//
// The dense networks share the sequence models' optimizer, loss, scaling,
// and dropout conventions so the comparison isolates the architecture.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "feedercast/domain.hpp"
#include "feedercast/features.hpp"
#include "feedercast/nets.hpp"
#include "feedercast/rng.hpp"
#include "feedercast/seqdata.hpp"

namespace feedercast::baselines {

// Expected load changes added to the last actual peak, year over year.
inline std::vector<std::pair<int, double>> bottom_up(const domain::FeederHistory& feeder,
                                                     int last_actual_year, int horizon) {
  if (horizon < 0) throw std::invalid_argument("bottom_up: horizon must be >= 0");
  if (horizon > 0 && !feeder.has_year(last_actual_year))
    throw std::invalid_argument("bottom_up: history does not contain the base year");
  std::vector<std::pair<int, double>> out;
  double level = horizon > 0 ? feeder.peak(last_actual_year) : 0.0;
  for (int k = 1; k <= horizon; ++k) {
    const int year = last_actual_year + k;
    level += feeder.at_year(year).mcnlc;
    out.emplace_back(year, level);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Second-order autoregression on the raw peak series.

struct Ar2Model {
  double c = 0;
  double phi1 = 0;
  double phi2 = 0;
  bool intercept_only = false;  // rank-deficient design (e.g. constant series)
};

// Ordinary least squares of peak(t) on [1, peak(t-1), peak(t-2)]. A design
// matrix without full column rank (a constant series is the usual culprit)
// falls back to the intercept-only model, i.e. the mean.
inline Ar2Model fit_ar2(const domain::FeederHistory& feeder) {
  const int n_obs = feeder.empty() ? 0 : feeder.last_year() - feeder.first_year() + 1;
  if (n_obs < 6)
    throw std::invalid_argument("fit_ar2: need at least 6 years of history for feeder " +
                                feeder.feeder_id);
  const int rows = n_obs - 2;
  Eigen::MatrixXd X(rows, 3);
  Eigen::VectorXd y(rows);
  for (int i = 0; i < rows; ++i) {
    const int year = feeder.first_year() + 2 + i;
    X(i, 0) = 1.0;
    X(i, 1) = feeder.peak(year - 1);
    X(i, 2) = feeder.peak(year - 2);
    y(i) = feeder.peak(year);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  Ar2Model m;
  if (qr.rank() < 3) {
    m.intercept_only = true;
    m.c = y.mean();
    return m;
  }
  Eigen::Vector3d beta = qr.solve(y);
  m.c = beta(0);
  m.phi1 = beta(1);
  m.phi2 = beta(2);
  return m;
}

// Recursive forecast: each predicted year becomes the next lag.
inline std::vector<std::pair<int, double>> forecast_ar2(const Ar2Model& m,
                                                        const domain::FeederHistory& feeder,
                                                        int last_actual_year, int horizon) {
  if (horizon < 0) throw std::invalid_argument("forecast_ar2: horizon must be >= 0");
  if (horizon > 0 && (!feeder.has_year(last_actual_year) || !feeder.has_year(last_actual_year - 1)))
    throw std::invalid_argument("forecast_ar2: need two actual years before the horizon");
  std::vector<std::pair<int, double>> out;
  double lag1 = horizon > 0 ? feeder.peak(last_actual_year) : 0.0;
  double lag2 = horizon > 0 ? feeder.peak(last_actual_year - 1) : 0.0;
  for (int k = 1; k <= horizon; ++k) {
    const double value = m.c + m.phi1 * lag1 + m.phi2 * lag2;
    out.emplace_back(last_actual_year + k, value);
    lag2 = lag1;
    lag1 = value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dense feed-forward baselines.

enum class FnnKind { orf, trf, tnf };

inline std::string fnn_name(FnnKind k) {
  switch (k) {
    case FnnKind::orf: return "ORF";
    case FnnKind::trf: return "TRF";
    case FnnKind::tnf: return "TNF";
  }
  return "?";
}

inline bool parse_fnn(std::string_view text, FnnKind& out) {
  if (text == "ORF" || text == "orf") {
    out = FnnKind::orf;
    return true;
  }
  if (text == "TRF" || text == "trf") {
    out = FnnKind::trf;
    return true;
  }
  if (text == "TNF" || text == "tnf") {
    out = FnnKind::tnf;
    return true;
  }
  return false;
}

struct FnnLayout {
  int t_in;
  int hidden1, hidden2;
  int out;
};

inline FnnLayout fnn_layout(FnnKind k, int horizon = 3) {
  if (horizon < 1) throw std::invalid_argument("fnn_layout: horizon must be >= 1");
  switch (k) {
    case FnnKind::orf: return {1, 6, 6, 1};
    case FnnKind::trf: return {3, 10, 10, 1};
    case FnnKind::tnf: return {3, 12, 12, horizon};
  }
  throw std::invalid_argument("fnn_layout: unknown kind");
}

// Two rectified hidden layers and a rectified output layer; inverted dropout
// on the second hidden layer's activations.
struct Mlp {
  Eigen::MatrixXd W1, W2, W3;
  Eigen::VectorXd b1, b2, b3;

  int input_size() const { return static_cast<int>(W1.cols()); }
  int hidden2_size() const { return static_cast<int>(W2.rows()); }
  int output_size() const { return static_cast<int>(W3.rows()); }
};

inline Eigen::Index flat_size(const Mlp& m) {
  return m.W1.size() + m.W2.size() + m.W3.size() + m.b1.size() + m.b2.size() + m.b3.size();
}

inline Eigen::VectorXd to_flat(const Mlp& m) {
  Eigen::VectorXd v(flat_size(m));
  Eigen::Index at = 0;
  auto put = [&](const Eigen::MatrixXd& M) {
    v.segment(at, M.size()) = Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
    at += M.size();
  };
  put(m.W1);
  put(m.W2);
  put(m.W3);
  put(m.b1);
  put(m.b2);
  put(m.b3);
  return v;
}

inline void from_flat(Mlp& m, const Eigen::VectorXd& v) {
  if (v.size() != flat_size(m)) throw std::invalid_argument("from_flat: size mismatch");
  Eigen::Index at = 0;
  auto take = [&](Eigen::MatrixXd& M) {
    Eigen::Map<Eigen::VectorXd>(M.data(), M.size()) = v.segment(at, M.size());
    at += M.size();
  };
  auto take_vec = [&](Eigen::VectorXd& b) {
    b = v.segment(at, b.size());
    at += b.size();
  };
  take(m.W1);
  take(m.W2);
  take(m.W3);
  take_vec(m.b1);
  take_vec(m.b2);
  take_vec(m.b3);
}

inline Mlp init_mlp(int input, int hidden1, int hidden2, int out, std::uint64_t seed) {
  if (input < 1 || hidden1 < 1 || hidden2 < 1 || out < 1)
    throw std::invalid_argument("init_mlp: sizes must be positive");
  Mlp m;
  rng::Stream stream(rng::derive(seed, "init"));
  auto fill = [&](Eigen::MatrixXd& M, int rows, int cols) {
    M.resize(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) M(i, j) = stream.uniform(-bound, bound);
  };
  fill(m.W1, hidden1, input);
  fill(m.W2, hidden2, hidden1);
  fill(m.W3, out, hidden2);
  m.b1 = Eigen::VectorXd::Zero(hidden1);
  m.b2 = Eigen::VectorXd::Zero(hidden2);
  m.b3 = Eigen::VectorXd::Zero(out);
  return m;
}

struct MlpCache {
  Eigen::VectorXd x, z1, a1, z2, a2, z3, outputs;
};

inline MlpCache mlp_forward(const Mlp& m, const Eigen::VectorXd& x, const Eigen::VectorXd& mask) {
  if (x.size() != m.input_size()) throw std::invalid_argument("mlp_forward: input size mismatch");
  if (mask.size() != m.hidden2_size())
    throw std::invalid_argument("mlp_forward: mask size mismatch");
  MlpCache c;
  c.x = x;
  c.z1 = m.W1 * x + m.b1;
  c.a1 = c.z1.cwiseMax(0.0);
  c.z2 = m.W2 * c.a1 + m.b2;
  c.a2 = c.z2.cwiseMax(0.0).cwiseProduct(mask);
  c.z3 = m.W3 * c.a2 + m.b3;
  c.outputs = c.z3.cwiseMax(0.0);
  return c;
}

inline Eigen::VectorXd flatten_steps(const seqdata::ScaledRecord& rec) {
  Eigen::Index total = 0;
  for (const auto& s : rec.steps) total += s.size();
  Eigen::VectorXd x(total);
  Eigen::Index at = 0;
  for (const auto& s : rec.steps) {
    x.segment(at, s.size()) = s;
    at += s.size();
  }
  return x;
}

inline Eigen::VectorXd mlp_predict(const Mlp& m, const Eigen::VectorXd& x) {
  return mlp_forward(m, x, Eigen::VectorXd::Ones(m.hidden2_size())).outputs;
}

// Mean absolute error and exact gradients for one mini-batch; same loss
// weighting and subgradient conventions as the sequence models.
inline nets::BatchGrad fnn_loss_and_grad(const Mlp& m,
                                         const std::vector<const seqdata::ScaledRecord*>& batch,
                                         const std::vector<Eigen::VectorXd>& masks) {
  if (batch.empty()) throw std::invalid_argument("fnn_loss_and_grad: empty batch");
  if (masks.size() != batch.size())
    throw std::invalid_argument("fnn_loss_and_grad: one mask per record required");
  Mlp g = m;
  g.W1.setZero();
  g.W2.setZero();
  g.W3.setZero();
  g.b1.setZero();
  g.b2.setZero();
  g.b3.setZero();

  Eigen::Index total_scalars = 0;
  for (const auto* rec : batch) total_scalars += rec->targets.size();
  const double w = 1.0 / static_cast<double>(total_scalars);

  double loss = 0;
  for (std::size_t ri = 0; ri < batch.size(); ++ri) {
    const auto& rec = *batch[ri];
    if (rec.targets.size() != m.output_size())
      throw std::invalid_argument("fnn_loss_and_grad: record target count does not match model");
    MlpCache c = mlp_forward(m, flatten_steps(rec), masks[ri]);
    Eigen::VectorXd dz3 = Eigen::VectorXd::Zero(m.output_size());
    for (Eigen::Index k = 0; k < c.outputs.size(); ++k) {
      const double diff = c.outputs(k) - rec.targets(k);
      loss += std::abs(diff) * w;
      const double dout = (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) * w;
      dz3(k) = c.z3(k) > 0 ? dout : 0.0;
    }
    g.W3 += dz3 * c.a2.transpose();
    g.b3 += dz3;
    Eigen::VectorXd da2 = (m.W3.transpose() * dz3).cwiseProduct(masks[ri]);
    Eigen::VectorXd dz2 = da2.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
    g.W2 += dz2 * c.a1.transpose();
    g.b2 += dz2;
    Eigen::VectorXd da1 = m.W2.transpose() * dz2;
    Eigen::VectorXd dz1 = da1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
    g.W1 += dz1 * c.x.transpose();
    g.b1 += dz1;
  }
  return {loss, to_flat(g)};
}

// Net adapter so nets::fit drives the dense baselines unchanged.
struct MlpNet {
  Mlp mlp;
  double dropout_rate = 0.2;

  Eigen::VectorXd params() const { return to_flat(mlp); }
  void set_params(const Eigen::VectorXd& v) { from_flat(mlp, v); }

  std::pair<double, Eigen::VectorXd> loss_and_grad(
      const std::vector<const seqdata::ScaledRecord*>& batch, rng::Stream& stream) {
    std::vector<Eigen::VectorXd> masks;
    masks.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      masks.push_back(nets::dropout_mask(mlp.hidden2_size(), dropout_rate, stream));
    nets::BatchGrad bg = fnn_loss_and_grad(mlp, batch, masks);
    return {bg.loss, std::move(bg.grad)};
  }

  double eval_loss(const std::vector<const seqdata::ScaledRecord*>& batch) const {
    double err = 0;
    double count = 0;
    for (const auto* rec : batch) {
      Eigen::VectorXd out = mlp_predict(mlp, flatten_steps(*rec));
      err += (out - rec->targets).cwiseAbs().sum();
      count += static_cast<double>(rec->targets.size());
    }
    return count > 0 ? err / count : 0.0;
  }
};

struct TrainedFnn {
  FnnKind kind = FnnKind::orf;
  Mlp mlp;
  seqdata::ScalingStats scaling;
  std::vector<double> train_trace, val_trace;
  int best_epoch = -1;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
  int t_in = 1;
  int horizon = 1;  // outputs per pass
};

// ORF pools come from the one-input-year one-target layout, TRF from the
// three-input-year one-target layout, TNF from the whole-window layout.
inline TrainedFnn train_fnn(FnnKind kind, const std::vector<seqdata::SequenceRecord>& pool,
                            bool include_der_ev, const nets::Hyperparams& hp, int horizon = 3) {
  if (pool.empty()) throw std::invalid_argument("train_fnn: empty training pool");
  const FnnLayout layout = fnn_layout(kind, horizon);
  for (const auto& rec : pool) {
    if (static_cast<int>(rec.steps.size()) != layout.t_in)
      throw std::invalid_argument("train_fnn: record window length does not match " +
                                  fnn_name(kind));
    if (static_cast<int>(rec.targets.size()) != layout.out)
      throw std::invalid_argument("train_fnn: record target count does not match " +
                                  fnn_name(kind));
  }
  seqdata::ScalingFit sf = seqdata::fit_scaling(pool, include_der_ev);
  std::vector<seqdata::ScaledRecord> scaled = seqdata::scale_records(sf.stats, pool);

  MlpNet net;
  net.mlp = init_mlp(layout.t_in * sf.stats.feature_size(), layout.hidden1, layout.hidden2,
                     layout.out, hp.seed);
  net.dropout_rate = hp.dropout_rate;
  nets::FitResult fr = nets::fit(net, scaled, hp);

  TrainedFnn tf;
  tf.kind = kind;
  tf.mlp = std::move(net.mlp);
  tf.scaling = sf.stats;
  tf.train_trace = std::move(fr.train_trace);
  tf.val_trace = std::move(fr.val_trace);
  tf.best_epoch = fr.best_epoch;
  tf.seed = hp.seed;
  tf.warnings = std::move(sf.warnings);
  tf.t_in = layout.t_in;
  tf.horizon = layout.out;
  return tf;
}

// Inference over a feeder history already extended with future drivers.
// ORF and TRF chain year by year, feeding forecasts back as prior peaks;
// TNF reads the window ending at the first future year and emits all years.
inline std::vector<std::pair<int, double>> forecast_fnn(const TrainedFnn& tf,
                                                        domain::FeederHistory feeder,
                                                        const domain::AreaHistory& area,
                                                        const features::PcaModel& pca,
                                                        int last_actual_year, int horizon) {
  if (horizon < 1) throw std::invalid_argument("forecast_fnn: horizon must be >= 1");
  auto window = [&](int last_input_year) {
    std::vector<Eigen::VectorXd> steps;
    for (int y = last_input_year - tf.t_in + 1; y <= last_input_year; ++y)
      steps.push_back(seqdata::scale_features(tf.scaling,
                                              features::assemble_features(feeder, area, pca, y)));
    Eigen::Index total = 0;
    for (const auto& s : steps) total += s.size();
    Eigen::VectorXd x(total);
    Eigen::Index at = 0;
    for (const auto& s : steps) {
      x.segment(at, s.size()) = s;
      at += s.size();
    }
    return x;
  };

  std::vector<std::pair<int, double>> out;
  if (tf.kind == FnnKind::tnf) {
    if (horizon != tf.horizon)
      throw std::invalid_argument("forecast_fnn: TNF emits " + std::to_string(tf.horizon) +
                                  " years, not " + std::to_string(horizon));
    Eigen::VectorXd pred = mlp_predict(tf.mlp, window(last_actual_year + 1));
    for (int k = 0; k < horizon; ++k)
      out.emplace_back(last_actual_year + 1 + k,
                       std::max(0.0, seqdata::invert_target(tf.scaling, pred(k))));
    return out;
  }
  for (int k = 1; k <= horizon; ++k) {
    const int year = last_actual_year + k;
    Eigen::VectorXd pred = mlp_predict(tf.mlp, window(year));
    const double amps = std::max(0.0, seqdata::invert_target(tf.scaling, pred(0)));
    feeder.records[static_cast<std::size_t>(year - feeder.first_year())].peak_demand = amps;
    out.emplace_back(year, amps);
  }
  return out;
}

}  // namespace feedercast::baselines
