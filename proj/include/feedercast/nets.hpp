#pragma once

// Gated recurrent sequence models with exact analytic gradients.
//
// One GRU layer (hidden state 10 by default) reads the yearly feature steps;
// a rectified dense head turns the final hidden state into one peak value
// (recursive and interval forms) or the whole forecast window at once
// (multi-year form). Training is plain mini-batch Adam on mean absolute
// error with a 90/10 validation split and patience-based early stopping.
// Everything is seeded and byte-reproducible.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "feedercast/domain.hpp"
#include "feedercast/features.hpp"
#include "feedercast/rng.hpp"
#include "feedercast/seqdata.hpp"

namespace feedercast::nets {

struct Hyperparams {
  double learning_rate = 1e-3;
  int max_epochs = 500;
  int batch_size = 32;
  double dropout_rate = 0.2;
  int early_stop_patience = 50;
  double validation_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;

  void validate() const {
    if (learning_rate < 0) throw std::invalid_argument("learning_rate must be >= 0");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (dropout_rate < 0 || dropout_rate >= 1)
      throw std::invalid_argument("dropout_rate must be in [0, 1)");
    if (early_stop_patience < 1) throw std::invalid_argument("early_stop_patience must be >= 1");
    if (validation_fraction < 0 || validation_fraction >= 1)
      throw std::invalid_argument("validation_fraction must be in [0, 1)");
  }
};

struct GruParams {
  Eigen::MatrixXd W_r, W_u, W_h;  // hidden x (hidden + input), over [h_prev, x]
  Eigen::VectorXd b_r, b_u, b_h;

  int hidden_size() const { return static_cast<int>(b_r.size()); }
  int input_size() const { return static_cast<int>(W_r.cols()) - hidden_size(); }
};

struct DenseHead {
  Eigen::MatrixXd W_o;  // outputs x hidden
  Eigen::VectorXd b_o;
};

// The full architecture for one sequential form. `horizon` is the number of
// predicted years per pass (1 except for the multi-year form). In shifted
// mode the multi-year form shares a single-neuron head across the last
// `horizon` time steps instead of widening the head.
struct GruModel {
  seqdata::Config config = seqdata::Config::recursive;
  int interval_f = 1;  // interval form only
  int horizon = 1;
  bool shifted = false;
  int t_in = 3;  // input window length the model was trained with
  GruParams gru;
  DenseHead head;

  int hidden_size() const { return gru.hidden_size(); }
  int input_size() const { return gru.input_size(); }
  int output_count() const { return config == seqdata::Config::multiyear ? horizon : 1; }
  int head_rows() const { return shifted ? 1 : output_count(); }
};

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

struct CellCache {
  Eigen::VectorXd r, u, htilde, h;
};

// One recurrence step: reset and update gates squash affine images of
// [h_prev, x]; the candidate state sees the reset-scaled history; the new
// state is the update-gated blend. Each component of h is a convex
// combination of h_prev and a tanh value, so |h| stays within [-1, 1]
// when started from zero.
inline CellCache gru_cell_forward(const GruParams& p, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& h_prev) {
  const int H = p.hidden_size();
  const int D = p.input_size();
  if (x.size() != D || h_prev.size() != H)
    throw std::invalid_argument("gru_cell_forward: shape mismatch");
  if (!x.allFinite() || !h_prev.allFinite())
    throw std::invalid_argument("gru_cell_forward: non-finite input");
  Eigen::VectorXd hx(H + D);
  hx << h_prev, x;
  CellCache c;
  c.r = (p.W_r * hx + p.b_r).unaryExpr([](double a) { return sigmoid(a); });
  c.u = (p.W_u * hx + p.b_u).unaryExpr([](double a) { return sigmoid(a); });
  Eigen::VectorXd rhx(H + D);
  rhx << c.r.cwiseProduct(h_prev), x;
  c.htilde = (p.W_h * rhx + p.b_h).array().tanh();
  c.h = (Eigen::VectorXd::Ones(H) - c.u).cwiseProduct(h_prev) + c.u.cwiseProduct(c.htilde);
  return c;
}

// Inverted-dropout mask over hidden units: kept entries carry 1/(1-rate) so
// inference can use the bare hidden state.
inline Eigen::VectorXd dropout_mask(int hidden, double rate, rng::Stream& stream) {
  Eigen::VectorXd mask(hidden);
  const double keep = 1.0 - rate;
  for (int i = 0; i < hidden; ++i) mask(i) = stream.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mask;
}

struct ForwardCache {
  std::vector<Eigen::VectorXd> h;         // hidden states, h[0] = 0
  std::vector<CellCache> cells;           // per time step
  Eigen::VectorXd mask;                   // scaled dropout mask (ones when inferring)
  std::vector<Eigen::VectorXd> z;         // head pre-activations, one entry per head site
  Eigen::VectorXd outputs;                // scaled predictions
};

// Unroll the cell over the steps from a zero state and apply the head. The
// default head reads the final hidden state; a shifted multi-year model
// reads the last `horizon` states with the shared single-neuron head. The
// mask multiplies whichever hidden state feeds the head.
inline ForwardCache forward(const GruModel& m, const std::vector<Eigen::VectorXd>& steps,
                            const Eigen::VectorXd& mask) {
  const int H = m.hidden_size();
  if (steps.empty()) throw std::invalid_argument("forward: no input steps");
  if (mask.size() != H) throw std::invalid_argument("forward: mask size mismatch");
  const int T = static_cast<int>(steps.size());
  if (m.shifted && m.output_count() > T)
    throw std::invalid_argument("forward: shifted head needs at least `horizon` steps");
  ForwardCache c;
  c.mask = mask;
  c.h.resize(static_cast<std::size_t>(T) + 1);
  c.h[0] = Eigen::VectorXd::Zero(H);
  c.cells.reserve(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    c.cells.push_back(gru_cell_forward(m.gru, steps[static_cast<std::size_t>(t - 1)], c.h[static_cast<std::size_t>(t - 1)]));
    c.h[static_cast<std::size_t>(t)] = c.cells.back().h;
  }
  const int n_out = m.output_count();
  c.outputs.resize(n_out);
  if (m.shifted) {
    for (int k = 0; k < n_out; ++k) {
      const int t = T - n_out + 1 + k;
      Eigen::VectorXd hd = mask.cwiseProduct(c.h[static_cast<std::size_t>(t)]);
      c.z.push_back(m.head.W_o * hd + m.head.b_o);
      c.outputs(k) = std::max(0.0, c.z.back()(0));
    }
  } else {
    Eigen::VectorXd hd = mask.cwiseProduct(c.h[static_cast<std::size_t>(T)]);
    c.z.push_back(m.head.W_o * hd + m.head.b_o);
    for (int k = 0; k < n_out; ++k) c.outputs(k) = std::max(0.0, c.z.back()(k));
  }
  return c;
}

// Inference pass: no dropout.
inline Eigen::VectorXd predict(const GruModel& m, const std::vector<Eigen::VectorXd>& steps) {
  return forward(m, steps, Eigen::VectorXd::Ones(m.hidden_size())).outputs;
}

// Mean absolute error over every forecast scalar. With one target per record
// this is the plain batch MAE; with a T-year window it averages over both
// the batch and the window.
inline double mae_loss(const Eigen::VectorXd& outputs, const Eigen::VectorXd& targets) {
  if (outputs.size() != targets.size() || outputs.size() == 0)
    throw std::invalid_argument("mae_loss: size mismatch");
  return (outputs - targets).cwiseAbs().mean();
}

// ---------------------------------------------------------------------------
// Flat parameter views (fixed order: W_r, W_u, W_h, b_r, b_u, b_h, W_o, b_o)
// so the optimizer and finite-difference checks can treat the model as one
// vector. b_o occupies the trailing entries.

inline Eigen::Index flat_size(const GruModel& m) {
  return 3 * m.gru.W_r.size() + 3 * m.gru.b_r.size() + m.head.W_o.size() + m.head.b_o.size();
}

inline Eigen::VectorXd to_flat(const GruModel& m) {
  Eigen::VectorXd v(flat_size(m));
  Eigen::Index at = 0;
  auto put = [&](const Eigen::MatrixXd& M) {
    v.segment(at, M.size()) = Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
    at += M.size();
  };
  put(m.gru.W_r);
  put(m.gru.W_u);
  put(m.gru.W_h);
  put(m.gru.b_r);
  put(m.gru.b_u);
  put(m.gru.b_h);
  put(m.head.W_o);
  put(m.head.b_o);
  return v;
}

inline void from_flat(GruModel& m, const Eigen::VectorXd& v) {
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
  take(m.gru.W_r);
  take(m.gru.W_u);
  take(m.gru.W_h);
  take_vec(m.gru.b_r);
  take_vec(m.gru.b_u);
  take_vec(m.gru.b_h);
  take(m.head.W_o);
  take_vec(m.head.b_o);
}

struct BatchGrad {
  double loss = 0;
  Eigen::VectorXd grad;
};

// Loss and exact gradients for one mini-batch. Backpropagation runs through
// the head, the dropout mask, and the unrolled recurrence; the |.|
// subgradient at zero is taken as zero, as is the rectifier's at zero.
// `masks` holds one hidden-unit mask per record (use ones to evaluate
// without dropout).
inline BatchGrad loss_and_grad(const GruModel& m,
                               const std::vector<const seqdata::ScaledRecord*>& batch,
                               const std::vector<Eigen::VectorXd>& masks) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  if (masks.size() != batch.size())
    throw std::invalid_argument("loss_and_grad: one mask per record required");
  const int H = m.hidden_size();
  GruModel g = m;  // gradient accumulator with the same shapes
  g.gru.W_r.setZero();
  g.gru.W_u.setZero();
  g.gru.W_h.setZero();
  g.gru.b_r.setZero();
  g.gru.b_u.setZero();
  g.gru.b_h.setZero();
  g.head.W_o.setZero();
  g.head.b_o.setZero();

  Eigen::Index total_scalars = 0;
  for (const auto* rec : batch) total_scalars += rec->targets.size();
  const double w = 1.0 / static_cast<double>(total_scalars);

  double loss = 0;
  for (std::size_t ri = 0; ri < batch.size(); ++ri) {
    const auto& rec = *batch[ri];
    if (rec.targets.size() != m.output_count())
      throw std::invalid_argument("loss_and_grad: record target count does not match model");
    ForwardCache c = forward(m, rec.steps, masks[ri]);
    const int T = static_cast<int>(rec.steps.size());
    const int n_out = m.output_count();

    std::vector<Eigen::VectorXd> inject(static_cast<std::size_t>(T) + 1,
                                        Eigen::VectorXd::Zero(H));
    for (int k = 0; k < n_out; ++k) {
      const double diff = c.outputs(k) - rec.targets(k);
      loss += std::abs(diff) * w;
      const double dout = (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) * w;
      if (m.shifted) {
        const int t = T - n_out + 1 + k;
        const double dz = c.z[static_cast<std::size_t>(k)](0) > 0 ? dout : 0.0;
        if (dz != 0.0) {
          Eigen::VectorXd hd = c.mask.cwiseProduct(c.h[static_cast<std::size_t>(t)]);
          g.head.W_o.row(0) += dz * hd.transpose();
          g.head.b_o(0) += dz;
          inject[static_cast<std::size_t>(t)] += c.mask.cwiseProduct(m.head.W_o.row(0).transpose() * dz);
        }
      } else {
        const double dz = c.z[0](k) > 0 ? dout : 0.0;
        if (dz != 0.0) {
          Eigen::VectorXd hd = c.mask.cwiseProduct(c.h[static_cast<std::size_t>(T)]);
          g.head.W_o.row(k) += dz * hd.transpose();
          g.head.b_o(k) += dz;
          inject[static_cast<std::size_t>(T)] += c.mask.cwiseProduct(m.head.W_o.row(k).transpose() * dz);
        }
      }
    }

    Eigen::VectorXd dh = Eigen::VectorXd::Zero(H);
    for (int t = T; t >= 1; --t) {
      dh += inject[static_cast<std::size_t>(t)];
      const auto& cell = c.cells[static_cast<std::size_t>(t - 1)];
      const Eigen::VectorXd& h_prev = c.h[static_cast<std::size_t>(t - 1)];
      const Eigen::VectorXd& x = rec.steps[static_cast<std::size_t>(t - 1)];

      Eigen::VectorXd du = dh.cwiseProduct(cell.htilde - h_prev);
      Eigen::VectorXd dhtilde = dh.cwiseProduct(cell.u);
      Eigen::VectorXd dh_prev = dh.cwiseProduct(Eigen::VectorXd::Ones(H) - cell.u);

      Eigen::VectorXd da_h =
          dhtilde.cwiseProduct(Eigen::VectorXd::Ones(H) - cell.htilde.cwiseProduct(cell.htilde));
      Eigen::VectorXd rhx(H + static_cast<int>(x.size()));
      rhx << cell.r.cwiseProduct(h_prev), x;
      g.gru.W_h += da_h * rhx.transpose();
      g.gru.b_h += da_h;
      Eigen::VectorXd drh = m.gru.W_h.leftCols(H).transpose() * da_h;
      Eigen::VectorXd dr = drh.cwiseProduct(h_prev);
      dh_prev += drh.cwiseProduct(cell.r);

      Eigen::VectorXd da_u =
          du.cwiseProduct(cell.u.cwiseProduct(Eigen::VectorXd::Ones(H) - cell.u));
      Eigen::VectorXd da_r =
          dr.cwiseProduct(cell.r.cwiseProduct(Eigen::VectorXd::Ones(H) - cell.r));
      Eigen::VectorXd hx(H + static_cast<int>(x.size()));
      hx << h_prev, x;
      g.gru.W_u += da_u * hx.transpose();
      g.gru.b_u += da_u;
      g.gru.W_r += da_r * hx.transpose();
      g.gru.b_r += da_r;
      dh_prev += m.gru.W_u.leftCols(H).transpose() * da_u;
      dh_prev += m.gru.W_r.leftCols(H).transpose() * da_r;

      dh = std::move(dh_prev);
    }
  }
  return {loss, to_flat(g)};
}

// Seeded initialization: every weight uniform within +/- 1/sqrt(fan-in),
// biases zero.
inline GruModel init_model(seqdata::Config config, int input_size, int hidden, int horizon,
                           int interval_f, bool shifted, int t_in, std::uint64_t seed) {
  if (input_size < 1 || hidden < 1 || horizon < 1 || interval_f < 1 || t_in < 1)
    throw std::invalid_argument("init_model: sizes must be positive");
  GruModel m;
  m.config = config;
  m.interval_f = interval_f;
  m.horizon = config == seqdata::Config::multiyear ? horizon : 1;
  m.shifted = shifted && config == seqdata::Config::multiyear;
  m.t_in = t_in;
  rng::Stream stream(rng::derive(seed, "init"));
  auto fill = [&](Eigen::MatrixXd& M, int rows, int cols) {
    M.resize(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) M(i, j) = stream.uniform(-bound, bound);
  };
  fill(m.gru.W_r, hidden, hidden + input_size);
  fill(m.gru.W_u, hidden, hidden + input_size);
  fill(m.gru.W_h, hidden, hidden + input_size);
  m.gru.b_r = Eigen::VectorXd::Zero(hidden);
  m.gru.b_u = Eigen::VectorXd::Zero(hidden);
  m.gru.b_h = Eigen::VectorXd::Zero(hidden);
  fill(m.head.W_o, m.head_rows(), hidden);
  m.head.b_o = Eigen::VectorXd::Zero(m.head_rows());
  return m;
}

// ---------------------------------------------------------------------------
// Generic trainer. A Net provides params()/set_params(flat vector),
// loss_and_grad(batch, stream) for a training step (drawing any dropout
// masks from the stream), and eval_loss(batch) without dropout. Adam updates
// with a fixed 90/10 record split, per-epoch reshuffles, and early stopping
// on the validation error; the best-validation parameters are restored.

struct FitResult {
  std::vector<double> train_trace;  // epoch mean training loss
  std::vector<double> val_trace;    // epoch validation loss
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
};

template <class Net>
FitResult fit(Net& net, const std::vector<seqdata::ScaledRecord>& data, const Hyperparams& hp) {
  hp.validate();
  if (data.empty()) throw std::invalid_argument("fit: empty training pool");
  const std::size_t n = data.size();

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng::Stream split_stream(rng::derive(hp.seed, "split"));
  split_stream.shuffle(order);
  const std::size_t n_val = static_cast<std::size_t>(static_cast<double>(n) * hp.validation_fraction);
  std::vector<const seqdata::ScaledRecord*> val;
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_val)
      val.push_back(&data[order[i]]);
    else
      train_idx.push_back(order[i]);
  }
  // Tiny pools get no held-out records; fall back to scoring the train set.
  if (val.empty())
    for (std::size_t i : train_idx) val.push_back(&data[i]);

  FitResult result;
  Eigen::VectorXd theta = net.params();
  Eigen::VectorXd best = theta;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  long step = 0;
  int since_best = 0;

  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    rng::Stream epoch_stream(rng::derive(hp.seed, "epoch", static_cast<std::uint64_t>(epoch)));
    epoch_stream.shuffle(train_idx);
    double err_sum = 0;
    double scalar_count = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t stop = std::min(train_idx.size(), start + static_cast<std::size_t>(hp.batch_size));
      std::vector<const seqdata::ScaledRecord*> batch;
      batch.reserve(stop - start);
      double batch_scalars = 0;
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(&data[train_idx[i]]);
        batch_scalars += static_cast<double>(data[train_idx[i]].targets.size());
      }
      auto [loss, grad] = net.loss_and_grad(batch, epoch_stream);
      err_sum += loss * batch_scalars;
      scalar_count += batch_scalars;

      ++step;
      m = hp.beta1 * m + (1.0 - hp.beta1) * grad;
      v = hp.beta2 * v + (1.0 - hp.beta2) * grad.cwiseProduct(grad);
      const double mc = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
      const double vc = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
      theta -= (hp.learning_rate / mc) *
               m.cwiseQuotient(((v / vc).cwiseSqrt().array() + hp.epsilon).matrix());
      net.set_params(theta);
    }
    result.train_trace.push_back(scalar_count > 0 ? err_sum / scalar_count : 0.0);
    const double val_loss = net.eval_loss(val);
    result.val_trace.push_back(val_loss);
    if (val_loss < result.best_val) {
      result.best_val = val_loss;
      best = theta;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= hp.early_stop_patience) {
      break;
    }
  }
  net.set_params(best);
  return result;
}

// Net adapter for the GRU model.
struct GruNet {
  GruModel model;
  double dropout_rate = 0.2;

  Eigen::VectorXd params() const { return to_flat(model); }
  void set_params(const Eigen::VectorXd& v) { from_flat(model, v); }

  std::pair<double, Eigen::VectorXd> loss_and_grad(
      const std::vector<const seqdata::ScaledRecord*>& batch, rng::Stream& stream) {
    std::vector<Eigen::VectorXd> masks;
    masks.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      masks.push_back(dropout_mask(model.hidden_size(), dropout_rate, stream));
    BatchGrad bg = nets::loss_and_grad(model, batch, masks);
    return {bg.loss, std::move(bg.grad)};
  }

  double eval_loss(const std::vector<const seqdata::ScaledRecord*>& batch) const {
    double err = 0;
    double count = 0;
    for (const auto* rec : batch) {
      Eigen::VectorXd out = predict(model, rec->steps);
      err += (out - rec->targets).cwiseAbs().sum();
      count += static_cast<double>(rec->targets.size());
    }
    return count > 0 ? err / count : 0.0;
  }
};

// ---------------------------------------------------------------------------
// Trained-model bundle and pool-level training entry point.

struct TrainedModel {
  GruModel model;
  seqdata::ScalingStats scaling;
  std::vector<double> train_trace, val_trace;
  int best_epoch = -1;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;  // degenerate scaling dimensions, if any
};

struct TrainSpec {
  seqdata::Config config = seqdata::Config::recursive;
  int interval_f = 1;
  int horizon = 1;
  bool shifted = false;
  int hidden = 10;
  bool include_der_ev = false;
  Hyperparams hp;
};

inline TrainedModel train_gru(const std::vector<seqdata::SequenceRecord>& pool,
                              const TrainSpec& spec) {
  if (pool.empty()) throw std::invalid_argument("train_gru: empty training pool");
  const std::size_t t_in = pool.front().steps.size();
  const std::size_t want_targets = spec.config == seqdata::Config::multiyear
                                       ? static_cast<std::size_t>(spec.horizon)
                                       : 1u;
  for (const auto& rec : pool) {
    if (rec.config != spec.config)
      throw std::invalid_argument("train_gru: record form does not match the requested model");
    if (spec.config == seqdata::Config::interval && rec.interval_f != spec.interval_f)
      throw std::invalid_argument("train_gru: interval record has the wrong year gap");
    if (rec.steps.size() != t_in)
      throw std::invalid_argument("train_gru: records disagree on input window length");
    if (rec.targets.size() != want_targets)
      throw std::invalid_argument("train_gru: record target count does not match the model");
  }

  seqdata::ScalingFit sf = seqdata::fit_scaling(pool, spec.include_der_ev);
  std::vector<seqdata::ScaledRecord> scaled = seqdata::scale_records(sf.stats, pool);

  GruNet net;
  net.model = init_model(spec.config, sf.stats.feature_size(), spec.hidden, spec.horizon,
                         spec.interval_f, spec.shifted, static_cast<int>(t_in), spec.hp.seed);
  net.dropout_rate = spec.hp.dropout_rate;
  FitResult fr = fit(net, scaled, spec.hp);

  TrainedModel tm;
  tm.model = std::move(net.model);
  tm.scaling = sf.stats;
  tm.train_trace = std::move(fr.train_trace);
  tm.val_trace = std::move(fr.val_trace);
  tm.best_epoch = fr.best_epoch;
  tm.seed = spec.hp.seed;
  tm.warnings = std::move(sf.warnings);
  return tm;
}

// All models needed to forecast one cluster-season group: the one-year
// model (which also serves the interval form's first year), one interval
// model per additional year gap, and the whole-window model.
struct ModelSet {
  TrainedModel recursive;
  std::vector<TrainedModel> interval;  // index 0 holds the 2-year-gap model
  TrainedModel multiyear;
  int horizon = 3;

  const TrainedModel& interval_model(int f) const {
    if (f <= 1) return recursive;
    const std::size_t at = static_cast<std::size_t>(f - 2);
    if (at >= interval.size())
      throw std::out_of_range("interval_model: no model for gap " + std::to_string(f));
    return interval[at];
  }
};

// ---------------------------------------------------------------------------
// Inference. All functions take a feeder history already extended with the
// future years' expected drivers (peaks there may be NaN placeholders) and
// an area history covering the horizon. Outputs are in amperes, clamped at
// zero.

namespace detail {
inline std::vector<Eigen::VectorXd> scaled_window(const TrainedModel& tm,
                                                  const domain::FeederHistory& feeder,
                                                  const domain::AreaHistory& area,
                                                  const features::PcaModel& pca,
                                                  int last_input_year) {
  std::vector<Eigen::VectorXd> steps;
  steps.reserve(static_cast<std::size_t>(tm.model.t_in));
  for (int y = last_input_year - tm.model.t_in + 1; y <= last_input_year; ++y)
    steps.push_back(seqdata::scale_features(tm.scaling, features::assemble_features(feeder, area, pca, y)));
  return steps;
}
}  // namespace detail

// One year at a time, feeding each forecast back as the next year's prior
// peak.
inline std::vector<std::pair<int, double>> forecast_recursive(
    const TrainedModel& tm, domain::FeederHistory feeder, const domain::AreaHistory& area,
    const features::PcaModel& pca, int last_actual_year, int horizon) {
  if (horizon < 1) throw std::invalid_argument("forecast_recursive: horizon must be >= 1");
  if (!feeder.has_year(last_actual_year))
    throw std::invalid_argument("forecast_recursive: history does not contain the base year");
  std::vector<std::pair<int, double>> out;
  for (int k = 1; k <= horizon; ++k) {
    const int year = last_actual_year + k;
    Eigen::VectorXd pred = predict(tm.model, detail::scaled_window(tm, feeder, area, pca, year));
    const double amps = std::max(0.0, seqdata::invert_target(tm.scaling, pred(0)));
    feeder.records[static_cast<std::size_t>(year - feeder.first_year())].peak_demand = amps;
    out.emplace_back(year, amps);
  }
  return out;
}

// Each year forecast directly from the last actual year: gap-1 uses the
// one-year model, wider gaps use their own models with the summed final
// step.
inline std::vector<std::pair<int, double>> forecast_interval(
    const ModelSet& ms, const domain::FeederHistory& feeder, const domain::AreaHistory& area,
    const features::PcaModel& pca, int last_actual_year, int horizon) {
  if (horizon < 1) throw std::invalid_argument("forecast_interval: horizon must be >= 1");
  std::vector<std::pair<int, double>> out;
  for (int f = 1; f <= horizon; ++f) {
    const TrainedModel& tm = ms.interval_model(f);
    const int year = last_actual_year + f;
    std::vector<Eigen::VectorXd> steps;
    if (f == 1) {
      steps = detail::scaled_window(tm, feeder, area, pca, year);
    } else {
      steps.reserve(static_cast<std::size_t>(tm.model.t_in));
      for (int y = last_actual_year - tm.model.t_in + 2; y <= last_actual_year; ++y)
        steps.push_back(seqdata::scale_features(tm.scaling, features::assemble_features(feeder, area, pca, y)));
      steps.push_back(seqdata::scale_features(
          tm.scaling, features::sum_interval_features(feeder, area, pca, last_actual_year, year)));
    }
    Eigen::VectorXd pred = predict(tm.model, steps);
    out.emplace_back(year, std::max(0.0, seqdata::invert_target(tm.scaling, pred(0))));
  }
  return out;
}

// The whole window in one pass; only the first future year's drivers are
// consumed.
inline std::vector<std::pair<int, double>> forecast_multiyear(
    const TrainedModel& tm, const domain::FeederHistory& feeder, const domain::AreaHistory& area,
    const features::PcaModel& pca, int last_actual_year, int horizon) {
  if (horizon != tm.model.horizon)
    throw std::invalid_argument("forecast_multiyear: model emits " +
                                std::to_string(tm.model.horizon) + " years, not " +
                                std::to_string(horizon));
  Eigen::VectorXd pred =
      predict(tm.model, detail::scaled_window(tm, feeder, area, pca, last_actual_year + 1));
  std::vector<std::pair<int, double>> out;
  for (int k = 0; k < horizon; ++k)
    out.emplace_back(last_actual_year + 1 + k,
                     std::max(0.0, seqdata::invert_target(tm.scaling, pred(k))));
  return out;
}

inline std::vector<std::pair<int, double>> forecast_config(
    const ModelSet& ms, seqdata::Config config, const domain::FeederHistory& feeder,
    const domain::AreaHistory& area, const features::PcaModel& pca, int last_actual_year,
    int horizon) {
  switch (config) {
    case seqdata::Config::recursive:
      return forecast_recursive(ms.recursive, feeder, area, pca, last_actual_year, horizon);
    case seqdata::Config::interval:
      return forecast_interval(ms, feeder, area, pca, last_actual_year, horizon);
    case seqdata::Config::multiyear:
      return forecast_multiyear(ms.multiyear, feeder, area, pca, last_actual_year, horizon);
  }
  throw std::invalid_argument("forecast_config: unknown configuration");
}

}  // namespace feedercast::nets
