#pragma once

// Plain-text model files with exact round-trip.
//
// Format: a header line `feedercast_model <gru|fnn>`, followed by `key value`
// lines for the model's settings, `matrix <name> <rows> <cols>` blocks with
// one row per line, `vector <name> <size>` blocks with all entries on one
// line, the scaling block, and a closing `end`. Numbers are written with
// shortest round-trip formatting, so save -> load -> save is byte-identical.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "feedercast/baselines.hpp"
#include "feedercast/csv.hpp"
#include "feedercast/features.hpp"
#include "feedercast/nets.hpp"
#include "feedercast/seqdata.hpp"

namespace feedercast::modelio {

namespace detail {

inline void put_matrix(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << csv::format_double(m(r, c));
    }
    out << '\n';
  }
}

inline void put_vector(std::ostream& out, const char* name, const Eigen::VectorXd& v) {
  out << "vector " << name << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << csv::format_double(v(i));
  }
  out << '\n';
}

inline void put_scaling(std::ostream& out, const seqdata::ScalingStats& s) {
  out << "include_der_ev " << (s.include_der_ev ? 1 : 0) << '\n';
  put_vector(out, "feat_min", s.feat_min);
  put_vector(out, "feat_max", s.feat_max);
  out << "target " << csv::format_double(s.target_min) << ' '
      << csv::format_double(s.target_max) << '\n';
}

// Whitespace token reader with file-context errors.
class Reader {
 public:
  Reader(std::istream& in, std::string context) : in_(in), context_(std::move(context)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) fail("unexpected end of file");
    return w;
  }

  void expect(const std::string& want) {
    const std::string got = word();
    if (got != want) fail("expected '" + want + "', got '" + got + "'");
  }

  long long integer() {
    long long v = 0;
    if (!csv::parse_int(word(), v)) fail("expected an integer");
    return v;
  }

  std::uint64_t unsigned_integer() {
    const std::string w = word();
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || p != w.data() + w.size()) fail("expected an unsigned integer");
    return v;
  }

  double number() {
    double v = 0;
    if (!csv::parse_double(word(), v)) fail("expected a number");
    return v;
  }

  Eigen::MatrixXd matrix(const std::string& name) {
    expect("matrix");
    expect(name);
    const long long rows = integer(), cols = integer();
    if (rows < 1 || cols < 1 || rows > 100000 || cols > 100000) fail("bad shape for " + name);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = number();
    return m;
  }

  Eigen::VectorXd vector(const std::string& name) {
    expect("vector");
    expect(name);
    const long long size = integer();
    if (size < 1 || size > 100000) fail("bad size for " + name);
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = number();
    return v;
  }

  seqdata::ScalingStats scaling() {
    seqdata::ScalingStats s;
    expect("include_der_ev");
    s.include_der_ev = integer() != 0;
    s.feat_min = vector("feat_min");
    s.feat_max = vector("feat_max");
    expect("target");
    s.target_min = number();
    s.target_max = number();
    if (s.feat_min.size() != s.feat_max.size()) fail("scaling bound sizes differ");
    return s;
  }

  [[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error(context_ + ": " + what);
  }

 private:
  std::istream& in_;
  std::string context_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Sequence models.

inline std::string format_model(const nets::TrainedModel& tm) {
  std::ostringstream out;
  out << "feedercast_model gru\n";
  out << "config " << seqdata::config_name(tm.model.config) << '\n';
  out << "interval_f " << tm.model.interval_f << '\n';
  out << "horizon " << tm.model.horizon << '\n';
  out << "shifted " << (tm.model.shifted ? 1 : 0) << '\n';
  out << "t_in " << tm.model.t_in << '\n';
  out << "seed " << tm.seed << '\n';
  detail::put_matrix(out, "W_r", tm.model.gru.W_r);
  detail::put_matrix(out, "W_u", tm.model.gru.W_u);
  detail::put_matrix(out, "W_h", tm.model.gru.W_h);
  detail::put_vector(out, "b_r", tm.model.gru.b_r);
  detail::put_vector(out, "b_u", tm.model.gru.b_u);
  detail::put_vector(out, "b_h", tm.model.gru.b_h);
  detail::put_matrix(out, "W_o", tm.model.head.W_o);
  detail::put_vector(out, "b_o", tm.model.head.b_o);
  detail::put_scaling(out, tm.scaling);
  out << "end\n";
  return out.str();
}

inline void save_model(const std::string& path, const nets::TrainedModel& tm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << format_model(tm);
}

inline nets::TrainedModel parse_model(std::istream& in, const std::string& context) {
  detail::Reader r(in, context);
  r.expect("feedercast_model");
  r.expect("gru");
  nets::TrainedModel tm;
  r.expect("config");
  if (!seqdata::parse_config(r.word(), tm.model.config)) r.fail("unknown configuration");
  r.expect("interval_f");
  tm.model.interval_f = static_cast<int>(r.integer());
  r.expect("horizon");
  tm.model.horizon = static_cast<int>(r.integer());
  r.expect("shifted");
  tm.model.shifted = r.integer() != 0;
  r.expect("t_in");
  tm.model.t_in = static_cast<int>(r.integer());
  r.expect("seed");
  tm.seed = r.unsigned_integer();
  tm.model.gru.W_r = r.matrix("W_r");
  tm.model.gru.W_u = r.matrix("W_u");
  tm.model.gru.W_h = r.matrix("W_h");
  tm.model.gru.b_r = r.vector("b_r");
  tm.model.gru.b_u = r.vector("b_u");
  tm.model.gru.b_h = r.vector("b_h");
  tm.model.head.W_o = r.matrix("W_o");
  tm.model.head.b_o = r.vector("b_o");
  tm.scaling = r.scaling();
  r.expect("end");
  const int H = tm.model.gru.hidden_size();
  if (tm.model.gru.W_u.rows() != H || tm.model.gru.W_h.rows() != H ||
      tm.model.gru.W_u.cols() != tm.model.gru.W_r.cols() ||
      tm.model.gru.W_h.cols() != tm.model.gru.W_r.cols() || tm.model.gru.b_r.size() != H ||
      tm.model.gru.b_u.size() != H || tm.model.gru.b_h.size() != H ||
      tm.model.head.W_o.cols() != H || tm.model.head.b_o.size() != tm.model.head.W_o.rows() ||
      tm.model.input_size() != tm.scaling.feature_size())
    r.fail("inconsistent parameter shapes");
  return tm;
}

inline nets::TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  return parse_model(in, path);
}

// ---------------------------------------------------------------------------
// Feedforward baselines.

inline std::string format_fnn(const baselines::TrainedFnn& tf) {
  std::ostringstream out;
  out << "feedercast_model fnn\n";
  out << "kind " << baselines::fnn_name(tf.kind) << '\n';
  out << "t_in " << tf.t_in << '\n';
  out << "horizon " << tf.horizon << '\n';
  out << "seed " << tf.seed << '\n';
  detail::put_matrix(out, "W1", tf.mlp.W1);
  detail::put_matrix(out, "W2", tf.mlp.W2);
  detail::put_matrix(out, "W3", tf.mlp.W3);
  detail::put_vector(out, "b1", tf.mlp.b1);
  detail::put_vector(out, "b2", tf.mlp.b2);
  detail::put_vector(out, "b3", tf.mlp.b3);
  detail::put_scaling(out, tf.scaling);
  out << "end\n";
  return out.str();
}

inline void save_fnn(const std::string& path, const baselines::TrainedFnn& tf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << format_fnn(tf);
}

inline baselines::TrainedFnn parse_fnn(std::istream& in, const std::string& context) {
  detail::Reader r(in, context);
  r.expect("feedercast_model");
  r.expect("fnn");
  baselines::TrainedFnn tf;
  r.expect("kind");
  if (!baselines::parse_fnn(r.word(), tf.kind)) r.fail("unknown network kind");
  r.expect("t_in");
  tf.t_in = static_cast<int>(r.integer());
  r.expect("horizon");
  tf.horizon = static_cast<int>(r.integer());
  r.expect("seed");
  tf.seed = r.unsigned_integer();
  tf.mlp.W1 = r.matrix("W1");
  tf.mlp.W2 = r.matrix("W2");
  tf.mlp.W3 = r.matrix("W3");
  tf.mlp.b1 = r.vector("b1");
  tf.mlp.b2 = r.vector("b2");
  tf.mlp.b3 = r.vector("b3");
  tf.scaling = r.scaling();
  r.expect("end");
  if (tf.mlp.W2.cols() != tf.mlp.W1.rows() || tf.mlp.W3.cols() != tf.mlp.W2.rows() ||
      tf.mlp.b1.size() != tf.mlp.W1.rows() || tf.mlp.b2.size() != tf.mlp.W2.rows() ||
      tf.mlp.b3.size() != tf.mlp.W3.rows())
    r.fail("inconsistent parameter shapes");
  return tf;
}

inline baselines::TrainedFnn load_fnn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  return parse_fnn(in, path);
}

// ---------------------------------------------------------------------------
// Fitted area-feature projection.

inline std::string format_pca(const features::PcaModel& pca) {
  std::ostringstream out;
  out << "feedercast_model pca\n";
  out << "inputs " << pca.mean.size() << '\n';
  out << "outputs " << pca.n_components() << '\n';
  detail::put_vector(out, "mean", pca.mean);
  detail::put_vector(out, "stddev", pca.stddev);
  detail::put_matrix(out, "components", pca.components);
  detail::put_vector(out, "explained", pca.explained_variance);
  out << "end\n";
  return out.str();
}

inline void save_pca(const std::string& path, const features::PcaModel& pca) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write projection file '" + path + "'");
  out << format_pca(pca);
}

inline features::PcaModel parse_pca(std::istream& in, const std::string& context) {
  detail::Reader r(in, context);
  r.expect("feedercast_model");
  r.expect("pca");
  r.expect("inputs");
  const long long inputs = r.integer();
  r.expect("outputs");
  const long long outputs = r.integer();
  features::PcaModel pca;
  pca.mean = r.vector("mean");
  pca.stddev = r.vector("stddev");
  pca.components = r.matrix("components");
  pca.explained_variance = r.vector("explained");
  r.expect("end");
  if (pca.mean.size() != inputs || pca.stddev.size() != inputs ||
      pca.components.cols() != inputs || pca.components.rows() != outputs ||
      pca.explained_variance.size() != outputs)
    r.fail("inconsistent projection shapes");
  return pca;
}

inline features::PcaModel load_pca(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open projection file '" + path + "'");
  return parse_pca(in, path);
}

}  // namespace feedercast::modelio
