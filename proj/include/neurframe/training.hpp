#pragma once

// Smoothness, boundary-alignment and feature-alignment losses over the
// preprocessed mesh, and the Adam training loop.

#include "neurframe/dual_graph.hpp"
#include "neurframe/features.hpp"
#include "neurframe/frame.hpp"
#include "neurframe/mlp.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <numeric>

namespace neurframe {

struct TrainConfig {
  double lambda_s = 1.0;
  double lambda_b = 20.0;
  double lambda_f = 1.0;
  double sigma = 10.0;  // feature falloff exp(-sigma * d)
  long iterations = 10000;
  double learning_rate = 5e-5;
  std::uint64_t seed = 0;
  // 0 = full batch.
  long batch_edges = 0;
  long batch_boundary = 0;
  long batch_feature = 0;
  long log_every = 1;
  long checkpoint_every = 0;
  MlpShape network;

  void validate() const {
    if (!(lambda_s >= 0 && lambda_b >= 0 && lambda_f >= 0)) throw InputError("loss weights must be nonnegative");
    if (!(sigma >= 0)) throw InputError("sigma must be nonnegative");
    if (iterations < 0) throw InputError("iterations must be nonnegative");
    if (!(learning_rate > 0)) throw InputError("learning_rate must be positive");
    if (batch_edges < 0 || batch_boundary < 0 || batch_feature < 0) throw InputError("batch sizes must be nonnegative");
    if (log_every < 1) throw InputError("log_every must be at least 1");
    if (checkpoint_every < 0) throw InputError("checkpoint_every must be nonnegative");
    if (network.width < 1 || network.hidden_layers < 0 || !(network.omega0 > 0)) throw InputError("invalid network shape");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"lambda_s", c.lambda_s},
          {"lambda_b", c.lambda_b},
          {"lambda_f", c.lambda_f},
          {"sigma", c.sigma},
          {"iterations", c.iterations},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"batch_edges", c.batch_edges},
          {"batch_boundary", c.batch_boundary},
          {"batch_feature", c.batch_feature},
          {"log_every", c.log_every},
          {"checkpoint_every", c.checkpoint_every},
          {"width", c.network.width},
          {"hidden_layers", c.network.hidden_layers},
          {"omega0", c.network.omega0}};
}

/// Overlays the keys present in `j` onto `c`. Unknown keys are an error.
inline void apply_json(TrainConfig& c, const nlohmann::json& j, const std::string& source = "<config>") {
  if (!j.is_object()) throw InputError(source + ": config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "lambda_s") c.lambda_s = value.get<double>();
      else if (key == "lambda_b") c.lambda_b = value.get<double>();
      else if (key == "lambda_f") c.lambda_f = value.get<double>();
      else if (key == "sigma") c.sigma = value.get<double>();
      else if (key == "iterations") c.iterations = value.get<long>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "batch_edges") c.batch_edges = value.get<long>();
      else if (key == "batch_boundary") c.batch_boundary = value.get<long>();
      else if (key == "batch_feature") c.batch_feature = value.get<long>();
      else if (key == "log_every") c.log_every = value.get<long>();
      else if (key == "checkpoint_every") c.checkpoint_every = value.get<long>();
      else if (key == "width") c.network.width = value.get<int>();
      else if (key == "hidden_layers") c.network.hidden_layers = value.get<int>();
      else if (key == "omega0") c.network.omega0 = value.get<double>();
      else throw InputError(source + ": unknown config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw InputError(source + ": bad value for '" + key + "': " + e.what());
    }
  }
  c.validate();
}

inline TrainConfig load_train_config(const std::string& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  apply_json(base, j, path);
  return base;
}

inline void save_train_config(const TrainConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << to_json(c).dump(2) << "\n";
}

/// Constants the losses need, computed once per mesh.
struct TrainingData {
  Points centroids;  // one column per tet
  std::vector<DualEdge> edges;
  std::vector<int> boundary_tets;
  ShBatch boundary_rows;  // alignment row of each boundary normal
  bool has_features = false;
  ShBatch feature_rows;            // per tet: alignment row of the nearest feature direction
  Points feature_direction;
  Eigen::VectorXd feature_weight;  // per tet: exp(-sigma * distance)
  Eigen::VectorXd feature_distance;
};

/// Expects a normalized mesh whose tets touch at most one boundary face.
inline TrainingData prepare_training_data(const TetMesh& m, const FeatureSet& features, double sigma) {
  TrainingData d;
  const DualGraph g = build_dual_graph(m);
  const BoundarySamples b = build_boundary_samples(m);
  const int n = static_cast<int>(m.tets.size());
  d.centroids.resize(3, n);
  for (int t = 0; t < n; ++t) d.centroids.col(t) = g.centroids[t];
  d.edges = g.edges;
  d.boundary_tets = b.tets;
  d.boundary_rows.resize(9, static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) d.boundary_rows.col(i) = alignment_row(b.normals[i]);
  if (!features.empty()) {
    d.has_features = true;
    const FeatureIndex index(features);
    d.feature_rows.resize(9, n);
    d.feature_direction.resize(3, n);
    d.feature_weight.resize(n);
    d.feature_distance.resize(n);
    for (int t = 0; t < n; ++t) {
      const FeatureHit hit = *index.nearest(g.centroids[t]);
      d.feature_rows.col(t) = alignment_row(hit.direction);
      d.feature_direction.col(t) = hit.direction;
      d.feature_distance(t) = hit.distance;
      d.feature_weight(t) = std::exp(-sigma * hit.distance);
    }
  }
  return d;
}

struct LossReport {
  long iteration = 0;
  double smoothness = 0;
  double boundary = 0;
  double feature = 0;
  double total = 0;
};

/// Sample indices per term; an empty list means the full set.
struct LossSubsets {
  std::vector<int> edges;
  std::vector<int> boundary;
  std::vector<int> feature;
};

namespace detail {

inline std::vector<int> resolve(const std::vector<int>& subset, std::size_t full) {
  if (!subset.empty()) return subset;
  std::vector<int> all(full);
  std::iota(all.begin(), all.end(), 0);
  return all;
}

}  // namespace detail

/// Loss terms on field values q (columns indexed through `slot`: tet -> column).
/// When dq is given, accumulates dL/dq of the weighted total into it.
inline LossReport evaluate_losses(const ShBatch& q, const std::vector<int>& slot, const TrainingData& d,
                                  const TrainConfig& c, const LossSubsets& sub, ShBatch* dq) {
  LossReport r;
  const double root = sh::kAlignedZonal;

  if (const auto edges = detail::resolve(sub.edges, d.edges.size()); !edges.empty()) {
    const double inv = 1.0 / static_cast<double>(edges.size());
    for (int e : edges) {
      const DualEdge& de = d.edges[e];
      const int a = slot[de.a], b = slot[de.b];
      const ShVec diff = q.col(a) - q.col(b);
      r.smoothness += de.weight * diff.squaredNorm();
      if (dq) {
        const ShVec g = (2.0 * c.lambda_s * de.weight * inv) * diff;
        dq->col(a) += g;
        dq->col(b) -= g;
      }
    }
    r.smoothness *= inv;
  }

  if (!d.boundary_tets.empty()) {
    const auto samples = detail::resolve(sub.boundary, d.boundary_tets.size());
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (int s : samples) {
      const int k = slot[d.boundary_tets[s]];
      const double res = root - d.boundary_rows.col(s).dot(q.col(k));
      r.boundary += res * res;
      if (dq) dq->col(k) -= (2.0 * c.lambda_b * res * inv) * d.boundary_rows.col(s);
    }
    r.boundary *= inv;
  }

  if (d.has_features) {
    const auto samples = detail::resolve(sub.feature, static_cast<std::size_t>(d.centroids.cols()));
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (int t : samples) {
      const int k = slot[t];
      const double res = root - d.feature_rows.col(t).dot(q.col(k));
      r.feature += d.feature_weight(t) * res * res;
      if (dq) dq->col(k) -= (2.0 * c.lambda_f * d.feature_weight(t) * res * inv) * d.feature_rows.col(t);
    }
    r.feature *= inv;
  }

  r.total = c.lambda_s * r.smoothness + c.lambda_b * r.boundary + c.lambda_f * r.feature;
  return r;
}

struct LossGradient {
  LossReport report;
  MlpParams gradient;
};

/// Weighted total loss and its parameter gradient, with one forward and one
/// backward pass over the tets the subsets touch.
inline LossGradient total_loss(const MlpParams& p, const TrainingData& d, const TrainConfig& c,
                               const LossSubsets& sub = {}) {
  const int n = static_cast<int>(d.centroids.cols());
  std::vector<char> used(n, 0);
  if (d.edges.empty() && c.lambda_s > 0) throw InputError("smoothness term needs at least one dual edge");
  if (d.boundary_tets.empty() && c.lambda_b > 0) throw InputError("boundary term needs at least one boundary sample");
  for (int e : detail::resolve(sub.edges, d.edges.size())) used[d.edges[e].a] = used[d.edges[e].b] = 1;
  for (int s : detail::resolve(sub.boundary, d.boundary_tets.size())) used[d.boundary_tets[s]] = 1;
  if (d.has_features)
    for (int t : detail::resolve(sub.feature, n)) used[t] = 1;
  std::vector<int> slot(n, -1), tets;
  for (int t = 0; t < n; ++t)
    if (used[t]) {
      slot[t] = static_cast<int>(tets.size());
      tets.push_back(t);
    }
  Points x(3, static_cast<Eigen::Index>(tets.size()));
  for (std::size_t i = 0; i < tets.size(); ++i) x.col(i) = d.centroids.col(tets[i]);

  const ForwardPass f = forward(p, x);
  ShBatch dq = ShBatch::Zero(9, x.cols());
  LossGradient out;
  out.report = evaluate_losses(f.q, slot, d, c, sub, &dq);
  out.gradient = backward(p, f, dq);
  return out;
}

/// |align_residual| at every boundary sample.
inline Eigen::VectorXd boundary_residuals(const MlpParams& p, const TrainingData& d) {
  Points x(3, static_cast<Eigen::Index>(d.boundary_tets.size()));
  for (std::size_t i = 0; i < d.boundary_tets.size(); ++i) x.col(i) = d.centroids.col(d.boundary_tets[i]);
  const ShBatch q = evaluate(p, x);
  Eigen::VectorXd r(q.cols());
  for (Eigen::Index i = 0; i < q.cols(); ++i) r(i) = std::abs(sh::kAlignedZonal - d.boundary_rows.col(i).dot(q.col(i)));
  return r;
}

struct TrainResult {
  MlpParams params;
  std::vector<LossReport> history;
};

namespace detail {

// k distinct indices from [0, n), sorted so reductions run in a fixed order.
template <class Engine>
std::vector<int> sample_subset(Engine& rng, std::size_t n, long k) {
  if (k <= 0 || static_cast<std::size_t>(k) >= n) return {};
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (long i = 0; i < k; ++i) std::swap(all[i], all[i + uniform_index(rng, n - i)]);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace detail

inline constexpr long kDivergenceGrace = 500;
inline constexpr double kDivergenceFactor = 10.0;

/// Throws when the loss is NaN/Inf, or past the grace period exceeds 10x its initial value.
inline void check_divergence(long iteration, double total, double initial) {
  if (!std::isfinite(total)) throw DivergenceError("loss is not finite at iteration " + std::to_string(iteration));
  if (iteration >= kDivergenceGrace && total > kDivergenceFactor * initial)
    throw DivergenceError("loss " + std::to_string(total) + " exceeds 10x its initial value " +
                          std::to_string(initial) + " at iteration " + std::to_string(iteration));
}

using CheckpointCallback = std::function<void(long iteration, const MlpParams&)>;
using ProgressCallback = std::function<void(const LossReport&)>;

/// Adam on the total loss from a seeded SIREN initialization. Each history
/// entry is the loss at the parameters before that iteration's update.
inline TrainResult train(const TrainingData& d, const TrainConfig& c, const CheckpointCallback& on_checkpoint = {},
                         const ProgressCallback& on_progress = {}) {
  c.validate();
  TrainResult res;
  res.params = init_params(c.network, c.seed);
  AdamState adam = AdamState::for_params(res.params);
  std::mt19937_64 batch_rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
  double initial = 0;
  for (long it = 0; it < c.iterations; ++it) {
    LossSubsets sub;
    sub.edges = detail::sample_subset(batch_rng, d.edges.size(), c.batch_edges);
    sub.boundary = detail::sample_subset(batch_rng, d.boundary_tets.size(), c.batch_boundary);
    if (d.has_features) sub.feature = detail::sample_subset(batch_rng, d.centroids.cols(), c.batch_feature);
    LossGradient lg;
    try {
      lg = total_loss(res.params, d, c, sub);
    } catch (const NumericError& e) {
      throw DivergenceError("iteration " + std::to_string(it) + ": " + e.what());
    }
    lg.report.iteration = it;
    const double total = lg.report.total;
    if (it == 0) initial = total;
    check_divergence(it, total, initial);
    if (it % c.log_every == 0) {
      res.history.push_back(lg.report);
      if (on_progress) on_progress(lg.report);
    }
    try {
      adam_step(res.params, lg.gradient, adam, c.learning_rate);
    } catch (const NumericError& e) {
      throw DivergenceError("iteration " + std::to_string(it) + ": " + e.what());
    }
    if (on_checkpoint && c.checkpoint_every > 0 && (it + 1) % c.checkpoint_every == 0 && it + 1 < c.iterations)
      on_checkpoint(it + 1, res.params);
  }
  return res;
}

inline void write_loss_csv(const std::vector<LossReport>& history, std::ostream& out) {
  out << "iter,L_S,L_B,L_F,total\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.smoothness, r.boundary, r.feature,
                  r.total);
    out << buf;
  }
}

inline std::vector<LossReport> read_loss_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t no = 1;
  if (!std::getline(in, line) || line.rfind("iter,L_S,L_B,L_F,total", 0) != 0)
    throw ParseError(source, 1, "expected header iter,L_S,L_B,L_F,total");
  std::vector<LossReport> out;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    LossReport r;
    if (std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf,%lf", &r.iteration, &r.smoothness, &r.boundary, &r.feature,
                    &r.total) != 5)
      throw ParseError(source, no, "expected 5 comma-separated values");
    out.push_back(r);
  }
  return out;
}

}  // namespace neurframe
