#pragma once

// Sinusoidal MLP mapping points to unit 9-vectors, with hand-written reverse
// mode and Adam. Double precision throughout.

#include "neurframe/core.hpp"
#include "neurframe/tet_mesh.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <vector>

namespace neurframe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Points = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using ShBatch = Eigen::Matrix<double, 9, Eigen::Dynamic>;

struct MlpShape {
  int input = 3;
  int width = 256;
  int hidden_layers = 4;  // width -> width layers after the first
  int output = 9;
  double omega0 = 30.0;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  double omega0 = 30.0;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Same shapes, all zeros (gradient accumulator).
  MlpParams zeros_like() const {
    MlpParams z;
    z.omega0 = omega0;
    for (const auto& l : layers) z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    return z;
  }

  bool operator==(const MlpParams& o) const {
    if (omega0 != o.omega0 || layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto &a = layers[i], &b = o.layers[i];
      if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() || a.bias.size() != b.bias.size())
        return false;
      if (a.weight != b.weight || a.bias != b.bias) return false;
    }
    return true;
  }
};

/// Flat views in storage order: per layer, weights (column-major) then bias.
inline std::vector<double*> parameter_pointers(MlpParams& p) {
  std::vector<double*> out;
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
  }
  return out;
}

/// SIREN initialization: first layer U(±1/fan_in), later layers
/// U(±sqrt(6/fan_in)/omega0), biases U(±1/sqrt(fan_in)).
inline MlpParams init_params(const MlpShape& shape, std::uint64_t seed) {
  if (shape.input < 1 || shape.width < 1 || shape.hidden_layers < 0 || shape.output < 1 || !(shape.omega0 > 0))
    throw InputError("invalid network shape");
  std::mt19937_64 rng(seed);
  MlpParams p;
  p.omega0 = shape.omega0;
  std::vector<std::pair<int, int>> dims{{shape.width, shape.input}};
  for (int i = 0; i < shape.hidden_layers; ++i) dims.emplace_back(shape.width, shape.width);
  dims.emplace_back(shape.output, shape.width);
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const auto [out, in] = dims[l];
    const double w = l == 0 ? 1.0 / in : std::sqrt(6.0 / in) / shape.omega0;
    const double b = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer{Matrix(out, in), Vector(out)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = uniform(rng, -w, w);
    for (int r = 0; r < out; ++r) layer.bias(r) = uniform(rng, -b, b);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

/// Everything backward() needs.
struct ForwardPass {
  std::vector<Matrix> inputs;   // input to layer l
  std::vector<Matrix> cosines;  // cos(omega0 * z_l) for sine layers
  ShBatch raw;
  ShBatch q;
  Eigen::RowVectorXd norms;
};

inline constexpr double kDegenerateOutput = 1e-12;

inline ForwardPass forward(const MlpParams& p, const Points& x, bool record = true) {
  if (p.layers.empty() || p.layers.back().weight.rows() != 9) throw InputError("network must output 9 coefficients");
  if (!x.allFinite()) throw InputError("non-finite query point");
  ForwardPass f;
  Matrix a = x;
  const std::size_t last = p.layers.size() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    Matrix z = p.layers[l].weight * a;
    z.colwise() += p.layers[l].bias;
    z *= p.omega0;
    if (record) {
      f.inputs.push_back(std::move(a));
      f.cosines.push_back(z.array().cos().matrix());
    }
    a = z.array().sin().matrix();
  }
  f.raw = p.layers[last].weight * a;
  f.raw.colwise() += p.layers[last].bias;
  if (record) f.inputs.push_back(std::move(a));
  f.norms = f.raw.colwise().norm();
  for (Eigen::Index i = 0; i < f.norms.size(); ++i)
    if (!(f.norms(i) >= kDegenerateOutput))
      throw NumericError("degenerate network output (|r| = " + std::to_string(f.norms(i)) + ") at sample " +
                         std::to_string(i));
  f.q = f.raw.array().rowwise() / f.norms.array();
  return f;
}

/// Normalized outputs only.
inline ShBatch evaluate(const MlpParams& p, const Points& x) { return forward(p, x, false).q; }

/// Parameter gradient of a scalar loss given dL/dq for every sample.
inline MlpParams backward(const MlpParams& p, const ForwardPass& f, const ShBatch& dq) {
  if (f.inputs.size() != p.layers.size()) throw InputError("backward needs a recorded forward pass");
  MlpParams g;
  g.omega0 = p.omega0;
  g.layers.resize(p.layers.size());
  // Through r -> r/|r|: (I - q qᵀ) dq / |r|.
  const Eigen::RowVectorXd radial = (f.q.array() * dq.array()).colwise().sum();
  Matrix delta = ((dq - f.q * radial.asDiagonal()).array().rowwise() / f.norms.array()).matrix();
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    g.layers[l].weight.noalias() = delta * f.inputs[l].transpose();
    g.layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Matrix da = p.layers[l].weight.transpose() * delta;
    delta = (da.array() * f.cosines[l - 1].array() * p.omega0).matrix();
  }
  return g;
}

struct AdamState {
  MlpParams m;
  MlpParams v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const MlpParams& p) { return {p.zeros_like(), p.zeros_like()}; }
};

inline void adam_step(MlpParams& p, const MlpParams& g, AdamState& s, double lr = 5e-5) {
  if (g.layers.size() != p.layers.size()) throw InputError("gradient shape mismatch");
  if (s.m.layers.empty()) s = AdamState::for_params(p);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (!g.layers[l].weight.allFinite()) throw NumericError("non-finite gradient in layer " + std::to_string(l) + " weights");
    if (!g.layers[l].bias.allFinite()) throw NumericError("non-finite gradient in layer " + std::to_string(l) + " bias");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  const auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.eps);
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    update(p.layers[l].weight, g.layers[l].weight, s.m.layers[l].weight, s.v.layers[l].weight);
    update(p.layers[l].bias, g.layers[l].bias, s.m.layers[l].bias, s.v.layers[l].bias);
  }
}

// Checkpoint: little-endian binary.
//   "NFCKPT\0\0", u32 version, f64 omega0, u32 layers, per layer (u32 rows,
//   u32 cols, rows*cols f64 row-major weights, rows f64 bias), f64 scale,
//   3 f64 center, u64 bundle fingerprint.
struct Checkpoint {
  MlpParams params;
  SimilarityTransform transform;
  std::uint64_t bundle_hash = 0;
};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'N', 'F', 'C', 'K', 'P', 'T', 0, 0};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& source) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw InputError(source + ": truncated checkpoint");
  return v;
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& c, std::ostream& out) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<double>(out, c.params.omega0);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.layers.size()));
  for (const auto& l : c.params.layers) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index k = 0; k < l.weight.cols(); ++k) detail::put<double>(out, l.weight(r, k));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) detail::put<double>(out, l.bias(r));
  }
  detail::put<double>(out, c.transform.scale);
  for (int a = 0; a < 3; ++a) detail::put<double>(out, c.transform.center[a]);
  detail::put<std::uint64_t>(out, c.bundle_hash);
}

inline Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<stream>") {
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw InputError(source + ": not a checkpoint file");
  const auto version = detail::get<std::uint32_t>(in, source);
  if (version != kCheckpointVersion) throw InputError(source + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.params.omega0 = detail::get<double>(in, source);
  const auto n = detail::get<std::uint32_t>(in, source);
  if (n < 1 || n > 1024) throw InputError(source + ": bad layer count");
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto rows = detail::get<std::uint32_t>(in, source);
    const auto cols = detail::get<std::uint32_t>(in, source);
    if (rows < 1 || cols < 1 || rows > 65536 || cols > 65536) throw InputError(source + ": bad layer shape");
    if (i > 0 && cols != c.params.layers.back().weight.rows()) throw InputError(source + ": inconsistent layer shapes");
    DenseLayer l{Matrix(rows, cols), Vector(rows)};
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t k = 0; k < cols; ++k) l.weight(r, k) = detail::get<double>(in, source);
    for (std::uint32_t r = 0; r < rows; ++r) l.bias(r) = detail::get<double>(in, source);
    c.params.layers.push_back(std::move(l));
  }
  c.transform.scale = detail::get<double>(in, source);
  for (int a = 0; a < 3; ++a) c.transform.center[a] = detail::get<double>(in, source);
  c.bundle_hash = detail::get<std::uint64_t>(in, source);
  if (c.params.layers.front().weight.cols() != 3 || c.params.layers.back().weight.rows() != 9)
    throw InputError(source + ": network must map 3 inputs to 9 outputs");
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  write_checkpoint(c, out);
  if (!out) throw InputError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return read_checkpoint(in, path);
}

}  // namespace neurframe
