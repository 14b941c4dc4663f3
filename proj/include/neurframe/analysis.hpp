#pragma once

// Consumers of a continuous frame field: per-point frames, singularity
// extraction (continuous and per-edge), streamlines, surface crosses and
// per-tet discretization.

#include "neurframe/mlp.hpp"
#include "neurframe/octahedral.hpp"
#include "neurframe/spatial_grid.hpp"
#include "neurframe/tet_mesh.hpp"

#include <concepts>
#include <functional>
#include <map>
#include <optional>
#include <random>

namespace neurframe {

/// Anything that maps a batch of points (3 x N) to SH coefficients (9 x N).
template <class F>
concept FieldQuery = requires(const F& f, const Points& x) {
  { f.coefficients(x) } -> std::convertible_to<ShBatch>;
};

/// Trained network as a field. Holds a reference; the params must outlive it.
struct NeuralField {
  const MlpParams& params;
  ShBatch coefficients(const Points& x) const { return evaluate(params, x); }
};

/// Closed-form field, one point at a time.
struct AnalyticField {
  std::function<ShVec(const Vec3&)> fn;
  ShBatch coefficients(const Points& x) const {
    ShBatch q(9, x.cols());
    for (Eigen::Index i = 0; i < x.cols(); ++i) q.col(i) = fn(x.col(i));
    return q;
  }
};

struct FrameSample {
  Frame frame;
  bool converged = false;
  double residual = 0;
};

template <FieldQuery F>
std::vector<FrameSample> sample_frames(const F& field, const Points& x) {
  const ShBatch q = field.coefficients(x);
  std::vector<FrameSample> out;
  out.reserve(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const ProjectionResult r = project_to_frame(q.col(i));
    out.push_back({r.frame, r.converged, r.residual});
  }
  return out;
}

/// Point location in a tet mesh, used as the domain of volume queries.
class MeshDomain {
 public:
  explicit MeshDomain(const TetMesh& m) : mesh_(&m) {
    std::tie(lo_, hi_) = m.bounding_box();
    const double extent = (hi_ - lo_).maxCoeff();
    const double cell = std::max(extent / std::cbrt(std::max<double>(1, m.tets.size())), 1e-9);
    grid_ = UniformGrid(lo_, hi_, cell);
    for (int t = 0; t < static_cast<int>(m.tets.size()); ++t) {
      Vec3 a = m.vertices[m.tets[t][0]], b = a;
      for (int k = 1; k < 4; ++k) {
        a = a.cwiseMin(m.vertices[m.tets[t][k]]);
        b = b.cwiseMax(m.vertices[m.tets[t][k]]);
      }
      grid_.insert(t, a, b);
    }
  }

  const Vec3& lo() const { return lo_; }
  const Vec3& hi() const { return hi_; }

  /// Containing tet, or -1.
  int locate(const Vec3& p, double tol = 1e-12) const {
    if (!grid_.inside(p)) return -1;
    for (int t : grid_.bucket(p)) {
      const auto& e = mesh_->tets[t];
      Mat3 m;
      const Vec3 o = mesh_->vertices[e[0]];
      for (int k = 0; k < 3; ++k) m.col(k) = mesh_->vertices[e[k + 1]] - o;
      const Vec3 b = m.partialPivLu().solve(p - o);
      if (b.minCoeff() >= -tol && b.sum() <= 1 + tol) return t;
    }
    return -1;
  }
  bool contains(const Vec3& p) const { return locate(p) >= 0; }

 private:
  const TetMesh* mesh_;
  Vec3 lo_, hi_;
  UniformGrid grid_;
};

// ---------------------------------------------------------------------------
// Continuous singularity extraction: random equilateral triangles, split while
// the loop rotation around the boundary is not the identity.

struct SingularPoint {
  Vec3 position;
  OctaRotation rotation;
  int depth = 0;
};

struct SingularityOptions {
  int seeds = 500;
  double initial_side = 0.1;
  double min_side = 1e-3;
  int max_depth = 8;
  int boundary_samples = 12;  // per triangle, a multiple of 3
  std::uint64_t seed = 0;
};

struct Triangle {
  Vec3 a, b, c;
  int depth = 0;
  double side() const { return (b - a).norm(); }
  Vec3 centroid() const { return (a + b + c) / 3.0; }
};

namespace detail {

/// Uniform position inside the domain's bounding box (rejection on inside), uniform orientation.
template <class Inside>
std::vector<Triangle> seed_triangles(const Vec3& lo, const Vec3& hi, Inside&& inside, const SingularityOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::vector<Triangle> out;
  const double radius = opt.initial_side / std::sqrt(3.0);
  for (int s = 0; s < opt.seeds; ++s) {
    Vec3 c;
    int attempts = 0;
    do {
      for (int a = 0; a < 3; ++a) c[a] = uniform(rng, lo[a], hi[a]);
      if (++attempts > 10000) throw InputError("domain has no interior to seed");
    } while (!inside(c));
    const Mat3 r = random_rotation(rng);
    Vec3 v[3];
    for (int k = 0; k < 3; ++k) {
      const double t = 2.0 * kPi * k / 3.0;
      v[k] = c + radius * (r * Vec3(std::cos(t), std::sin(t), 0.0));
    }
    out.push_back({v[0], v[1], v[2], 0});
  }
  return out;
}

}  // namespace detail

/// Domain is given as a bounding box plus an inside predicate.
template <FieldQuery F, class Inside>
std::vector<SingularPoint> extract_singular_points(const F& field, const Vec3& lo, const Vec3& hi, Inside&& inside,
                                                   const SingularityOptions& opt = {}) {
  if (opt.seeds < 1) throw InputError("singularity extraction needs at least one seed");
  if (opt.boundary_samples < 3 || opt.boundary_samples % 3 != 0)
    throw InputError("boundary sample count must be a positive multiple of 3");
  std::vector<Triangle> level = detail::seed_triangles(lo, hi, inside, opt);
  std::vector<SingularPoint> out;
  const int per_edge = opt.boundary_samples / 3;
  while (!level.empty()) {
    Points x(3, static_cast<Eigen::Index>(level.size() * opt.boundary_samples));
    for (std::size_t t = 0; t < level.size(); ++t) {
      const Vec3 corner[3] = {level[t].a, level[t].b, level[t].c};
      for (int e = 0; e < 3; ++e)
        for (int k = 0; k < per_edge; ++k)
          x.col(t * opt.boundary_samples + e * per_edge + k) =
              corner[e] + (corner[(e + 1) % 3] - corner[e]) * (double(k) / per_edge);
    }
    const std::vector<FrameSample> frames = sample_frames(field, x);
    std::vector<Triangle> next;
    for (std::size_t t = 0; t < level.size(); ++t) {
      std::vector<Frame> loop;
      for (int k = 0; k < opt.boundary_samples; ++k) loop.push_back(frames[t * opt.boundary_samples + k].frame);
      const OctaRotation g = loop_rotation(loop);
      if (g.is_identity()) continue;
      const Triangle& tr = level[t];
      if (tr.depth >= opt.max_depth || tr.side() / 2 < opt.min_side) {
        out.push_back({tr.centroid(), g, tr.depth});
        continue;
      }
      const Vec3 ab = (tr.a + tr.b) / 2, bc = (tr.b + tr.c) / 2, ca = (tr.c + tr.a) / 2;
      const int d = tr.depth + 1;
      next.push_back({tr.a, ab, ca, d});
      next.push_back({ab, tr.b, bc, d});
      next.push_back({ca, bc, tr.c, d});
      next.push_back({bc, ca, ab, d});
    }
    level = std::move(next);
  }
  return out;
}

template <FieldQuery F>
std::vector<SingularPoint> extract_singular_points(const F& field, const MeshDomain& domain,
                                                   const SingularityOptions& opt = {}) {
  return extract_singular_points(field, domain.lo(), domain.hi(), [&](const Vec3& p) { return domain.contains(p); },
                                 opt);
}

// ---------------------------------------------------------------------------
// Per-edge classification of a per-tet field.

using Edge = std::array<int, 2>;

struct SingularEdge {
  Edge edge;
  OctaRotation rotation;
};

struct EdgeClassification {
  std::vector<SingularEdge> singular;
  std::vector<Edge> unclassified;  // boundary edges: their tet ring is open
  std::size_t interior_edges = 0;
};

/// For each interior edge, walks the ring of tets around it and composes the
/// octahedral matchings between consecutive tets.
inline EdgeClassification classify_singular_edges_discrete(const std::vector<Frame>& frames, const TetMesh& m) {
  if (frames.size() != m.tets.size()) throw InputError("need one frame per tet");
  std::map<Edge, std::vector<int>> ring_of;
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t)
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        const int u = m.tets[t][i], v = m.tets[t][j];
        ring_of[{std::min(u, v), std::max(u, v)}].push_back(t);
      }
  EdgeClassification out;
  for (const auto& [edge, tets] : ring_of) {
    // Each tet touches the edge's ring through its two opposite vertices.
    std::map<int, std::vector<int>> by_vertex;
    std::vector<std::array<int, 2>> opposite(tets.size());
    for (std::size_t k = 0; k < tets.size(); ++k) {
      int n = 0;
      for (int w : m.tets[tets[k]])
        if (w != edge[0] && w != edge[1]) opposite[k][n++] = w;
      by_vertex[opposite[k][0]].push_back(static_cast<int>(k));
      by_vertex[opposite[k][1]].push_back(static_cast<int>(k));
    }
    bool open = false;
    for (const auto& [w, ks] : by_vertex)
      if (ks.size() != 2) open = true;
    if (open || tets.size() < 3) {
      out.unclassified.push_back(edge);
      continue;
    }
    ++out.interior_edges;
    std::vector<Frame> loop;
    int cur = 0, via = opposite[0][0];
    for (std::size_t step = 0; step < tets.size(); ++step) {
      loop.push_back(frames[tets[cur]]);
      const int next_vertex = opposite[cur][0] == via ? opposite[cur][1] : opposite[cur][0];
      const auto& ks = by_vertex[next_vertex];
      cur = ks[0] == cur ? ks[1] : ks[0];
      via = next_vertex;
    }
    const OctaRotation g = loop_rotation(loop);
    if (!g.is_identity()) out.singular.push_back({edge, g});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Streamlines.

enum class Termination { DomainExit, MaxSteps, ProjectionFailure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::DomainExit:
      return "domain_exit";
    case Termination::MaxSteps:
      return "max_steps";
    case Termination::ProjectionFailure:
      return "projection_failure";
  }
  return "?";
}

struct Streamline {
  Vec3 seed = Vec3::Zero();
  std::vector<Vec3> points;
  Termination reason = Termination::MaxSteps;
};

struct StreamlineOptions {
  double step = 0.01;
  int max_steps = 2000;
  std::optional<Vec3> initial_direction;
};

/// Signed frame axis with the largest dot product with `previous`; `skip`
/// excludes one axis. Ties go to the lower axis, positive sign first.
inline Vec3 select_axis(const Frame& f, const Vec3& previous, int skip = -1) {
  Vec3 best = Vec3::Zero();
  double best_dot = -1e300;
  for (int i = 0; i < 3; ++i) {
    if (i == skip) continue;
    for (double s : {1.0, -1.0}) {
      const double d = s * f.axis(i).dot(previous);
      if (d > best_dot) {
        best_dot = d;
        best = s * f.axis(i);
      }
    }
  }
  return best;
}

template <FieldQuery F>
FrameSample frame_at(const F& field, const Vec3& p) {
  return sample_frames(field, Points(p))[0];
}

/// Volume streamline: fixed steps along the best-aligned axis until the next
/// point would leave the domain.
template <FieldQuery F, class Inside>
Streamline trace_streamline(const F& field, const Vec3& seed, Inside&& inside, const StreamlineOptions& opt = {}) {
  if (!(opt.step > 0) || opt.max_steps < 0) throw InputError("invalid streamline options");
  Streamline s;
  s.seed = seed;
  if (!inside(seed)) {
    s.reason = Termination::DomainExit;
    return s;
  }
  s.points.push_back(seed);
  Vec3 p = seed;
  std::optional<Vec3> prev = opt.initial_direction;
  for (int k = 0; k < opt.max_steps; ++k) {
    const FrameSample f = frame_at(field, p);
    if (!f.converged) {
      s.reason = Termination::ProjectionFailure;
      return s;
    }
    const Vec3 dir = select_axis(f.frame, prev ? *prev : f.frame.axis(0));
    const Vec3 q = p + opt.step * dir;
    if (!inside(q)) {
      s.reason = Termination::DomainExit;
      return s;
    }
    s.points.push_back(q);
    p = q;
    prev = dir;
  }
  s.reason = Termination::MaxSteps;
  return s;
}

/// Boundary triangles with closest-point queries.
class SurfaceMesh {
 public:
  std::vector<Vec3> vertices;
  std::vector<Tri> triangles;
  std::vector<Vec3> normals;

  SurfaceMesh() = default;
  SurfaceMesh(std::vector<Vec3> v, std::vector<Tri> t, std::vector<Vec3> n)
      : vertices(std::move(v)), triangles(std::move(t)), normals(std::move(n)) {
    build();
  }

  static SurfaceMesh from_boundary(const TetMesh& m) {
    std::vector<Tri> t;
    std::vector<Vec3> n;
    for (const auto& f : m.boundary_faces) {
      t.push_back(f.vertices);
      n.push_back(f.normal);
    }
    return SurfaceMesh(m.vertices, std::move(t), std::move(n));
  }

  Vec3 centroid(int t) const {
    return (vertices[triangles[t][0]] + vertices[triangles[t][1]] + vertices[triangles[t][2]]) / 3.0;
  }

  struct Hit {
    Vec3 point;
    int triangle = -1;
    double distance = 0;
  };

  /// Closest surface point. Among triangles tied on distance (1e-12), picks
  /// the one whose normal best matches the offset p - closest, so points that
  /// overshoot an edge land on the face they crossed onto.
  Hit closest(const Vec3& p) const {
    std::vector<std::pair<int, double>> seen;
    const auto dist = [&](int t) {
      const auto& tr = triangles[t];
      const double d = (p - closest_point_on_triangle(p, vertices[tr[0]], vertices[tr[1]], vertices[tr[2]])).norm();
      seen.emplace_back(t, d);
      return d;
    };
    double best_d = 0;
    int best = grid_.nearest(p, dist, &best_d);
    if (best < 0) throw InputError("empty surface");
    const auto& tb = triangles[best];
    const Vec3 c = closest_point_on_triangle(p, vertices[tb[0]], vertices[tb[1]], vertices[tb[2]]);
    const Vec3 offset = p - c;
    if (offset.norm() > 1e-14) {
      double best_align = normals[best].dot(offset);
      for (const auto& [t, d] : seen)
        if (t != best && d <= best_d + 1e-12 && normals[t].dot(offset) > best_align + 1e-12) {
          best_align = normals[t].dot(offset);
          best = t;
        }
    }
    const auto& tr = triangles[best];
    return {closest_point_on_triangle(p, vertices[tr[0]], vertices[tr[1]], vertices[tr[2]]), best,
            (p - closest_point_on_triangle(p, vertices[tr[0]], vertices[tr[1]], vertices[tr[2]])).norm()};
  }

 private:
  void build() {
    if (triangles.size() != normals.size()) throw InputError("one normal per triangle required");
    if (triangles.empty()) return;
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    for (const Tri& t : triangles)
      for (int v : t) {
        lo = lo.cwiseMin(vertices[v]);
        hi = hi.cwiseMax(vertices[v]);
      }
    const double extent = std::max((hi - lo).maxCoeff(), 1e-9);
    const double cell = std::max(extent / std::sqrt(static_cast<double>(triangles.size())), 1e-9);
    lo -= Vec3::Constant(cell);
    hi += Vec3::Constant(cell);
    grid_ = UniformGrid(lo, hi, cell);
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
      Vec3 a = vertices[triangles[t][0]], b = a;
      for (int k = 1; k < 3; ++k) {
        a = a.cwiseMin(vertices[triangles[t][k]]);
        b = b.cwiseMax(vertices[triangles[t][k]]);
      }
      grid_.insert(t, a, b);
    }
  }

  UniformGrid grid_;
};

/// Minimal rotation taking unit a onto unit b, applied to v.
inline Vec3 transport(const Vec3& v, const Vec3& a, const Vec3& b) {
  return Eigen::Quaterniond::FromTwoVectors(a, b) * v;
}

/// Surface streamline: the axis most parallel to the normal is dropped, the
/// best-aligned remaining axis is projected to the tangent plane, and each
/// step is projected back to the closest surface point. Crossing onto a face
/// with a different normal transports the direction and spends the overshoot
/// on the new face.
template <FieldQuery F>
Streamline trace_surface_streamline(const F& field, const SurfaceMesh& surface, const Vec3& seed,
                                    const StreamlineOptions& opt = {}) {
  if (!(opt.step > 0) || opt.max_steps < 0) throw InputError("invalid streamline options");
  Streamline s;
  s.seed = seed;
  SurfaceMesh::Hit h = surface.closest(seed);
  Vec3 p = h.point;
  int tri = h.triangle;
  s.points.push_back(p);
  std::optional<Vec3> prev = opt.initial_direction;
  for (int k = 0; k < opt.max_steps; ++k) {
    const Vec3 n = surface.normals[tri];
    const FrameSample f = frame_at(field, p);
    if (!f.converged) {
      s.reason = Termination::ProjectionFailure;
      return s;
    }
    int normal_axis = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(f.frame.axis(i).dot(n)) > std::abs(f.frame.axis(normal_axis).dot(n))) normal_axis = i;
    const Vec3 reference = prev ? *prev : f.frame.axis(normal_axis == 0 ? 1 : 0);
    const Vec3 axis = select_axis(f.frame, reference - reference.dot(n) * n, normal_axis);
    Vec3 dir = axis - axis.dot(n) * n;
    if (dir.norm() < 1e-12) {
      s.reason = Termination::ProjectionFailure;
      return s;
    }
    dir.normalize();
    h = surface.closest(p + opt.step * dir);
    const Vec3 n_new = surface.normals[h.triangle];
    const double remaining = opt.step - (h.point - p).norm();
    if (n_new.dot(n) < 1 - 1e-9 && remaining > 1e-12) {
      // Crossed a crease: continue on the new face for the remaining length.
      dir = transport(dir, n, n_new);
      dir = (dir - dir.dot(n_new) * n_new).normalized();
      h = surface.closest(h.point + remaining * dir);
    }
    p = h.point;
    tri = h.triangle;
    prev = dir;
    s.points.push_back(p);
  }
  s.reason = Termination::MaxSteps;
  return s;
}

// ---------------------------------------------------------------------------
// Surface cross field.

struct Cross {
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  bool ambiguous = false;  // two axes tied for "most normal"; lower index dropped
  bool converged = true;
};

inline Cross cross_from_frame(const Frame& f, const Vec3& n, double tie = 1e-6) {
  double a[3];
  for (int i = 0; i < 3; ++i) a[i] = std::abs(f.axis(i).dot(n));
  int drop = 0;
  for (int i = 1; i < 3; ++i)
    if (a[i] > a[drop]) drop = i;
  Cross c;
  for (int i = 0; i < 3; ++i)
    if (i != drop && std::abs(a[i] - a[drop]) <= tie) c.ambiguous = true;
  if (c.ambiguous)
    for (int i = 0; i < 3; ++i)
      if (std::abs(a[i] - a[drop]) <= tie) {
        drop = i;
        break;
      }
  const int j = drop == 0 ? 1 : 0, k = drop == 2 ? 1 : 2;
  const Vec3 u = f.axis(j) - f.axis(j).dot(n) * n;
  Vec3 v = f.axis(k) - f.axis(k).dot(n) * n;
  c.u = u.normalized();
  v -= v.dot(c.u) * c.u;
  c.v = v.normalized();
  return c;
}

template <FieldQuery F>
std::vector<Cross> extract_surface_cross_field(const F& field, const SurfaceMesh& surface) {
  Points x(3, static_cast<Eigen::Index>(surface.triangles.size()));
  for (int t = 0; t < static_cast<int>(surface.triangles.size()); ++t) x.col(t) = surface.centroid(t);
  const auto frames = sample_frames(field, x);
  std::vector<Cross> out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    Cross c = cross_from_frame(frames[t].frame, surface.normals[t]);
    c.converged = frames[t].converged;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-tet discretization.

struct DiscreteField {
  std::vector<Frame> frames;
  std::vector<int> failures;  // tets whose projection did not converge
};

/// Frames at tet centroids. The mesh may be in original coordinates: the
/// query point goes through the normalization, the axes are unchanged by a
/// similarity transform.
template <FieldQuery F>
DiscreteField discretize_volume_field(const F& field, const TetMesh& m, const SimilarityTransform& tr = {}) {
  Points x(3, static_cast<Eigen::Index>(m.tets.size()));
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t) x.col(t) = tr.to_normalized(m.centroid(t));
  const auto samples = sample_frames(field, x);
  DiscreteField out;
  for (std::size_t t = 0; t < samples.size(); ++t) {
    out.frames.push_back(samples[t].frame);
    if (!samples[t].converged) out.failures.push_back(static_cast<int>(t));
  }
  return out;
}

}  // namespace neurframe
