#pragma once

// Sharp feature edges: detection on the boundary, user feature files, and
// nearest-feature queries.

#include "neurframe/spatial_grid.hpp"
#include "neurframe/tet_mesh.hpp"

#include <optional>

namespace neurframe {

struct FeatureSegment {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();  // unit, a -> b
};

struct FeatureSet {
  std::vector<FeatureSegment> segments;

  bool empty() const { return segments.empty(); }
  std::size_t size() const { return segments.size(); }

  void add(const Vec3& a, const Vec3& b) {
    const Vec3 d = b - a;
    if (!(d.norm() > 0)) throw InputError("feature segment has zero length");
    segments.push_back({a, b, d.normalized()});
  }
};

namespace detail {

inline FeatureSet detect_sharp_edges(const std::vector<Vec3>& vertices, const std::vector<Tri>& faces,
                                     const std::vector<Vec3>& normals, double angle_threshold) {
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int f = 0; f < static_cast<int>(faces.size()); ++f)
    for (int e = 0; e < 3; ++e) {
      const int u = faces[f][e], v = faces[f][(e + 1) % 3];
      edge_faces[{std::min(u, v), std::max(u, v)}].push_back(f);
    }
  std::vector<std::pair<int, int>> sharp;
  for (const auto& [edge, fs] : edge_faces) {
    if (fs.size() != 2) continue;
    const double c = std::clamp(normals[fs[0]].dot(normals[fs[1]]), -1.0, 1.0);
    if (std::acos(c) > angle_threshold) sharp.push_back(edge);
  }

  // Merge collinear chains through vertices of feature degree 2.
  std::map<int, std::vector<int>> at_vertex;
  for (int i = 0; i < static_cast<int>(sharp.size()); ++i) {
    at_vertex[sharp[i].first].push_back(i);
    at_vertex[sharp[i].second].push_back(i);
  }
  const auto dir = [&](int i) { return (vertices[sharp[i].second] - vertices[sharp[i].first]).normalized(); };
  const auto continues = [&](int vertex, int from) -> int {
    const auto& inc = at_vertex[vertex];
    if (inc.size() != 2) return -1;
    const int other = inc[0] == from ? inc[1] : inc[0];
    return std::abs(dir(from).dot(dir(other))) > 1.0 - 1e-9 ? other : -1;
  };
  std::vector<char> used(sharp.size(), 0);
  FeatureSet out;
  for (int i = 0; i < static_cast<int>(sharp.size()); ++i) {
    if (used[i]) continue;
    used[i] = 1;
    int ends[2] = {sharp[i].first, sharp[i].second};
    for (int side = 0; side < 2; ++side) {
      int cur = i;
      for (;;) {
        const int next = continues(ends[side], cur);
        if (next < 0 || used[next]) break;
        used[next] = 1;
        ends[side] = sharp[next].first == ends[side] ? sharp[next].second : sharp[next].first;
        cur = next;
      }
    }
    out.add(vertices[ends[0]], vertices[ends[1]]);
  }
  return out;
}

}  // namespace detail

/// Boundary edges whose two incident boundary-face normals differ by more than
/// the threshold, merged into maximal straight segments.
inline FeatureSet detect_features(const TetMesh& m, double angle_threshold = kPi / 4) {
  std::vector<Tri> faces;
  std::vector<Vec3> normals;
  for (const BoundaryFace& f : m.boundary_faces) {
    faces.push_back(f.vertices);
    normals.push_back(f.normal);
  }
  return detail::detect_sharp_edges(m.vertices, faces, normals, angle_threshold);
}

/// Plain text, one segment per line: `ax ay az bx by bz`. '#' starts a comment.
inline FeatureSet read_feature_file(std::istream& in, const std::string& source = "<stream>") {
  FeatureSet fs;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double v[6];
    int n = 0;
    while (n < 6 && ls >> v[n]) ++n;
    if (n == 0 && ls.eof()) continue;
    std::string extra;
    if (n != 6 || (ls >> extra)) throw ParseError(source, no, "expected 6 numbers per feature segment");
    try {
      fs.add({v[0], v[1], v[2]}, {v[3], v[4], v[5]});
    } catch (const InputError& e) {
      throw ParseError(source, no, e.what());
    }
  }
  return fs;
}

inline FeatureSet load_feature_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_feature_file(in, path);
}

inline void write_feature_file(const FeatureSet& fs, std::ostream& out) {
  char buf[256];
  for (const auto& s : fs.segments) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", s.a.x(), s.a.y(), s.a.z(), s.b.x(),
                  s.b.y(), s.b.z());
    out << buf;
  }
}

/// Features from an OBJ file: `l` polylines become segments; when there are no
/// polylines, sharp edges of the `f` triangle surface are detected instead.
inline FeatureSet read_obj_features(std::istream& in, const std::string& source = "<stream>",
                                    double angle_threshold = kPi / 4) {
  std::vector<Vec3> verts;
  std::vector<std::vector<int>> lines;
  std::vector<Tri> faces;
  std::string line;
  std::size_t no = 0;
  const auto index = [&](const std::string& tok) {
    const int i = std::stoi(tok.substr(0, tok.find('/')));
    const int r = i < 0 ? static_cast<int>(verts.size()) + i : i - 1;
    if (r < 0 || r >= static_cast<int>(verts.size())) throw ParseError(source, no, "vertex index out of range");
    return r;
  };
  while (std::getline(in, line)) {
    ++no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    try {
      if (tag == "v") {
        Vec3 p;
        if (!(ls >> p.x() >> p.y() >> p.z())) throw ParseError(source, no, "bad vertex");
        verts.push_back(p);
      } else if (tag == "l") {
        std::vector<int> poly;
        std::string tok;
        while (ls >> tok) poly.push_back(index(tok));
        lines.push_back(poly);
      } else if (tag == "f") {
        std::vector<int> poly;
        std::string tok;
        while (ls >> tok) poly.push_back(index(tok));
        for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
      }
    } catch (const std::invalid_argument&) {
      throw ParseError(source, no, "bad index");
    }
  }
  FeatureSet fs;
  if (!lines.empty()) {
    for (const auto& poly : lines)
      for (std::size_t k = 0; k + 1 < poly.size(); ++k) fs.add(verts[poly[k]], verts[poly[k + 1]]);
    return fs;
  }
  std::vector<Vec3> normals;
  for (const Tri& f : faces)
    normals.push_back((verts[f[1]] - verts[f[0]]).cross(verts[f[2]] - verts[f[0]]).normalized());
  return detail::detect_sharp_edges(verts, faces, normals, angle_threshold);
}

inline FeatureSet load_obj_features(const std::string& path, double angle_threshold = kPi / 4) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_obj_features(in, path, angle_threshold);
}

inline FeatureSet transform_features(const FeatureSet& fs, const SimilarityTransform& tr) {
  FeatureSet out;
  for (const auto& s : fs.segments) out.add(tr.to_normalized(s.a), tr.to_normalized(s.b));
  return out;
}

struct FeatureHit {
  double distance = 0;
  Vec3 direction = Vec3::UnitX();
  int segment = -1;
};

/// Nearest-feature queries on a uniform grid. Read-only after construction.
class FeatureIndex {
 public:
  explicit FeatureIndex(FeatureSet features, double cell = 0.05) : features_(std::move(features)) {
    if (features_.empty()) return;
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    for (const auto& s : features_.segments) {
      lo = lo.cwiseMin(s.a).cwiseMin(s.b);
      hi = hi.cwiseMax(s.a).cwiseMax(s.b);
    }
    lo = lo.cwiseMin(Vec3::Constant(-1.0));
    hi = hi.cwiseMax(Vec3::Constant(1.0));
    grid_ = UniformGrid(lo, hi, cell);
    for (int i = 0; i < static_cast<int>(features_.size()); ++i) {
      const auto& s = features_.segments[i];
      const int pieces = std::max(1, static_cast<int>(std::ceil((s.b - s.a).norm() / cell)));
      for (int k = 0; k < pieces; ++k) {
        const Vec3 p = s.a + (s.b - s.a) * (double(k) / pieces);
        const Vec3 q = s.a + (s.b - s.a) * (double(k + 1) / pieces);
        grid_.insert(i, p.cwiseMin(q), p.cwiseMax(q));
      }
    }
  }

  const FeatureSet& features() const { return features_; }
  bool empty() const { return features_.empty(); }

  /// Nearest segment (ties to the lowest index); nullopt when there are no features.
  std::optional<FeatureHit> nearest(const Vec3& p) const {
    if (features_.empty()) return std::nullopt;
    double d = 0;
    const int i = grid_.nearest(
        p, [&](int id) { return point_segment_distance(p, features_.segments[id].a, features_.segments[id].b); }, &d);
    return FeatureHit{d, features_.segments[i].direction, i};
  }

 private:
  FeatureSet features_;
  UniformGrid grid_;
};

inline std::optional<FeatureHit> feature_distance(const Vec3& p, const FeatureIndex& index) { return index.nearest(p); }

}  // namespace neurframe
