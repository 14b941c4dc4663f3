#pragma once

// Tetrahedral meshes: validation, MEDIT I/O, primitive generation,
// boundary-tet subdivision and normalization into [-1, 1]^3.

#include "neurframe/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace neurframe {

using Tet = std::array<int, 4>;
using Tri = std::array<int, 3>;

struct BoundaryFace {
  int tet = -1;
  Tri vertices{};
  Vec3 normal = Vec3::Zero();  // outward, unit
};

/// Local faces of a positively oriented tet, each listed counter-clockwise
/// when seen from outside. Face i is opposite vertex i.
inline constexpr std::array<std::array<int, 3>, 4> kTetFaces = {{{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

namespace detail {

inline Tri sorted_face(const Tri& f) {
  Tri s = f;
  std::sort(s.begin(), s.end());
  return s;
}

struct FaceHash {
  std::size_t operator()(const Tri& f) const {
    std::size_t h = static_cast<std::size_t>(f[0]);
    h = h * 1000003u ^ static_cast<std::size_t>(f[1]);
    h = h * 1000003u ^ static_cast<std::size_t>(f[2]);
    return h;
  }
};

}  // namespace detail

struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<Tet> tets;
  std::vector<BoundaryFace> boundary_faces;

  /// Validates orientation and manifoldness and derives the boundary faces.
  static TetMesh from_elements(std::vector<Vec3> vertices, std::vector<Tet> tets);

  double signed_volume(int t) const {
    const Tet& e = tets[t];
    const Vec3& a = vertices[e[0]];
    return (vertices[e[1]] - a).cross(vertices[e[2]] - a).dot(vertices[e[3]] - a) / 6.0;
  }

  double volume() const {
    double v = 0;
    for (int t = 0; t < static_cast<int>(tets.size()); ++t) v += signed_volume(t);
    return v;
  }

  Vec3 centroid(int t) const {
    const Tet& e = tets[t];
    return (vertices[e[0]] + vertices[e[1]] + vertices[e[2]] + vertices[e[3]]) / 4.0;
  }

  std::pair<Vec3, Vec3> bounding_box() const {
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    for (const Vec3& v : vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    return {lo, hi};
  }

  std::vector<int> boundary_faces_per_tet() const {
    std::vector<int> count(tets.size(), 0);
    for (const BoundaryFace& f : boundary_faces) ++count[f.tet];
    return count;
  }

  /// Number of faces shared by two tets.
  std::size_t interior_face_count() const { return (4 * tets.size() - boundary_faces.size()) / 2; }
};

inline TetMesh TetMesh::from_elements(std::vector<Vec3> vertices, std::vector<Tet> tets) {
  TetMesh m;
  m.vertices = std::move(vertices);
  m.tets = std::move(tets);
  const int nv = static_cast<int>(m.vertices.size());
  for (std::size_t t = 0; t < m.tets.size(); ++t)
    for (int v : m.tets[t])
      if (v < 0 || v >= nv) throw MeshError("tet " + std::to_string(t) + " references missing vertex " + std::to_string(v));
  if (m.tets.empty()) throw MeshError("mesh has no tetrahedra");

  const auto [lo, hi] = m.bounding_box();
  const double diag = (hi - lo).norm();
  const double min_volume = 1e-14 * diag * diag * diag;
  std::vector<int> inverted;
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t)
    if (!(m.signed_volume(t) > min_volume)) inverted.push_back(t);
  if (!inverted.empty()) {
    std::string list;
    for (std::size_t i = 0; i < inverted.size() && i < 20; ++i) list += (i ? ", " : "") + std::to_string(inverted[i]);
    if (inverted.size() > 20) list += ", ...";
    throw MeshError("inverted or degenerate tets: " + list);
  }

  std::unordered_map<Tri, int, detail::FaceHash> uses;
  uses.reserve(m.tets.size() * 4);
  for (const Tet& e : m.tets)
    for (const auto& lf : kTetFaces) ++uses[detail::sorted_face({e[lf[0]], e[lf[1]], e[lf[2]]})];
  for (const auto& [face, count] : uses)
    if (count > 2)
      throw MeshError("non-manifold face (" + std::to_string(face[0]) + ", " + std::to_string(face[1]) + ", " +
                      std::to_string(face[2]) + ") shared by " + std::to_string(count) + " tets");

  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t) {
    const Tet& e = m.tets[t];
    for (const auto& lf : kTetFaces) {
      const Tri f{e[lf[0]], e[lf[1]], e[lf[2]]};
      if (uses[detail::sorted_face(f)] != 1) continue;
      const Vec3 n = (m.vertices[f[1]] - m.vertices[f[0]]).cross(m.vertices[f[2]] - m.vertices[f[0]]);
      m.boundary_faces.push_back({t, f, n.normalized()});
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// MEDIT ASCII

namespace detail {

class MeditTokens {
 public:
  MeditTokens(std::istream& in, std::string source) : source_(std::move(source)) {
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) tokens_.push_back({tok, no});
    }
    last_line_ = no;
  }

  bool done() const { return pos_ >= tokens_.size(); }
  std::size_t line() const { return pos_ < tokens_.size() ? tokens_[pos_].second : last_line_; }

  std::string word() {
    need();
    return tokens_[pos_++].first;
  }

  double real() {
    need();
    const auto& [tok, no] = tokens_[pos_];
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail("expected a number, got '" + tok + "'");
    ++pos_;
    return v;
  }

  long integer() {
    need();
    const auto& [tok, no] = tokens_[pos_];
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') fail("expected an integer, got '" + tok + "'");
    ++pos_;
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line(), what); }

 private:
  void need() const {
    if (done()) throw ParseError(source_, last_line_, "unexpected end of file");
  }

  std::string source_;
  std::vector<std::pair<std::string, std::size_t>> tokens_;
  std::size_t pos_ = 0;
  std::size_t last_line_ = 0;
};

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

inline TetMesh read_medit(std::istream& in, const std::string& source = "<stream>") {
  detail::MeditTokens tok(in, source);
  std::vector<Vec3> vertices;
  std::vector<Tet> tets;
  // Sections we skip: name -> integers per record.
  static const std::map<std::string, int> skipped = {
      {"triangles", 4},        {"edges", 3},     {"quadrilaterals", 5}, {"hexahedra", 9},
      {"corners", 1},          {"ridges", 1},    {"requiredvertices", 1}, {"requirededges", 1},
      {"requiredtriangles", 1}, {"normals", 3},  {"normalatvertices", 2}, {"tangents", 3},
      {"tangentatvertices", 2}};
  bool seen_end = false;
  while (!tok.done() && !seen_end) {
    const std::size_t section_line = tok.line();
    const std::string key = detail::lower(tok.word());
    if (key == "meshversionformatted") {
      tok.integer();
    } else if (key == "dimension") {
      if (tok.integer() != 3) tok.fail("only 3D meshes are supported");
    } else if (key == "vertices") {
      const long n = tok.integer();
      if (n < 0) tok.fail("negative vertex count");
      vertices.reserve(n);
      for (long i = 0; i < n; ++i) {
        const double x = tok.real(), y = tok.real(), z = tok.real();
        tok.integer();
        vertices.emplace_back(x, y, z);
      }
    } else if (key == "tetrahedra") {
      const long n = tok.integer();
      if (n < 0) tok.fail("negative tet count");
      tets.reserve(n);
      for (long i = 0; i < n; ++i) {
        Tet e;
        for (int& v : e) {
          const std::size_t at = tok.line();
          const long idx = tok.integer();
          if (idx < 1 || idx > static_cast<long>(vertices.size()))
            throw ParseError(source, at, "tet vertex index " + std::to_string(idx) + " out of range");
          v = static_cast<int>(idx - 1);
        }
        tok.integer();
        tets.push_back(e);
      }
    } else if (key == "end") {
      seen_end = true;
    } else if (auto it = skipped.find(key); it != skipped.end()) {
      const long n = tok.integer();
      for (long i = 0; i < n * it->second; ++i) tok.real();
    } else {
      throw ParseError(source, section_line, "unknown section '" + key + "'");
    }
  }
  if (vertices.empty()) throw ParseError(source, tok.line(), "no Vertices section");
  return TetMesh::from_elements(std::move(vertices), std::move(tets));
}

enum class MeshFormat { Auto, Medit };

inline TetMesh load_tet_mesh(const std::string& path, MeshFormat format = MeshFormat::Auto) {
  if (format == MeshFormat::Auto) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : detail::lower(path.substr(dot));
    if (ext != ".mesh") throw InputError("unsupported mesh format '" + ext + "' (expected .mesh)");
  }
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_medit(in, path);
}

inline void write_medit(const TetMesh& m, std::ostream& out) {
  char buf[128];
  out << "MeshVersionFormatted 2\nDimension 3\nVertices\n" << m.vertices.size() << "\n";
  for (const Vec3& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g 0\n", v.x(), v.y(), v.z());
    out << buf;
  }
  out << "Tetrahedra\n" << m.tets.size() << "\n";
  for (const Tet& t : m.tets) out << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << ' ' << t[3] + 1 << " 0\n";
  out << "Triangles\n" << m.boundary_faces.size() << "\n";
  for (const BoundaryFace& f : m.boundary_faces)
    out << f.vertices[0] + 1 << ' ' << f.vertices[1] + 1 << ' ' << f.vertices[2] + 1 << " 0\n";
  out << "End\n";
}

inline void save_medit(const TetMesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_medit(m, out);
}

// ---------------------------------------------------------------------------
// Primitives

enum class PrimitiveShape { Cube, Box, Cylinder, LShape };

inline PrimitiveShape parse_primitive(const std::string& name) {
  const std::string n = detail::lower(name);
  if (n == "cube") return PrimitiveShape::Cube;
  if (n == "box") return PrimitiveShape::Box;
  if (n == "cylinder") return PrimitiveShape::Cylinder;
  if (n == "l_shape" || n == "lshape") return PrimitiveShape::LShape;
  throw InputError("unsupported primitive '" + name + "' (cube, box, cylinder, l_shape)");
}

namespace detail {

inline void orient_positive(const std::vector<Vec3>& v, Tet& t) {
  const double vol = (v[t[1]] - v[t[0]]).cross(v[t[2]] - v[t[0]]).dot(v[t[3]] - v[t[0]]);
  if (vol < 0) std::swap(t[2], t[3]);
}

// Lattice of nx*ny*nz cells of size h; each kept cell split into the 6 tets
// sharing its main diagonal, which keeps face diagonals conforming.
template <class Keep>
TetMesh lattice_mesh(int nx, int ny, int nz, double h, Keep keep) {
  const auto id = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  std::vector<int> remap((nx + 1) * (ny + 1) * (nz + 1), -1);
  std::vector<Vec3> verts;
  std::vector<Tet> tets;
  const auto vertex = [&](int i, int j, int k) {
    int& r = remap[id(i, j, k)];
    if (r < 0) {
      r = static_cast<int>(verts.size());
      verts.emplace_back(i * h, j * h, k * h);
    }
    return r;
  };
  constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!keep(i, j, k)) continue;
        for (const auto& p : perms) {
          std::array<int, 3> c{i, j, k};
          Tet t;
          t[0] = vertex(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[p[s]];
            t[s + 1] = vertex(c[0], c[1], c[2]);
          }
          tets.push_back(t);
        }
      }
  for (Tet& t : tets) orient_positive(verts, t);
  return TetMesh::from_elements(std::move(verts), std::move(tets));
}

// Disk of radius 1 from concentric rings (ring r has 6r vertices), extruded
// into `layers` slabs over height 2; each prism is split into 3 tets by the
// lowest-index rule so neighbouring prisms share face diagonals.
inline TetMesh cylinder_mesh(int rings, int layers) {
  std::vector<Vec3> disk{Vec3::Zero()};
  std::vector<Tri> tris;
  std::vector<int> prev{0};
  for (int r = 1; r <= rings; ++r) {
    std::vector<int> ring;
    const int n = 6 * r;
    for (int j = 0; j < n; ++j) {
      const double a = 2 * kPi * j / n;
      ring.push_back(static_cast<int>(disk.size()));
      disk.emplace_back(std::cos(a) * r / rings, std::sin(a) * r / rings, 0);
    }
    if (r == 1) {
      for (int j = 0; j < n; ++j) tris.push_back({0, ring[j], ring[(j + 1) % n]});
    } else {
      // Zip the inner and outer ring in angle order.
      const int m = static_cast<int>(prev.size());
      int a = 0, b = 0;
      while (a < m || b < n) {
        const double next_inner = (a + 1.0) / m, next_outer = (b + 1.0) / n;
        if (b < n && (a >= m || next_outer <= next_inner)) {
          tris.push_back({prev[a % m], ring[b], ring[(b + 1) % n]});
          ++b;
        } else {
          tris.push_back({prev[a % m], ring[b % n], prev[(a + 1) % m]});
          ++a;
        }
      }
    }
    prev = ring;
  }
  const int nd = static_cast<int>(disk.size());
  std::vector<Vec3> verts;
  for (int l = 0; l <= layers; ++l)
    for (const Vec3& p : disk) verts.emplace_back(p.x(), p.y(), -1.0 + 2.0 * l / layers);
  std::vector<Tet> tets;
  for (int l = 0; l < layers; ++l)
    for (Tri t : tris) {
      std::sort(t.begin(), t.end());
      const int o0 = l * nd, o1 = (l + 1) * nd;
      const int a = t[0], b = t[1], c = t[2];
      tets.push_back({a + o0, b + o0, c + o0, c + o1});
      tets.push_back({a + o0, b + o0, b + o1, c + o1});
      tets.push_back({a + o0, a + o1, b + o1, c + o1});
    }
  for (Tet& t : tets) orient_positive(verts, t);
  return TetMesh::from_elements(std::move(verts), std::move(tets));
}

}  // namespace detail

/// Watertight tet mesh of a simple solid. `resolution` is cells per unit
/// length for the lattice shapes (cube [0,1]^3, box [0,2]x[0,1]^2, L-shape
/// [0,2]^2x[0,1] minus a quadrant) and rings / half the layer count for the
/// cylinder (radius 1, height 2).
inline TetMesh generate_primitive(PrimitiveShape shape, int resolution) {
  if (resolution < 1) throw InputError("resolution must be >= 1");
  const int r = resolution;
  const double h = 1.0 / r;
  switch (shape) {
    case PrimitiveShape::Cube:
      return detail::lattice_mesh(r, r, r, h, [](int, int, int) { return true; });
    case PrimitiveShape::Box:
      return detail::lattice_mesh(2 * r, r, r, h, [](int, int, int) { return true; });
    case PrimitiveShape::LShape:
      return detail::lattice_mesh(2 * r, 2 * r, r, h, [r](int i, int j, int) { return i < r || j < r; });
    case PrimitiveShape::Cylinder:
      return detail::cylinder_mesh(r, 2 * r);
  }
  throw InputError("unsupported primitive");
}

/// Splits every tet touching more than one boundary face at its barycenter
/// (1 -> 4) until each tet touches at most one.
inline TetMesh subdivide_multi_boundary_tets(const TetMesh& m, int max_depth = 8) {
  TetMesh cur = m;
  std::vector<int> depth(cur.tets.size(), 0);
  for (;;) {
    const std::vector<int> count = cur.boundary_faces_per_tet();
    bool any = false;
    for (int t = 0; t < static_cast<int>(count.size()); ++t) {
      if (count[t] <= 1) continue;
      any = true;
      if (depth[t] >= max_depth) throw MeshError("subdivision depth exceeded at tet " + std::to_string(t));
    }
    if (!any) return cur;

    std::vector<Vec3> verts = cur.vertices;
    std::vector<Tet> tets;
    std::vector<int> next_depth;
    for (int t = 0; t < static_cast<int>(cur.tets.size()); ++t) {
      const Tet& e = cur.tets[t];
      if (count[t] <= 1) {
        tets.push_back(e);
        next_depth.push_back(depth[t]);
        continue;
      }
      const int c = static_cast<int>(verts.size());
      verts.push_back(cur.centroid(t));
      for (const auto& lf : kTetFaces) {
        // Outward face (i, j, k) plus the interior point: swap to keep positive volume.
        tets.push_back({e[lf[0]], e[lf[2]], e[lf[1]], c});
        next_depth.push_back(depth[t] + 1);
      }
    }
    cur = TetMesh::from_elements(std::move(verts), std::move(tets));
    depth = std::move(next_depth);
  }
}

/// p_normalized = (p - center) * scale.
struct SimilarityTransform {
  double scale = 1.0;
  Vec3 center = Vec3::Zero();

  Vec3 to_normalized(const Vec3& p) const { return (p - center) * scale; }
  Vec3 to_original(const Vec3& p) const { return p / scale + center; }
};

struct NormalizedMesh {
  TetMesh mesh;
  SimilarityTransform transform;
};

/// Uniform scale + translation putting the bounding box center at the origin
/// with the longest side spanning [-1, 1].
inline NormalizedMesh normalize_to_unit_box(const TetMesh& m) {
  const auto [lo, hi] = m.bounding_box();
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0)) throw MeshError("bounding box has zero extent");
  SimilarityTransform tr{2.0 / extent, (lo + hi) / 2.0};
  NormalizedMesh out{m, tr};
  for (Vec3& v : out.mesh.vertices) v = tr.to_normalized(v);
  return out;
}

}  // namespace neurframe
