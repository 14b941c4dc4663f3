#pragma once

// Sample sets the training losses run on: tet centroids joined by dual edges,
// and boundary tets paired with their boundary normal.

#include "neurframe/tet_mesh.hpp"

namespace neurframe {

/// Offset in the dual-edge weight 1 / (length + tau), in normalized units.
inline constexpr double kDualEdgeTau = 1e-2;

struct DualEdge {
  int a = -1;
  int b = -1;
  double length = 0;
  double weight = 0;
};

struct DualGraph {
  std::vector<Vec3> centroids;
  std::vector<DualEdge> edges;
};

/// One edge per interior face, ordered by (lower tet, local face).
inline DualGraph build_dual_graph(const TetMesh& m, double tau = kDualEdgeTau) {
  DualGraph g;
  g.centroids.reserve(m.tets.size());
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t) g.centroids.push_back(m.centroid(t));

  std::unordered_map<Tri, int, detail::FaceHash> first;
  first.reserve(m.tets.size() * 2);
  std::vector<std::pair<int, int>> pairs;
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t)
    for (const auto& lf : kTetFaces) {
      const Tet& e = m.tets[t];
      const Tri key = detail::sorted_face({e[lf[0]], e[lf[1]], e[lf[2]]});
      auto [it, inserted] = first.emplace(key, t);
      if (!inserted) pairs.emplace_back(it->second, t);
    }
  std::sort(pairs.begin(), pairs.end());
  g.edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    const double len = (g.centroids[a] - g.centroids[b]).norm();
    g.edges.push_back({a, b, len, 1.0 / (len + tau)});
  }
  return g;
}

struct BoundarySamples {
  std::vector<int> tets;
  std::vector<Vec3> points;
  std::vector<Vec3> normals;

  std::size_t size() const { return tets.size(); }
};

/// Requires every tet to touch at most one boundary face (see subdivide_multi_boundary_tets).
inline BoundarySamples build_boundary_samples(const TetMesh& m) {
  const std::vector<int> count = m.boundary_faces_per_tet();
  BoundarySamples s;
  for (const BoundaryFace& f : m.boundary_faces) {
    if (count[f.tet] > 1)
      throw MeshError("tet " + std::to_string(f.tet) + " has " + std::to_string(count[f.tet]) +
                      " boundary faces; subdivide first");
    s.tets.push_back(f.tet);
    s.points.push_back(m.centroid(f.tet));
    s.normals.push_back(f.normal);
  }
  return s;
}

}  // namespace neurframe
