#include "neurframe/dual_graph.hpp"
#include "neurframe/tet_mesh.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

namespace neurframe {
namespace {

const std::string kData = NEURFRAME_TEST_DATA;

// Brute-force face census: every face compared against every other.
std::size_t brute_interior_faces(const TetMesh& m) {
  std::vector<Tri> faces;
  for (const Tet& t : m.tets)
    for (int skip = 0; skip < 4; ++skip) {
      Tri f;
      int n = 0;
      for (int i = 0; i < 4; ++i)
        if (i != skip) f[n++] = t[i];
      std::sort(f.begin(), f.end());
      faces.push_back(f);
    }
  std::size_t shared = 0;
  for (std::size_t i = 0; i < faces.size(); ++i)
    for (std::size_t j = i + 1; j < faces.size(); ++j)
      if (faces[i] == faces[j]) ++shared;
  return shared;
}

TEST(LoadTetMesh, SingleTet) {
  const TetMesh m = load_tet_mesh(kData + "/single_tet.mesh");
  EXPECT_EQ(m.tets.size(), 1u);
  EXPECT_EQ(m.boundary_faces.size(), 4u);
  EXPECT_NEAR(m.volume(), 1.0 / 6.0, 1e-15);
  for (const BoundaryFace& f : m.boundary_faces) {
    const Vec3 fc = (m.vertices[f.vertices[0]] + m.vertices[f.vertices[1]] + m.vertices[f.vertices[2]]) / 3;
    EXPECT_GT((fc - m.centroid(0)).dot(f.normal), 0);
    EXPECT_NEAR(f.normal.norm(), 1.0, 1e-15);
  }
}

TEST(LoadTetMesh, FiveTetCube) {
  const TetMesh m = load_tet_mesh(kData + "/cube5.mesh");
  EXPECT_EQ(m.tets.size(), 5u);
  EXPECT_EQ(m.boundary_faces.size(), 12u);
  EXPECT_NEAR(m.volume(), 1.0, 1e-12);
  // Every boundary normal is an axis direction pointing out of the unit cube.
  for (const BoundaryFace& f : m.boundary_faces) {
    const Vec3 c = (m.vertices[f.vertices[0]] + m.vertices[f.vertices[1]] + m.vertices[f.vertices[2]]) / 3;
    EXPECT_NEAR(f.normal.cwiseAbs().maxCoeff(), 1.0, 1e-15);
    EXPECT_GT((c - Vec3::Constant(0.5)).dot(f.normal), 0.49);
  }
}

TEST(LoadTetMesh, InvertedTetIsNamed) {
  try {
    load_tet_mesh(kData + "/inverted_tet.mesh");
    FAIL() << "expected MeshError";
  } catch (const MeshError& e) {
    EXPECT_NE(std::string(e.what()).find("inverted"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(": 0"), std::string::npos);
  }
}

TEST(LoadTetMesh, ParseErrorCarriesLine) {
  try {
    load_tet_mesh(kData + "/bad_token.mesh");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
}

TEST(LoadTetMesh, RejectsNonManifoldFace) {
  std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, -1}, {0.2, 0.2, 1}};
  // Three tets on the same face (0, 1, 2).
  std::vector<Tet> t{{0, 1, 2, 3}, {0, 2, 1, 4}, {0, 1, 2, 5}};
  EXPECT_THROW(TetMesh::from_elements(v, t), MeshError);
}

TEST(LoadTetMesh, RejectsUnknownExtension) { EXPECT_THROW(load_tet_mesh("x.vtk"), InputError); }

TEST(LoadTetMesh, WriteReadRoundTrip) {
  const TetMesh m = generate_primitive(PrimitiveShape::Cylinder, 2);
  std::stringstream ss;
  write_medit(m, ss);
  const TetMesh r = read_medit(ss);
  ASSERT_EQ(r.vertices.size(), m.vertices.size());
  EXPECT_EQ(r.tets, m.tets);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_EQ(r.vertices[i], m.vertices[i]);
}

TEST(Primitive, CubeResolutionOne) {
  const TetMesh m = generate_primitive(PrimitiveShape::Cube, 1);
  EXPECT_EQ(m.tets.size(), 6u);
  EXPECT_EQ(m.vertices.size(), 8u);
  EXPECT_NEAR(m.volume(), 1.0, 1e-15);
}

TEST(Primitive, CubeResolutionFour) {
  const TetMesh m = generate_primitive(PrimitiveShape::Cube, 4);
  EXPECT_EQ(m.tets.size(), 384u);
  EXPECT_NEAR(m.volume(), 1.0, 1e-12);
  // Watertight: boundary area equals the cube's surface area.
  double area = 0;
  for (const auto& f : m.boundary_faces)
    area += 0.5 * (m.vertices[f.vertices[1]] - m.vertices[f.vertices[0]])
                      .cross(m.vertices[f.vertices[2]] - m.vertices[f.vertices[0]])
                      .norm();
  EXPECT_NEAR(area, 6.0, 1e-12);
}

TEST(Primitive, BoxAndLShapeVolumes) {
  EXPECT_NEAR(generate_primitive(PrimitiveShape::Box, 2).volume(), 2.0, 1e-12);
  EXPECT_NEAR(generate_primitive(PrimitiveShape::LShape, 2).volume(), 3.0, 1e-12);
}

TEST(Primitive, CylinderSideNormalsAreRadial) {
  const int res = 4;
  const TetMesh m = generate_primitive(PrimitiveShape::Cylinder, res);
  const double step = 2 * kPi / (6 * res);
  int side = 0;
  for (const auto& f : m.boundary_faces) {
    if (std::abs(f.normal.z()) > 0.5) {
      EXPECT_NEAR(std::abs(f.normal.z()), 1.0, 1e-12);
      continue;
    }
    ++side;
    const Vec3 c = (m.vertices[f.vertices[0]] + m.vertices[f.vertices[1]] + m.vertices[f.vertices[2]]) / 3;
    const Vec3 radial = Vec3(c.x(), c.y(), 0).normalized();
    EXPECT_LT(std::acos(std::min(1.0, f.normal.dot(radial))), step / 2 + 1e-9);
  }
  EXPECT_EQ(side, 6 * res * 2 * res * 2);
}

TEST(Primitive, RejectsBadInput) {
  EXPECT_THROW(generate_primitive(PrimitiveShape::Cube, 0), InputError);
  EXPECT_THROW(parse_primitive("torus"), InputError);
}

TEST(Subdivide, InteriorOnlyMeshUnchanged) {
  const TetMesh m = generate_primitive(PrimitiveShape::Cube, 3);
  const TetMesh once = subdivide_multi_boundary_tets(m);
  const TetMesh twice = subdivide_multi_boundary_tets(once);
  EXPECT_EQ(twice.tets, once.tets);
}

TEST(Subdivide, SingleTetSplitsIntoFour) {
  const TetMesh m = subdivide_multi_boundary_tets(load_tet_mesh(kData + "/single_tet.mesh"));
  EXPECT_EQ(m.tets.size(), 4u);
  for (int c : m.boundary_faces_per_tet()) EXPECT_EQ(c, 1);
  EXPECT_NEAR(m.volume(), 1.0 / 6.0, 1e-15);
}

TEST(Subdivide, FiveTetCube) {
  const TetMesh m = subdivide_multi_boundary_tets(load_tet_mesh(kData + "/cube5.mesh"));
  const auto counts = m.boundary_faces_per_tet();
  EXPECT_EQ(*std::max_element(counts.begin(), counts.end()), 1);
  EXPECT_NEAR(m.volume(), 1.0, 1e-12);
  EXPECT_EQ(m.boundary_faces.size(), 12u);
}

TEST(Subdivide, VolumeConservedOnPrimitives) {
  for (auto shape : {PrimitiveShape::Cube, PrimitiveShape::Cylinder, PrimitiveShape::LShape}) {
    const TetMesh m = generate_primitive(shape, 3);
    const TetMesh s = subdivide_multi_boundary_tets(m);
    EXPECT_NEAR(s.volume(), m.volume(), 1e-12 * m.volume());
    const auto counts = s.boundary_faces_per_tet();
    EXPECT_LE(*std::max_element(counts.begin(), counts.end()), 1);
  }
}

TEST(DualGraph, SingleTetHasNoEdges) {
  EXPECT_TRUE(build_dual_graph(load_tet_mesh(kData + "/single_tet.mesh")).edges.empty());
}

TEST(DualGraph, TwoTetsOneEdgeWeight) {
  // Two tets sharing face (0,1,2); apexes placed so the centroid distance is 0.1.
  std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.1, 0.1, 0.2}, {0.1, 0.1, -0.2}};
  const TetMesh m = TetMesh::from_elements(v, {{0, 1, 2, 3}, {0, 2, 1, 4}});
  const DualGraph g = build_dual_graph(m);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_NEAR(g.edges[0].length, 0.1, 1e-15);
  EXPECT_NEAR(g.edges[0].weight, 1.0 / 0.11, 1e-12);
}

TEST(DualGraph, EdgeCountMatchesFaceCensus) {
  const TetMesh m = generate_primitive(PrimitiveShape::Cube, 4);
  const DualGraph g = build_dual_graph(m);
  EXPECT_EQ(g.edges.size(), brute_interior_faces(m));
  EXPECT_EQ(g.edges.size(), m.interior_face_count());
  for (const DualEdge& e : g.edges) {
    EXPECT_TRUE(std::isfinite(e.weight));
    EXPECT_GT(e.weight, 0);
    EXPECT_LT(e.a, e.b);
  }
}

TEST(BoundarySamples, OnePerBoundaryTetAfterSubdivision) {
  const TetMesh m = subdivide_multi_boundary_tets(generate_primitive(PrimitiveShape::Cube, 2));
  const BoundarySamples s = build_boundary_samples(m);
  EXPECT_EQ(s.size(), m.boundary_faces.size());
  std::set<int> tets(s.tets.begin(), s.tets.end());
  EXPECT_EQ(tets.size(), s.size());
  EXPECT_THROW(build_boundary_samples(generate_primitive(PrimitiveShape::Cube, 1)), MeshError);
}

TEST(Normalize, AlreadyNormalizedIsIdentity) {
  std::vector<Vec3> v{{-1, -1, -1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  const TetMesh m = TetMesh::from_elements(v, {{0, 1, 2, 3}});
  const NormalizedMesh n = normalize_to_unit_box(m);
  EXPECT_EQ(n.transform.scale, 1.0);
  EXPECT_EQ(n.transform.center, Vec3::Zero());
  EXPECT_EQ(n.mesh.vertices, m.vertices);
}

TEST(Normalize, UnitCubeAtOrigin) {
  const NormalizedMesh n = normalize_to_unit_box(generate_primitive(PrimitiveShape::Cube, 1));
  EXPECT_EQ(n.transform.scale, 2.0);
  EXPECT_EQ(n.transform.to_normalized(Vec3(1, 1, 1)), Vec3(1, 1, 1));
  EXPECT_EQ(n.transform.to_normalized(Vec3(0, 0, 0)), Vec3(-1, -1, -1));
  EXPECT_EQ(n.transform.to_original(Vec3(-1, -1, -1)), Vec3::Zero());
}

TEST(Normalize, AnisotropicBox) {
  const NormalizedMesh n = normalize_to_unit_box(generate_primitive(PrimitiveShape::Box, 1));
  const auto [lo, hi] = n.mesh.bounding_box();
  EXPECT_EQ(lo, Vec3(-1, -0.5, -0.5));
  EXPECT_EQ(hi, Vec3(1, 0.5, 0.5));
}

TEST(Normalize, RejectsZeroExtent) {
  TetMesh m;
  m.vertices = {Vec3::Zero(), Vec3::Zero()};
  EXPECT_THROW(normalize_to_unit_box(m), MeshError);
}

}  // namespace
}  // namespace neurframe
