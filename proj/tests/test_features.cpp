#include "neurframe/features.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

namespace neurframe {
namespace {

// Linear scan with the same lexicographic (distance, index) rule.
FeatureHit brute_nearest(const FeatureSet& fs, const Vec3& p) {
  FeatureHit best{1e300, Vec3::Zero(), -1};
  for (int i = 0; i < static_cast<int>(fs.size()); ++i) {
    const double d = point_segment_distance(p, fs.segments[i].a, fs.segments[i].b);
    if (d < best.distance) best = {d, fs.segments[i].direction, i};
  }
  return best;
}

TEST(DetectFeatures, UnitCubeHasTwelveEdges) {
  const FeatureSet fs = detect_features(generate_primitive(PrimitiveShape::Cube, 4));
  ASSERT_EQ(fs.size(), 12u);
  for (const auto& s : fs.segments) {
    EXPECT_NEAR((s.b - s.a).norm(), 1.0, 1e-12);
    EXPECT_NEAR(s.direction.cwiseAbs().maxCoeff(), 1.0, 1e-12);
    // Both endpoints are cube corners.
    for (const Vec3& p : {s.a, s.b})
      for (int k = 0; k < 3; ++k) EXPECT_TRUE(p[k] == 0.0 || p[k] == 1.0);
  }
}

TEST(DetectFeatures, CylinderRimsOnly) {
  const int res = 4;
  const FeatureSet fs = detect_features(generate_primitive(PrimitiveShape::Cylinder, res));
  EXPECT_EQ(fs.size(), 2u * 6 * res);
  for (const auto& s : fs.segments) {
    EXPECT_NEAR(std::abs(s.a.z()), 1.0, 1e-12);
    EXPECT_EQ(s.a.z(), s.b.z());
    EXPECT_NEAR(Vec3(s.a.x(), s.a.y(), 0).norm(), 1.0, 1e-12);
  }
}

TEST(DetectFeatures, SmoothSurfaceHasNone) {
  // A finely faceted sphere-like surface: no dihedral angle exceeds pi/4.
  std::ostringstream obj;
  const int nu = 24, nv = 12;
  obj << "v 0 0 1\n";
  for (int i = 1; i < nv; ++i)
    for (int j = 0; j < nu; ++j) {
      const double th = kPi * i / nv, ph = 2 * kPi * j / nu;
      obj << "v " << std::sin(th) * std::cos(ph) << ' ' << std::sin(th) * std::sin(ph) << ' ' << std::cos(th) << "\n";
    }
  obj << "v 0 0 -1\n";
  const int south = 2 + (nv - 1) * nu;
  const auto id = [&](int i, int j) { return 2 + (i - 1) * nu + (j % nu); };
  for (int j = 0; j < nu; ++j) obj << "f 1 " << id(1, j) << ' ' << id(1, j + 1) << "\n";
  for (int i = 1; i < nv - 1; ++i)
    for (int j = 0; j < nu; ++j)
      obj << "f " << id(i, j) << ' ' << id(i + 1, j) << ' ' << id(i + 1, j + 1) << ' ' << id(i, j + 1) << "\n";
  for (int j = 0; j < nu; ++j) obj << "f " << id(nv - 1, j) << ' ' << south << ' ' << id(nv - 1, j + 1) << "\n";
  std::istringstream in(obj.str());
  EXPECT_TRUE(read_obj_features(in).empty());
}

TEST(DetectFeatures, LShapeIncludesConcaveEdge) {
  const FeatureSet fs = detect_features(generate_primitive(PrimitiveShape::LShape, 2));
  // Two L outlines of 6 edges each, plus 6 vertical edges (one concave).
  EXPECT_EQ(fs.size(), 18u);
  bool concave = false;
  for (const auto& s : fs.segments)
    if (s.a.x() == 1.0 && s.a.y() == 1.0 && s.b.x() == 1.0 && s.b.y() == 1.0) concave = true;
  EXPECT_TRUE(concave);
}

TEST(DetectFeatures, SymmetricInFaceOrder) {
  TetMesh m = generate_primitive(PrimitiveShape::Cube, 2);
  const FeatureSet a = detect_features(m);
  std::reverse(m.boundary_faces.begin(), m.boundary_faces.end());
  const FeatureSet b = detect_features(m);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.segments[i].a, b.segments[i].a);
    EXPECT_EQ(a.segments[i].b, b.segments[i].b);
  }
}

TEST(FeatureFile, ParseAndRoundTrip) {
  std::istringstream in("# two segments\n0 0 0 1 0 0\n\n0 0 0 0 2 0  # trailing\n");
  const FeatureSet fs = read_feature_file(in);
  ASSERT_EQ(fs.size(), 2u);
  EXPECT_EQ(fs.segments[1].direction, Vec3(0, 1, 0));
  std::stringstream out;
  write_feature_file(fs, out);
  const FeatureSet back = read_feature_file(out);
  EXPECT_EQ(back.segments[1].b, Vec3(0, 2, 0));
}

TEST(FeatureFile, Errors) {
  std::istringstream short_line("0 0 0 1 0\n");
  try {
    read_feature_file(short_line, "f");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  std::istringstream degenerate("1 1 1 1 1 1\n");
  EXPECT_THROW(read_feature_file(degenerate), ParseError);
}

TEST(ObjFeatures, Polylines) {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 1 1 0\nl 1 2 3\n");
  const FeatureSet fs = read_obj_features(in);
  ASSERT_EQ(fs.size(), 2u);
  EXPECT_EQ(fs.segments[1].direction, Vec3(0, 1, 0));
}

TEST(FeatureDistance, PointOnSegment) {
  FeatureSet fs;
  fs.add({-0.5, 0, 0}, {0.5, 0, 0});
  const FeatureIndex idx(fs);
  const auto hit = idx.nearest({0.25, 0, 0});
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->distance, 0.0);
  EXPECT_EQ(hit->direction, Vec3(1, 0, 0));
}

TEST(FeatureDistance, PerpendicularFromMidpoint) {
  FeatureSet fs;
  fs.add({-0.5, 0, 0}, {0.5, 0, 0});
  const auto hit = FeatureIndex(fs).nearest({0, 0.2, 0});
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->distance, 0.2, 1e-15);
}

TEST(FeatureDistance, EmptySetSignalsNoFeatures) { EXPECT_FALSE(FeatureIndex(FeatureSet{}).nearest(Vec3::Zero())); }

TEST(FeatureDistance, GridMatchesBruteForce) {
  std::mt19937_64 rng(99);
  FeatureSet fs = transform_features(detect_features(generate_primitive(PrimitiveShape::Cylinder, 3)),
                                     SimilarityTransform{1.0, Vec3::Zero()});
  for (int i = 0; i < 30; ++i) {
    const Vec3 a(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    fs.add(a, a + 0.3 * random_unit_vector(rng));
  }
  const FeatureIndex idx(fs);
  for (int q = 0; q < 10000; ++q) {
    const Vec3 p(uniform(rng, -1.3, 1.3), uniform(rng, -1.3, 1.3), uniform(rng, -1.3, 1.3));
    const auto hit = idx.nearest(p);
    const FeatureHit ref = brute_nearest(fs, p);
    ASSERT_TRUE(hit);
    ASSERT_EQ(hit->segment, ref.segment) << q;
    ASSERT_EQ(hit->distance, ref.distance);
    ASSERT_EQ(hit->direction, ref.direction);
  }
}

}  // namespace
}  // namespace neurframe
