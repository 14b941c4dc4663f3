#pragma once

// The 24-element rotation group of the cube, frame matching and loop monodromy.

#include "neurframe/frame.hpp"

#include <array>
#include <span>

namespace neurframe {

namespace detail {

using IntMat3 = std::array<std::array<int, 3>, 3>;

constexpr int det3(const IntMat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

constexpr IntMat3 mul3(const IntMat3& a, const IntMat3& b) {
  IntMat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Signed permutation matrices with det +1. Permutations in lexicographic order,
// sign patterns with '+' before '-' per column, so index 0 is the identity.
constexpr std::array<IntMat3, 24> make_octahedral_group() {
  constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::array<IntMat3, 24> out{};
  int n = 0;
  for (const auto& p : perms)
    for (int signs = 0; signs < 8; ++signs) {
      IntMat3 m{};
      for (int col = 0; col < 3; ++col) m[p[col]][col] = (signs >> (2 - col)) & 1 ? -1 : 1;
      if (det3(m) == 1) out[n++] = m;
    }
  return out;
}

inline constexpr std::array<IntMat3, 24> kOctahedralGroup = make_octahedral_group();

constexpr int find_element(const IntMat3& m) {
  for (int i = 0; i < 24; ++i)
    if (kOctahedralGroup[i] == m) return i;
  return -1;
}

constexpr std::array<std::array<int, 24>, 24> make_product_table() {
  std::array<std::array<int, 24>, 24> t{};
  for (int a = 0; a < 24; ++a)
    for (int b = 0; b < 24; ++b) t[a][b] = find_element(mul3(kOctahedralGroup[a], kOctahedralGroup[b]));
  return t;
}

inline constexpr auto kProductTable = make_product_table();

}  // namespace detail

/// Element of the cube rotation group, identified by its index 0..23 (0 = identity).
class OctaRotation {
 public:
  static constexpr int kOrder = 24;

  constexpr OctaRotation() = default;
  constexpr explicit OctaRotation(int index) : index_(index) {
    if (index < 0 || index >= kOrder) throw InputError("OctaRotation: index out of range");
  }
  static constexpr OctaRotation identity() { return OctaRotation{}; }

  constexpr int index() const { return index_; }
  constexpr bool is_identity() const { return index_ == 0; }

  Mat3 matrix() const {
    Mat3 m;
    const auto& e = detail::kOctahedralGroup[index_];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = e[i][j];
    return m;
  }

  constexpr OctaRotation operator*(OctaRotation o) const {
    return OctaRotation(detail::kProductTable[index_][o.index_]);
  }

  constexpr OctaRotation inverse() const {
    for (int i = 0; i < kOrder; ++i)
      if (detail::kProductTable[index_][i] == 0) return OctaRotation(i);
    return {};
  }

  /// Smallest n >= 1 with g^n = identity.
  constexpr int order() const {
    OctaRotation p = *this;
    int n = 1;
    while (!p.is_identity()) {
      p = p * *this;
      ++n;
    }
    return n;
  }

  /// Rotation angle in radians (0, π/2, 2π/3 or π).
  double angle() const {
    const auto& e = detail::kOctahedralGroup[index_];
    const double tr = e[0][0] + e[1][1] + e[2][2];
    return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
  }

  friend constexpr bool operator==(OctaRotation a, OctaRotation b) { return a.index_ == b.index_; }

 private:
  int index_ = 0;
};

/// g minimizing the rotation angle between a·g and b. Ties go to the smaller index.
inline OctaRotation octahedral_matching(const Frame& a, const Frame& b) {
  const Mat3 m = a.axes.transpose() * b.axes;
  int best = 0;
  double best_score = -1e300;
  for (int i = 0; i < OctaRotation::kOrder; ++i) {
    const auto& g = detail::kOctahedralGroup[i];
    double score = 0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) score += g[r][c] * m(r, c);
    if (score > best_score + 1e-12) {
      best_score = score;
      best = i;
    }
  }
  return OctaRotation(best);
}

/// Rotation angle between frames a and b modulo the cube symmetry.
inline double frame_angle(const Frame& a, const Frame& b) {
  const OctaRotation g = octahedral_matching(a, b);
  const Mat3 rel = (a.axes * g.matrix()).transpose() * b.axes;
  return std::acos(std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0));
}

/// Composition of matchings around a closed loop, expressed in the first
/// frame's axes. Identity means no singularity is enclosed.
inline OctaRotation loop_rotation(std::span<const Frame> frames) {
  if (frames.size() < 3) throw InputError("loop_rotation: need at least 3 frames");
  OctaRotation acc;
  for (std::size_t i = 0; i < frames.size(); ++i)
    acc = acc * octahedral_matching(frames[i], frames[(i + 1) % frames.size()]);
  return acc;
}

}  // namespace neurframe
