#pragma once

#include "neurframe/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace neurframe {

/// Uniform bucket grid over a box. Primitives are registered by bounding box;
/// nearest() scans rings of cells outward and stops once no unvisited cell
/// can hold anything closer.
class UniformGrid {
 public:
  UniformGrid() = default;

  UniformGrid(const Vec3& lo, const Vec3& hi, double cell) : lo_(lo), cell_(cell) {
    for (int a = 0; a < 3; ++a) dims_[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / cell)));
    cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
  }

  void insert(int id, const Vec3& box_lo, const Vec3& box_hi) {
    const auto a = cell_of(box_lo), b = cell_of(box_hi);
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i) {
          auto& c = cells_[index(i, j, k)];
          if (c.empty() || c.back() != id) c.push_back(id);
        }
    count_ = std::max(count_, id + 1);
  }

  const std::vector<int>& bucket(const Vec3& p) const {
    const auto c = cell_of(p);
    return cells_[index(c[0], c[1], c[2])];
  }

  bool inside(const Vec3& p) const {
    for (int a = 0; a < 3; ++a)
      if (p[a] < lo_[a] || p[a] > lo_[a] + dims_[a] * cell_) return false;
    return true;
  }

  /// Lexicographically smallest (distance(id), id). Returns -1 when empty.
  template <class Distance>
  int nearest(const Vec3& p, Distance&& distance, double* best_distance = nullptr) const {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    const auto consider = [&](int id) {
      const double d = distance(id);
      if (d < best_d || (d == best_d && id < best)) {
        best_d = d;
        best = id;
      }
    };
    if (!inside(p)) {
      for (int id = 0; id < count_; ++id) consider(id);
    } else {
      const auto c = cell_of(p);
      const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
      for (int r = 0; r <= max_ring; ++r) {
        for (int k = c[2] - r; k <= c[2] + r; ++k)
          for (int j = c[1] - r; j <= c[1] + r; ++j)
            for (int i = c[0] - r; i <= c[0] + r; ++i) {
              if (std::max({std::abs(i - c[0]), std::abs(j - c[1]), std::abs(k - c[2])}) != r) continue;
              if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2]) continue;
              for (int id : cells_[index(i, j, k)]) consider(id);
            }
        // Cells in ring r+1 and beyond are at least r cells away.
        if (best >= 0 && best_d < r * cell_) break;
      }
    }
    if (best_distance) *best_distance = best_d;
    return best;
  }

 private:
  std::array<int, 3> cell_of(const Vec3& p) const {
    std::array<int, 3> c;
    for (int a = 0; a < 3; ++a)
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - lo_[a]) / cell_)), 0, dims_[a] - 1);
    return c;
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(dims_[0]) * (j + static_cast<std::size_t>(dims_[1]) * k);
  }

  Vec3 lo_ = Vec3::Zero();
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::vector<int>> cells_{1};
  int count_ = 0;
};

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

/// Closest point on triangle abc (Ericson, Real-Time Collision Detection 5.1.5).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + d1 / (d1 - d3) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace neurframe
