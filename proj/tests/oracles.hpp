#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// rotation tables or the Euler construction in the library.

#include "neurframe/core.hpp"
#include "neurframe/sh_basis.hpp"

#include <array>
#include <cmath>
#include <random>
#include <vector>

namespace neurframe::oracle {

struct SphereRule {
  std::vector<Vec3> points;
  std::vector<double> weights;
};

/// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1 - z * z) * dp * dp);
  }
}

/// Product rule: Gauss-Legendre in cos(theta) times uniform phi.
inline SphereRule sphere_rule(int n_theta, int n_phi) {
  std::vector<double> x, w;
  gauss_legendre(n_theta, x, w);
  SphereRule rule;
  for (int i = 0; i < n_theta; ++i) {
    const double r = std::sqrt(1 - x[i] * x[i]);
    for (int j = 0; j < n_phi; ++j) {
      const double phi = 2 * kPi * j / n_phi;
      rule.points.emplace_back(r * std::cos(phi), r * std::sin(phi), x[i]);
      rule.weights.push_back(w[i] * 2 * kPi / n_phi);
    }
  }
  return rule;
}

/// 20000-point rule, exact far beyond degree 8.
inline const SphereRule& dense_rule() {
  static const SphereRule rule = sphere_rule(100, 200);
  return rule;
}

/// F_V written out directly from the axes.
inline double frame_function(const Mat3& axes, const Vec3& s) {
  const double a = axes.col(0).dot(s), b = axes.col(1).dot(s), c = axes.col(2).dot(s);
  return a * a * b * b + b * b * c * c + c * c * a * a;
}

/// Band-4 projection of F_V by quadrature.
inline ShVec project_frame_function(const Mat3& axes) {
  const auto& rule = dense_rule();
  ShVec acc = ShVec::Zero();
  for (std::size_t i = 0; i < rule.points.size(); ++i)
    acc += rule.weights[i] * frame_function(axes, rule.points[i]) * sh::evaluate_basis(rule.points[i]);
  return acc;
}

/// Band-0 projection of F_V.
inline double project_band0(const Mat3& axes) {
  const auto& rule = dense_rule();
  double acc = 0;
  for (std::size_t i = 0; i < rule.points.size(); ++i)
    acc += rule.weights[i] * frame_function(axes, rule.points[i]) * sh::kY00;
  return acc;
}

/// Unit frame coefficients by quadrature: the band-4 projection divided by c1.
inline ShVec frame_coefficients(const Mat3& axes) {
  const ShVec p = project_frame_function(axes);
  return -p / p.norm();
}

/// Coefficient rotation by quadrature: M_ij = ∫ Y_i(s) Y_j(Rᵀ s) ds.
inline Mat9 coefficient_rotation(const Mat3& r) {
  const auto& rule = dense_rule();
  Mat9 m = Mat9::Zero();
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    const Vec3& s = rule.points[i];
    m += rule.weights[i] * sh::evaluate_basis(s) * sh::evaluate_basis(r.transpose() * s).transpose();
  }
  return m;
}

inline ShVec q_z(double theta) {
  ShVec q = ShVec::Zero();
  q[0] = std::sqrt(5.0 / 12.0) * std::cos(4 * theta);
  q[4] = std::sqrt(7.0 / 12.0);
  q[8] = std::sqrt(5.0 / 12.0) * std::sin(4 * theta);
  return q;
}

inline Mat3 rot(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

/// All 24 signed permutation matrices with det +1, enumerated without the library.
inline std::vector<Mat3> cube_rotations() {
  std::vector<Mat3> out;
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms)
    for (int s = 0; s < 8; ++s) {
      Mat3 m = Mat3::Zero();
      for (int c = 0; c < 3; ++c) m(p[c], c) = (s >> c) & 1 ? -1 : 1;
      if (m.determinant() > 0) out.push_back(m);
    }
  return out;
}

/// Smallest angle between two frames over all cube symmetries, by brute force.
inline double brute_frame_angle(const Mat3& a, const Mat3& b) {
  double best = 10;
  for (const Mat3& g : cube_rotations()) {
    const Mat3 rel = (a * g).transpose() * b;
    best = std::min(best, std::acos(std::clamp((rel.trace() - 1) / 2, -1.0, 1.0)));
  }
  return best;
}

/// Central finite difference of a scalar function of one variable.
template <class F>
double central_difference(F&& f, double h) {
  return (f(h) - f(-h)) / (2 * h);
}

}  // namespace neurframe::oracle
