#pragma once

// Octahedral frames and their band-4 SH encoding.

#include "neurframe/core.hpp"
#include "neurframe/sh_basis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace neurframe {

/// Three orthonormal, right-handed axes stored as the columns of a rotation.
struct Frame {
  Mat3 axes = Mat3::Identity();

  static Frame identity() { return {}; }
  Vec3 axis(int i) const { return axes.col(i); }

  bool is_valid(double tol = 1e-10) const {
    return (axes.transpose() * axes - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
           std::abs(axes.determinant() - 1.0) < tol;
  }
};

/// 9x9 orthogonal matrix acting on SH coefficient vectors.
struct ShRotation {
  Mat9 m = Mat9::Identity();

  ShVec operator*(const ShVec& q) const { return m * q; }
  ShRotation operator*(const ShRotation& o) const { return {m * o.m}; }
};

inline bool is_rotation(const Mat3& r, double tol = 1e-8) {
  return r.allFinite() && (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(r.determinant() - 1.0) < tol;
}

/// F_V(s) = Σ_{i<j} (v_i·s)^2 (v_j·s)^2.
inline double evaluate_frame_function(const Frame& f, const Vec3& s) {
  if (std::abs(s.norm() - 1.0) > 1e-8) throw InputError("evaluate_frame_function: direction is not unit length");
  const Vec3 d = f.axes.transpose() * s;
  const Vec3 d2 = d.cwiseProduct(d);
  return d2[0] * d2[1] + d2[1] * d2[2] + d2[2] * d2[0];
}

namespace detail {

struct ZyzAngles {
  double alpha = 0, beta = 0, gamma = 0;
};

// R = Rz(alpha) Ry(beta) Rz(gamma).
inline ZyzAngles zyz_euler(const Mat3& r) {
  ZyzAngles a;
  const double sb = std::hypot(r(0, 2), r(1, 2));
  a.beta = std::atan2(sb, r(2, 2));
  if (sb > 1e-14) {
    a.alpha = std::atan2(r(1, 2), r(0, 2));
    a.gamma = std::atan2(r(2, 1), -r(2, 0));
  } else if (r(2, 2) > 0) {
    a.alpha = std::atan2(r(1, 0), r(0, 0));
  } else {
    a.alpha = std::atan2(-r(0, 1), r(1, 1));
  }
  return a;
}

inline Mat9 shrot_unchecked(const Mat3& r, const sh::Tables& tables) {
  const ZyzAngles a = zyz_euler(r);
  const Mat9& x90 = tables.rot_x90;
  return sh::rotation_about_z(a.alpha) * x90.transpose() * sh::rotation_about_z(a.beta) * x90 *
         sh::rotation_about_z(a.gamma);
}

struct Generators {
  std::array<Mat9, 3> e;  // infinitesimal rotations about x, y, z
};

inline const Generators& generators() {
  static const Generators g = [] {
    const Mat9& x90 = sh::default_tables().rot_x90;
    const Mat9 ez = sh::generator_z();
    const Mat9 ey = x90.transpose() * ez * x90;
    const Mat9 y90 = x90.transpose() * sh::rotation_about_z(kPi / 2) * x90;
    const Mat9 ex = y90 * ez * y90.transpose();
    return Generators{{ex, ey, ez}};
  }();
  return g;
}

inline Mat3 exp_so3(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

inline Mat3 reorthonormalize(const Mat3& r) {
  return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

}  // namespace detail

/// Coefficient rotation matching a 3D rotation: shrot(R) * frame_to_sh(V) == frame_to_sh(R V).
inline ShRotation shrot(const Mat3& r) {
  if (!is_rotation(r)) throw InputError("shrot: input is not a proper rotation");
  return {detail::shrot_unchecked(r, sh::default_tables())};
}

inline ShVec frame_to_sh(const Frame& f, const sh::Tables& tables) {
  return detail::shrot_unchecked(f.axes, tables) * sh::reference_coefficients();
}

inline ShVec frame_to_sh(const Frame& f) { return frame_to_sh(f, sh::default_tables()); }

/// Minimal rotation taking d onto +z (about d x z). Antipodal d uses 180° about x.
inline Mat3 rotation_to_z(const Vec3& d) {
  const Vec3 u = d.normalized();
  const double c = u.z();
  if (c < -1.0 + 1e-12) return Eigen::AngleAxisd(kPi, Vec3::UnitX()).toRotationMatrix();
  const Vec3 v = u.cross(Vec3::UnitZ());
  Mat3 vx;
  vx << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return Mat3::Identity() + vx + vx * vx / (1.0 + c);
}

/// Row e0ᵀ shrot(R_{d→z}); align_residual is sqrt(7/12) minus its dot with q.
inline ShVec alignment_row(const Vec3& d) {
  return shrot(rotation_to_z(d)).m.row(sh::kZonalIndex).transpose();
}

/// Zero iff (for valid frame coefficients) one frame axis is parallel to d.
inline double align_residual(const ShVec& q, const Vec3& d) {
  return sh::kAlignedZonal - alignment_row(d).dot(q);
}

inline double frame_distance(const ShVec& a, const ShVec& b) { return (a - b).squaredNorm(); }

struct ProjectionResult {
  Frame frame;
  bool converged = false;
  int iterations = 0;
  /// ‖frame_to_sh(frame) - q/‖q‖‖.
  double residual = 0;
};

struct ProjectionOptions {
  double tolerance = 1e-9;
  int max_iterations = 50;
  int restarts = 3;
};

namespace detail {

struct ProjectionSeed {
  Mat3 rotation;
  ShVec q;
};

inline const std::vector<ProjectionSeed>& projection_seeds() {
  static const std::vector<ProjectionSeed> seeds = [] {
    std::vector<ProjectionSeed> out;
    const auto rz = [](double t) { return Eigen::AngleAxisd(t, Vec3::UnitZ()).toRotationMatrix(); };
    const auto ry = [](double t) { return Eigen::AngleAxisd(t, Vec3::UnitY()).toRotationMatrix(); };
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 6; ++j)
        for (int k = 0; k < 4; ++k) {
          const Mat3 r = rz(i * kPi / 16) * ry(j * kPi / 10) * rz(k * kPi / 8);
          out.push_back({r, frame_to_sh(Frame{r})});
        }
    return out;
  }();
  return seeds;
}

inline ProjectionResult gauss_newton(const ShVec& target, Mat3 r, const ProjectionOptions& opt) {
  const auto& gen = generators();
  const ShVec ref = sh::reference_coefficients();
  const sh::Tables& tables = sh::default_tables();
  ProjectionResult res;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const ShVec cur = shrot_unchecked(r, tables) * ref;
    Eigen::Matrix<double, 9, 3> jac;
    for (int a = 0; a < 3; ++a) jac.col(a) = gen.e[a] * cur;
    const Vec3 step = (jac.transpose() * jac).ldlt().solve(-jac.transpose() * (cur - target));
    r = reorthonormalize(exp_so3(step) * r);
    res.iterations = it;
    if (!step.allFinite()) break;
    if (step.norm() < opt.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.frame.axes = r;
  res.residual = (shrot_unchecked(r, tables) * ref - target).norm();
  return res;
}

}  // namespace detail

/// Nearest frame to an arbitrary nonzero 9-vector (Gauss-Newton on the rotation
/// orbit of the reference coefficients). `converged` is false when the
/// increment never drops below tolerance, which happens near singularities.
inline ProjectionResult project_to_frame(const ShVec& q, const ProjectionOptions& opt = {}) {
  const double n = q.norm();
  if (!(n > 0) || !std::isfinite(n)) throw InputError("project_to_frame: zero or non-finite coefficient vector");
  const ShVec target = q / n;

  const auto& seeds = detail::projection_seeds();
  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(seeds.size());
  for (int i = 0; i < static_cast<int>(seeds.size()); ++i) ranked.emplace_back(-seeds[i].q.dot(target), i);
  const int k = std::min<int>(opt.restarts, static_cast<int>(ranked.size()));
  std::partial_sort(ranked.begin(), ranked.begin() + k, ranked.end());

  ProjectionResult best;
  bool have = false;
  for (int i = 0; i < k; ++i) {
    ProjectionResult r = detail::gauss_newton(target, seeds[ranked[i].second].rotation, opt);
    const bool better = !have || (r.converged && !best.converged) ||
                        (r.converged == best.converged && r.residual < best.residual - 1e-14);
    if (better) {
      best = r;
      have = true;
    }
  }
  return best;
}

}  // namespace neurframe
