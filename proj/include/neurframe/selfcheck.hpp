#pragma once

// Embedded oracle checks run by `neurframe selfcheck`. Each check compares the
// library against a computation that does not share its code path.

#include "neurframe/frame.hpp"
#include "neurframe/mlp.hpp"
#include "neurframe/octahedral.hpp"

#include <random>
#include <string>
#include <vector>

namespace neurframe {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelfcheckReport {
  std::vector<CheckResult> checks;
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

namespace detail {

/// Band-4 coefficients of F_V by Gauss-Legendre x uniform-phi quadrature,
/// scaled by 1/c1 so they are comparable with frame_to_sh.
inline ShVec quadrature_frame_coefficients(const Mat3& axes) {
  constexpr int nt = 24, np = 48;
  static const auto nodes = [] {
    std::vector<std::pair<double, double>> xw(nt);
    for (int i = 0; i < nt; ++i) {
      double z = std::cos(kPi * (i + 0.75) / (nt + 0.5)), dp = 0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = z;
        for (int k = 2; k <= nt; ++k) {
          const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = nt * (z * p1 - p0) / (z * z - 1);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      xw[i] = {z, 2.0 / ((1 - z * z) * dp * dp)};
    }
    return xw;
  }();
  ShVec acc = ShVec::Zero();
  for (const auto& [z, w] : nodes) {
    const double r = std::sqrt(1 - z * z);
    for (int j = 0; j < np; ++j) {
      const double phi = 2 * kPi * j / np;
      const Vec3 s(r * std::cos(phi), r * std::sin(phi), z);
      const double a = axes.col(0).dot(s), b = axes.col(1).dot(s), c = axes.col(2).dot(s);
      // Only the band-4 part survives projection onto the band-4 basis.
      const double fv = 0.5 * (1.0 - (a * a * a * a + b * b * b * b + c * c * c * c));
      acc += (w * 2 * kPi / np * fv) * sh::evaluate_basis(s);
    }
  }
  return acc / sh::kC1;
}

template <class F>
CheckResult run_check(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {name, false, std::string("threw: ") + e.what()};
  }
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

/// `tables` is the hook for the negative control: pass a corrupted copy and
/// the quadrature check must fail.
inline SelfcheckReport run_selfcheck(const sh::Tables& tables = sh::default_tables()) {
  SelfcheckReport rep;
  std::mt19937_64 rng(20240917);

  rep.checks.push_back(detail::run_check("sh_quadrature_projection", [&] {
    double worst = 0;
    for (int i = 0; i < 20; ++i) {
      const Mat3 r = random_rotation(rng);
      const ShVec ref = detail::quadrature_frame_coefficients(r);
      worst = std::max(worst, (frame_to_sh(Frame{r}, tables) - ref).norm() / ref.norm());
    }
    return CheckResult{"sh_quadrature_projection", worst < 1e-6, "max rel err " + detail::sci(worst)};
  }));

  rep.checks.push_back(detail::run_check("sh_reference_vector", [&] {
    ShVec expected = ShVec::Zero();
    expected(0) = std::sqrt(5.0 / 12.0);
    expected(4) = std::sqrt(7.0 / 12.0);
    const double err = (frame_to_sh(Frame::identity(), tables) - expected).cwiseAbs().maxCoeff();
    return CheckResult{"sh_reference_vector", err < 1e-14, "max abs err " + detail::sci(err)};
  }));

  rep.checks.push_back(detail::run_check("shrot_homomorphism", [&] {
    double worst = 0;
    for (int i = 0; i < 50; ++i) {
      const Mat3 a = random_rotation(rng), b = random_rotation(rng);
      const Mat9 sa = detail::shrot_unchecked(a, tables), sb = detail::shrot_unchecked(b, tables);
      worst = std::max(worst, (detail::shrot_unchecked(a * b, tables) - sa * sb).cwiseAbs().maxCoeff());
      worst = std::max(worst, (sa.transpose() * sa - Mat9::Identity()).cwiseAbs().maxCoeff());
    }
    return CheckResult{"shrot_homomorphism", worst < 1e-8, "max abs err " + detail::sci(worst)};
  }));

  rep.checks.push_back(detail::run_check("octahedral_group_closure", [&] {
    int bad = 0;
    for (int i = 0; i < OctaRotation::kOrder; ++i) {
      const OctaRotation g(i);
      if (!(g * g.inverse()).is_identity()) ++bad;
      if (!is_rotation(g.matrix())) ++bad;
      for (int j = 0; j < OctaRotation::kOrder; ++j)
        if (((g * OctaRotation(j)).matrix() - g.matrix() * OctaRotation(j).matrix()).cwiseAbs().maxCoeff() > 0) ++bad;
      // Cube symmetry leaves the SH vector unchanged.
      if ((frame_to_sh(Frame{g.matrix()}, tables) - frame_to_sh(Frame::identity(), tables)).cwiseAbs().maxCoeff() > 1e-12)
        ++bad;
    }
    return CheckResult{"octahedral_group_closure", bad == 0, std::to_string(bad) + " violations"};
  }));

  rep.checks.push_back(detail::run_check("mlp_gradient", [&] {
    MlpParams p = init_params(MlpShape{3, 6, 1, 9, 30.0}, 3);
    Points x(3, 4);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -1, 1);
    ShBatch c(9, 4);
    for (int i = 0; i < c.size(); ++i) c.data()[i] = uniform(rng, -1, 1);
    const auto loss = [&](const MlpParams& q) { return (evaluate(q, x).array() * c.array()).sum(); };
    const ForwardPass f = forward(p, x);
    MlpParams g = backward(p, f, c);
    auto ps = parameter_pointers(p);
    auto gs = parameter_pointers(g);
    double worst = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double saved = *ps[i];
      *ps[i] = saved + 1e-5;
      const double up = loss(p);
      *ps[i] = saved - 1e-5;
      const double down = loss(p);
      *ps[i] = saved;
      const double fd = (up - down) / 2e-5;
      const double scale = std::max({std::abs(fd), std::abs(*gs[i]), 1e-9});
      worst = std::max(worst, std::abs(fd - *gs[i]) / scale);
    }
    return CheckResult{"mlp_gradient", worst < 1e-4, "max rel err " + detail::sci(worst)};
  }));

  return rep;
}

}  // namespace neurframe
