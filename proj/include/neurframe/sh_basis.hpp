#pragma once

// Real band-4 spherical harmonics and the fixed tables the frame algebra is
// built on.
//
// Coefficient layout: index 4 is the zonal Y_{4,0}; index 4-k carries the
// cos(k*phi) harmonic and 4+k the sin(k*phi) harmonic (k = 1..4), with the
// Condon-Shortley sign on odd k. Under this layout a frame with one axis along
// z and in-plane angle theta encodes as
//   (sqrt(5/12) cos4θ, 0, 0, 0, sqrt(7/12), 0, 0, 0, sqrt(5/12) sin4θ).

#include "neurframe/core.hpp"

#include <cmath>

namespace neurframe::sh {

inline constexpr int kBandSize = 9;
inline constexpr int kZonalIndex = 4;

/// Y_{4,0} weight of any frame with one axis along z: sqrt(7/12).
inline const double kAlignedZonal = std::sqrt(7.0 / 12.0);
/// cos4θ / sin4θ weight of the z-aligned family: sqrt(5/12).
inline const double kAlignedSectoral = std::sqrt(5.0 / 12.0);

/// Band-0 part of F_V: F_V = c0*Y00 + c1*Σ q_i Y4i. Frame-independent.
inline const double kC0 = 2.0 * std::sqrt(kPi) / 5.0;
/// Band-4 scale. Negative because F_V = (1 - Σ(v_i·s)^4)/2 and q is taken as
/// the unit coefficient vector of Σ(v_i·s)^4.
inline const double kC1 = -4.0 * std::sqrt(kPi / 525.0);
/// Y_{0,0}.
inline const double kY00 = 0.5 / std::sqrt(kPi);

/// Evaluates the 9 band-4 basis functions at a unit vector.
inline ShVec evaluate_basis(const Vec3& s) {
  const double x = s.x(), y = s.y(), z = s.z();
  const double x2 = x * x, y2 = y * y, z2 = z * z;
  const double inv_pi = 1.0 / kPi;
  ShVec out;
  out[4] = 3.0 / 16.0 * std::sqrt(inv_pi) * (35.0 * z2 * z2 - 30.0 * z2 + 3.0);
  const double k1 = -0.75 * std::sqrt(2.5 * inv_pi) * z * (7.0 * z2 - 3.0);
  out[3] = k1 * x;
  out[5] = k1 * y;
  const double k2 = (7.0 * z2 - 1.0) * std::sqrt(5.0 * inv_pi);
  out[2] = 3.0 / 8.0 * k2 * (x2 - y2);
  out[6] = 0.75 * k2 * x * y;
  const double k3 = -0.75 * std::sqrt(17.5 * inv_pi) * z;
  out[1] = k3 * x * (x2 - 3.0 * y2);
  out[7] = k3 * y * (3.0 * x2 - y2);
  const double k4 = std::sqrt(35.0 * inv_pi);
  out[0] = 3.0 / 16.0 * k4 * (x2 * x2 - 6.0 * x2 * y2 + y2 * y2);
  out[8] = 0.75 * k4 * x * y * (x2 - y2);
  return out;
}

/// SH vector of the axis-aligned (identity) frame.
inline ShVec reference_coefficients() {
  ShVec q = ShVec::Zero();
  q[0] = kAlignedSectoral;
  q[4] = kAlignedZonal;
  return q;
}

/// Block rotation acting on coefficients when functions are rotated by theta
/// about z. Pairs (4-k, 4+k) mix with cos(kθ), sin(kθ).
inline Mat9 rotation_about_z(double theta) {
  Mat9 m = Mat9::Zero();
  m(4, 4) = 1.0;
  for (int k = 1; k <= 4; ++k) {
    const double c = std::cos(k * theta);
    const double s = std::sin(k * theta);
    m(4 - k, 4 - k) = c;
    m(4 - k, 4 + k) = -s;
    m(4 + k, 4 - k) = s;
    m(4 + k, 4 + k) = c;
  }
  return m;
}

/// d/dθ of rotation_about_z at θ = 0.
inline Mat9 generator_z() {
  Mat9 m = Mat9::Zero();
  for (int k = 1; k <= 4; ++k) {
    m(4 - k, 4 + k) = -k;
    m(4 + k, 4 - k) = k;
  }
  return m;
}

/// Tables the rotation construction depends on. Held by value so a test can
/// run the algebra against a deliberately corrupted copy.
struct Tables {
  /// Coefficient rotation for a +90° rotation about x; the -90° rotation is
  /// its transpose.
  Mat9 rot_x90;
};

inline const Tables& default_tables() {
  static const Tables tables = [] {
    constexpr double a = 0.66143782776614764763;  // sqrt(7)/4
    constexpr double b = 0.73950997288745200532;  // sqrt(35)/8
    constexpr double c = 0.93541434669348534640;  // sqrt(14)/4
    constexpr double d = 0.35355339059327376220;  // sqrt(2)/4
    constexpr double e = 0.55901699437494742410;  // sqrt(5)/4
    Tables t;
    // clang-format off
    t.rot_x90 <<
        0.125,  0.0, -a,    0.0,  b,     0.0,  0.0,  0.0,  0.0,
        0.0,    0.0,  0.0,  0.0,  0.0,   0.0,  c,    0.0, -d,
       -a,      0.0,  0.5,  0.0,  e,     0.0,  0.0,  0.0,  0.0,
        0.0,    0.0,  0.0,  0.0,  0.0,   0.0,  d,    0.0,  c,
        b,      0.0,  e,    0.0,  0.375, 0.0,  0.0,  0.0,  0.0,
        0.0,    0.0,  0.0,  0.0,  0.0,   0.75, 0.0,  a,    0.0,
        0.0,   -c,    0.0, -d,    0.0,   0.0,  0.0,  0.0,  0.0,
        0.0,    0.0,  0.0,  0.0,  0.0,   a,    0.0, -0.75, 0.0,
        0.0,    d,    0.0, -c,    0.0,   0.0,  0.0,  0.0,  0.0;
    // clang-format on
    return t;
  }();
  return tables;
}

}  // namespace neurframe::sh
