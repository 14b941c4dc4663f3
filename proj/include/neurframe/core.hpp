#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace neurframe {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using ShVec = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

inline constexpr double kPi = 3.14159265358979323846;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, invalid meshes, out-of-contract arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MeshError : public InputError {
 public:
  using InputError::InputError;
};

/// Numerical failure during optimization (NaN gradients, degenerate outputs, divergence).
class NumericError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Portable uniform sampling on top of a 64-bit engine. The standard
// distributions are implementation-defined, which would break bit-exact replay
// across standard libraries.
template <class Engine>
double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

template <class Engine>
double uniform(Engine& engine, double lo, double hi) {
  return lo + (hi - lo) * uniform01(engine);
}

template <class Engine>
std::size_t uniform_index(Engine& engine, std::size_t n) {
  return static_cast<std::size_t>(uniform01(engine) * static_cast<double>(n)) % n;
}

/// Uniformly distributed rotation (Shoemake's quaternion method).
template <class Engine>
Mat3 random_rotation(Engine& engine) {
  const double u1 = uniform01(engine);
  const double u2 = uniform01(engine) * 2.0 * kPi;
  const double u3 = uniform01(engine) * 2.0 * kPi;
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  Eigen::Quaterniond q(a * std::sin(u2), a * std::cos(u2), b * std::sin(u3), b * std::cos(u3));
  return q.normalized().toRotationMatrix();
}

template <class Engine>
Vec3 random_unit_vector(Engine& engine) {
  const double z = uniform(engine, -1.0, 1.0);
  const double phi = uniform(engine, 0.0, 2.0 * kPi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

/// 64-bit FNV-1a, used for input fingerprints in run manifests.
inline std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace neurframe
