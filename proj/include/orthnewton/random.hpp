#pragma once

// All randomness comes from std::mt19937_64 seeded with a 64-bit value.
// Conversions to real-valued draws are done here rather than through the
// <random> distributions, whose algorithms differ between standard libraries:
//
//   uniform01  : (x >> 11) * 2^-53, in [0, 1)
//   normal     : Box-Muller on two uniform01 draws (cosine branch only)
//   laplace    : inverse CDF, unit variance (scale 1/sqrt2)
//
// derive_seed() mixes a base seed with a stream id through splitmix64 so that
// independent consumers (mixing matrix, sources, initial rotations) never
// share a stream.

#include "orthnewton/core.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace orthnewton {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (lo, hi).
  double uniform_open(double lo, double hi) {
    double u = 0;
    do {
      u = uniform01();
    } while (u == 0.0);
    return lo + (hi - lo) * u;
  }

  double normal() {
    const double u1 = uniform_open(0.0, 1.0);
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Laplace with zero mean and unit variance.
  double laplace() {
    const double u = uniform_open(-0.5, 0.5);
    const double b = 1.0 / std::numbers::sqrt2;
    return u < 0 ? b * std::log(1.0 + 2.0 * u) : -b * std::log(1.0 - 2.0 * u);
  }

  /// Uniform on [-sqrt3, sqrt3): zero mean, unit variance.
  double uniform_unit_variance() {
    const double s = std::numbers::sqrt3;
    return -s + 2.0 * s * uniform01();
  }

  /// +1 or -1 with equal probability.
  double two_point() { return (engine_() >> 63) ? 1.0 : -1.0; }

  MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r)
        m(r, c) = normal();
    return m;
  }

private:
  std::mt19937_64 engine_;
};

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of R's diagonal folded into Q.
inline MatrixXd random_orthogonal(Eigen::Index n, Rng &rng) {
  const MatrixXd g = rng.normal_matrix(n, n);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0)
      q.col(i) *= -1.0;
  return q;
}

} // namespace orthnewton
