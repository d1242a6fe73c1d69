#pragma once

#include "orthnewton/orthnewton.hpp"

#include <cmath>
#include <functional>

namespace orthnewton::testing {

/// Non-Gaussian n x t data with generic correlations: a random mix of
/// uniform, Laplace and two-point rows plus small Gaussian noise.
inline MatrixXd correlated_data(Eigen::Index n, Eigen::Index t, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd S(n, t);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index s = 0; s < t; ++s) {
      switch (i % 3) {
      case 0:
        S(i, s) = rng.uniform_unit_variance();
        break;
      case 1:
        S(i, s) = rng.laplace();
        break;
      default:
        S(i, s) = rng.two_point() + 0.3 * rng.normal();
      }
    }
  const MatrixXd A = MatrixXd::Identity(n, n) + 0.4 * rng.normal_matrix(n, n);
  return A * S;
}

inline MatrixXd random_skew_matrix(Eigen::Index n, Rng &rng) {
  const MatrixXd g = rng.normal_matrix(n, n);
  return 0.5 * (g - g.transpose());
}

/// Second-order central difference along x_a and x_b of
/// x -> F(exp(Delta(x)) Y) at x = 0, x in sqrt2-scaled reduced coordinates.
inline double fd_hessian_entry(const Cost<double> &cost, const MatrixXd &Y, Eigen::Index a,
                               Eigen::Index b, double h) {
  const Eigen::Index n = Y.rows();
  const Eigen::Index na = antisymmetric_dim(n);
  auto at = [&](double da, double db) {
    VectorXd x = VectorXd::Zero(na);
    x(a) += da;
    x(b) += db;
    const MatrixXd D = expm_skew(SkewCoordinates<double>::from_reduced(n, x));
    return cost_value(cost, MatrixXd(D * Y));
  };
  if (a == b)
    return (at(h, 0) - 2.0 * at(0, 0) + at(-h, 0)) / (h * h);
  return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
}

/// Five-point central differences of a scalar function at 0.
template <typename Scalar, typename Fn>
Scalar fd5_first(const Fn &f, Scalar h) {
  return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
}

template <typename Scalar, typename Fn>
Scalar fd5_second(const Fn &f, Scalar h) {
  return (-f(2 * h) + 16 * f(h) - 30 * f(0) + 16 * f(-h) - f(-2 * h)) / (12 * h * h);
}

/// Data whose rows are exactly independent in the sample sense: the full
/// Cartesian product of per-channel symmetric value sets.
inline MatrixXd factorial_data(const std::vector<std::vector<double>> &levels) {
  Eigen::Index t = 1;
  for (const auto &l : levels)
    t *= static_cast<Eigen::Index>(l.size());
  const auto n = static_cast<Eigen::Index>(levels.size());
  MatrixXd X(n, t);
  for (Eigen::Index s = 0; s < t; ++s) {
    Eigen::Index k = s;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto &l = levels[static_cast<std::size_t>(i)];
      const auto m = static_cast<Eigen::Index>(l.size());
      X(i, s) = l[static_cast<std::size_t>(k % m)];
      k /= m;
    }
  }
  return X;
}

} // namespace orthnewton::testing
