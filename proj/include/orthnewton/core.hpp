#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace orthnewton {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using SparseOperator = Eigen::SparseMatrix<Scalar>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad shape, bad argument, or violated precondition.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A statistic or matrix entry overflowed to inf/nan.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// A channel whose second moment is too small to normalize.
class DegenerateChannel : public Error {
public:
  using Error::Error;
};

/// Covariance or matrix without full rank.
class RankDeficient : public Error {
public:
  using Error::Error;
};

/// Newton system singular or too ill-conditioned to trust. Carries the
/// condition estimate so the caller can decide to raise the damping.
class SolverError : public Error {
public:
  SolverError(const std::string &what, double condition)
      : Error(what), condition_(condition) {}

  double condition() const noexcept { return condition_; }

private:
  double condition_;
};

} // namespace orthnewton
