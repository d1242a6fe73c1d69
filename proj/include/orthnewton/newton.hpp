#pragma once

// Newton system on the skew subspace.
//
// The quadratic model of F(exp(Delta) Y) has gradient cs(R) + W cs(Delta)
// with W = (R' (x) I + I (x) R)/2 + (U_1 (+) ... (+) U_n) T. Rotating by
// H + P_D separates the symmetric slots (which must vanish for skew Delta)
// from the n(n-1)/2 antisymmetric slots.
//
// Orientation: in the antisymmetric slot coordinates x = [H cs(Delta)]_A the
// block [P_A H W H' P_A]_A is the *negated* Hessian of the model and
// [P_A H cs(R)]_A is the negated gradient (P_A H T = -P_A H). The system
// stores the Hessian itself so that damping adds lambda to a positive
// curvature near a minimum:
//
//   M_full = -P_A H W H' P_A + P_S + lambda I,   rhs = P_A H cs(R)
//
// With lambda = 0 the solution is the pure-Newton step
// cs(Delta) = -H' (P_A H W H' P_A + P_S)^{-1} P_A H cs(R).

#include "orthnewton/cost.hpp"
#include "orthnewton/matvec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace orthnewton {

/// Condition estimates above this reject the solve.
inline constexpr double kMaxCondition = 1e12;
/// Right-hand sides with norm below this return a zero step.
inline constexpr double kStationaryRhs = 1e-14;

/// W = (R' (x) I + I (x) R)/2 + blockdiag(U_1..U_n) T.
template <typename Scalar>
OperatorN2<Scalar> build_W(const CostEvaluation<Scalar> &eval) {
  const Eigen::Index n = eval.n();
  if (static_cast<Eigen::Index>(eval.U.size()) != n)
    throw InvalidArgument("build_W: expected one U matrix per channel");

  SparseOperator<Scalar> I(n, n);
  I.setIdentity();
  const SparseOperator<Scalar> R = eval.R.sparseView();
  const SparseOperator<Scalar> Rt = Matrix<Scalar>(eval.R.transpose()).sparseView();
  SparseOperator<Scalar> kron_sum =
      SparseOperator<Scalar>(Eigen::kroneckerProduct(Rt, I)) +
      SparseOperator<Scalar>(Eigen::kroneckerProduct(I, R));

  std::vector<Eigen::Triplet<Scalar>> t;
  t.reserve(n * n * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto &Uk = eval.U[static_cast<std::size_t>(k)];
    if (Uk.rows() != n || Uk.cols() != n)
      throw InvalidArgument("build_W: U matrices must be n x n");
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index r = 0; r < n; ++r)
        if (Uk(r, c) != Scalar(0))
          t.emplace_back(k * n + r, k * n + c, Uk(r, c));
  }
  SparseOperator<Scalar> blockdiag(n * n, n * n);
  blockdiag.setFromTriplets(t.begin(), t.end());

  const auto T = build_T<Scalar>(n);
  SparseOperator<Scalar> W = Scalar(0.5) * kron_sum + SparseOperator<Scalar>(blockdiag * T.op);
  W.makeCompressed();
  return {n, std::move(W), false, false};
}

template <typename Scalar = double>
struct NewtonSystem {
  Eigen::Index n = 0;
  OperatorN2<Scalar> W;
  /// -P_A H W H' P_A + P_S + lambda I.
  SparseOperator<Scalar> M_full;
  /// Undamped Hessian on the antisymmetric slots, antisymmetric_slots() order.
  Matrix<Scalar> M_red;
  /// [P_A H cs(R)] on the antisymmetric slots: minus the gradient.
  Vector<Scalar> rhs_red;
  /// P_A H cs(R) as a full column string.
  Vector<Scalar> rhs_full;
  Scalar lambda = 0;
};

/// Builds the Newton system at the current statistics with damping lambda.
template <typename Scalar>
NewtonSystem<Scalar> assemble(const CostEvaluation<Scalar> &eval, Scalar lambda = 0) {
  if (!(lambda >= 0) || !std::isfinite(lambda))
    throw InvalidArgument("assemble: lambda must be finite and >= 0");
  const Eigen::Index n = eval.n();
  if (n < 2)
    throw InvalidArgument("assemble: n must be >= 2");

  NewtonSystem<Scalar> sys;
  sys.n = n;
  sys.lambda = lambda;
  sys.W = build_W(eval);

  const auto H = build_H<Scalar>(n);
  const auto PA = build_PA<Scalar>(n);
  const auto PS = build_PS<Scalar>(n);
  const SparseOperator<Scalar> PAH = PA.op * H.op;
  const SparseOperator<Scalar> HtPA = SparseOperator<Scalar>(PAH.transpose());
  const SparseOperator<Scalar> block = PAH * sys.W.op * HtPA;

  SparseOperator<Scalar> I(n * n, n * n);
  I.setIdentity();
  sys.M_full = -block + PS.op + lambda * I;
  sys.M_full.makeCompressed();

  sys.rhs_full = PAH * cs(eval.R);

  const auto slots = antisymmetric_slots(n);
  const auto na = static_cast<Eigen::Index>(slots.size());
  std::vector<Eigen::Index> reduced_of(static_cast<std::size_t>(n * n), -1);
  for (Eigen::Index a = 0; a < na; ++a)
    reduced_of[static_cast<std::size_t>(slots[a].index)] = a;

  sys.M_red = Matrix<Scalar>::Zero(na, na);
  sys.rhs_red.resize(na);
  for (Eigen::Index a = 0; a < na; ++a)
    sys.rhs_red(a) = sys.rhs_full(slots[a].index);
  for (Eigen::Index col = 0; col < block.outerSize(); ++col)
    for (typename SparseOperator<Scalar>::InnerIterator it(block, col); it; ++it) {
      const Eigen::Index a = reduced_of[static_cast<std::size_t>(it.row())];
      const Eigen::Index b = reduced_of[static_cast<std::size_t>(it.col())];
      if (a >= 0 && b >= 0)
        sys.M_red(a, b) = -it.value();
    }
  return sys;
}

/// Same system with a different damping; M_red is unchanged.
template <typename Scalar>
NewtonSystem<Scalar> with_damping(NewtonSystem<Scalar> sys, Scalar lambda) {
  if (!(lambda >= 0) || !std::isfinite(lambda))
    throw InvalidArgument("with_damping: lambda must be finite and >= 0");
  SparseOperator<Scalar> I(sys.n * sys.n, sys.n * sys.n);
  I.setIdentity();
  sys.M_full += (lambda - sys.lambda) * I;
  sys.lambda = lambda;
  return sys;
}

/// Gradient of the model at Delta = 0 in reduced coordinates.
template <typename Scalar>
Vector<Scalar> reduced_gradient(const NewtonSystem<Scalar> &sys) {
  return -sys.rhs_red;
}

/// Solves (M_red + lambda I) x = rhs_red and maps x back to a skew matrix.
/// Throws SolverError when the condition estimate exceeds kMaxCondition.
template <typename Scalar>
SkewCoordinates<Scalar> solve_step(const NewtonSystem<Scalar> &sys) {
  if (sys.rhs_red.norm() < Scalar(kStationaryRhs))
    return SkewCoordinates<Scalar>::zero(sys.n);

  const Matrix<Scalar> A =
      sys.M_red + sys.lambda * Matrix<Scalar>::Identity(sys.M_red.rows(), sys.M_red.cols());
  Eigen::PartialPivLU<Matrix<Scalar>> lu(A);
  // rcond alone misses exactly zero pivots; the pivot spread is a lower bound.
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  const Scalar rc = lu.rcond();
  Scalar cond = std::numeric_limits<Scalar>::infinity();
  if (rc > Scalar(0) && std::isfinite(rc) && pivots.minCoeff() > Scalar(0))
    cond = std::max(Scalar(1) / rc, pivots.maxCoeff() / pivots.minCoeff());
  if (!(cond <= Scalar(kMaxCondition))) {
    std::ostringstream msg;
    msg << "solve_step: ill-conditioned Newton system (condition estimate " << cond
        << ", lambda " << sys.lambda << ")";
    throw SolverError(msg.str(), static_cast<double>(cond));
  }
  const Vector<Scalar> x = lu.solve(sys.rhs_red);
  if (!x.allFinite())
    throw SolverError("solve_step: non-finite solution", static_cast<double>(cond));
  return SkewCoordinates<Scalar>::from_reduced(sys.n, x);
}

/// Solves the full n^2 x n^2 system without the direct-sum reduction.
/// Slow; meant for cross-checking solve_step.
template <typename Scalar>
SkewCoordinates<Scalar> solve_full(const NewtonSystem<Scalar> &sys) {
  Eigen::SparseLU<SparseOperator<Scalar>> lu;
  lu.compute(sys.M_full);
  if (lu.info() != Eigen::Success)
    throw SolverError("solve_full: factorization failed", std::numeric_limits<double>::infinity());
  const Vector<Scalar> y = lu.solve(sys.rhs_full);
  const auto H = build_H<Scalar>(sys.n);
  const auto PD = build_PD<Scalar>(sys.n);
  const SparseOperator<Scalar> rot = H.op + PD.op;
  const Matrix<Scalar> D = cs_inv(Vector<Scalar>(rot.transpose() * y));
  // Exact skewness: rebuild from the strict upper triangle.
  return SkewCoordinates<Scalar>::skew_part(D);
}

/// Second-order model F + tr(Delta R) + tr(Delta^2 R)/2
///   + 1/2 sum_{i,k,l} Delta_ik Delta_il U_ikl.
template <typename Scalar>
Scalar model_value(const CostEvaluation<Scalar> &eval, const SkewCoordinates<Scalar> &delta) {
  const auto &D = delta.matrix();
  if (D.rows() != eval.n())
    throw InvalidArgument("model_value: dimension mismatch");
  Scalar quad_u = 0;
  for (Eigen::Index i = 0; i < D.rows(); ++i)
    quad_u += D.row(i) * eval.U[static_cast<std::size_t>(i)] * D.row(i).transpose();
  return eval.F + (D * eval.R).trace() + Scalar(0.5) * (D * D * eval.R).trace() +
         Scalar(0.5) * quad_u;
}

struct SparsityReport {
  Eigen::Index n = 0;
  Eigen::Index antisymmetric_block = 0;
  Eigen::Index symmetric_block = 0;
  Eigen::Index nnz_offdiag = 0;
  Eigen::Index bound = 0;
};

/// Block sizes and off-diagonal nonzeros of the undamped reduced block,
/// against the n(n-1)(n-2) bound.
template <typename Scalar>
SparsityReport sparsity_report(const NewtonSystem<Scalar> &sys) {
  SparsityReport rep;
  rep.n = sys.n;
  rep.antisymmetric_block = antisymmetric_dim(sys.n);
  rep.symmetric_block = symmetric_dim(sys.n);
  rep.bound = sys.n * (sys.n - 1) * (sys.n - 2);
  for (Eigen::Index b = 0; b < sys.M_red.cols(); ++b)
    for (Eigen::Index a = 0; a < sys.M_red.rows(); ++a)
      if (a != b && sys.M_red(a, b) != Scalar(0))
        ++rep.nnz_offdiag;
  return rep;
}

} // namespace orthnewton
