#pragma once

// Outer iteration C(t+1) = exp(Delta(t)) C(t), Y(t) = C(t) X.
//
// Pure Newton applies every solved step. The Levenberg-Marquardt variant
// solves with damping lambda, rejects candidates that raise F (lambda *= alpha,
// retry) and accepts otherwise (lambda /= alpha). lambda is carried across
// outer iterations.

#include "orthnewton/cost.hpp"
#include "orthnewton/matvec.hpp"
#include "orthnewton/newton.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace orthnewton {

enum class Mode { pure_newton, levenberg_marquardt };

enum class Termination { step_tol, cost_tol, max_iter, lambda_overflow, solver_failure };

inline std::string to_string(Termination t) {
  switch (t) {
  case Termination::step_tol:
    return "step_tol";
  case Termination::cost_tol:
    return "cost_tol";
  case Termination::max_iter:
    return "max_iter";
  case Termination::lambda_overflow:
    return "lambda_overflow";
  case Termination::solver_failure:
    return "solver_failure";
  }
  return "unknown";
}

inline std::string to_string(Mode m) {
  return m == Mode::pure_newton ? "newton" : "lm";
}

/// Drift beyond this triggers reorthogonalize() after an accepted step.
inline constexpr double kReorthogonalizeDrift = 1e-10;

struct OptimizerConfig {
  double lambda0 = 50.0;
  double alpha = 10.0;
  double lambda_min = 1e-12;
  double lambda_max = 1e12;
  int max_iter = 200;
  int max_inner = 60;
  double tol_step = 1e-10;
  double tol_cost = 1e-12;
  Mode mode = Mode::levenberg_marquardt;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha > 1.0))
      throw InvalidArgument("config: alpha must be > 1");
    if (!(lambda_min >= 0.0 && lambda_min <= lambda0 && lambda0 <= lambda_max))
      throw InvalidArgument("config: need 0 <= lambda_min <= lambda0 <= lambda_max");
    if (max_iter < 0 || max_inner < 0)
      throw InvalidArgument("config: iteration limits must be >= 0");
    if (!(tol_step >= 0.0) || !(tol_cost >= 0.0))
      throw InvalidArgument("config: tolerances must be >= 0");
  }
};

/// One outer iteration. t = 0 is the starting point (step_norm 0, no solve).
struct IterationRecord {
  int t = 0;
  double F = 0;
  double step_norm = 0;
  double lambda = 0;
  int rejected = 0;
  double ortho_drift = 0;
};

template <typename Scalar = double>
struct RunResult {
  Matrix<Scalar> C_final;
  Matrix<Scalar> Y_final;
  std::vector<IterationRecord> trace;
  Termination termination = Termination::max_iter;
  std::string message;
  /// Norm of the reduced gradient at C_final.
  double gradient_norm = 0;

  int iterations() const { return trace.empty() ? 0 : trace.back().t; }
};

/// Iterate state: rotation C, rotated samples Y = C X, statistics at Y.
template <typename Scalar = double>
struct OptimizerState {
  Matrix<Scalar> C;
  Matrix<Scalar> Y;
  CostEvaluation<Scalar> eval;
  NewtonSystem<Scalar> system;
};

template <typename Scalar = double>
struct Candidate {
  SkewCoordinates<Scalar> delta;
  Matrix<Scalar> D;
  Matrix<Scalar> Y;
  Scalar F_new = 0;
  bool accepted = false;
  /// Set when the damped system could not be solved.
  std::optional<double> solver_condition;
};

/// Evaluates one damped candidate from `state`; never modifies it.
template <typename Scalar>
Candidate<Scalar> lm_inner_step(const OptimizerState<Scalar> &state, const Cost<Scalar> &cost,
                                Scalar lambda) {
  Candidate<Scalar> cand;
  try {
    cand.delta = solve_step(with_damping(state.system, lambda));
  } catch (const SolverError &e) {
    cand.solver_condition = e.condition();
    cand.accepted = false;
    cand.F_new = std::numeric_limits<Scalar>::quiet_NaN();
    return cand;
  }
  cand.D = expm_skew(cand.delta);
  cand.Y = cand.D * state.Y;
  cand.F_new = cost_value(cost, cand.Y);
  // Equal cost counts as acceptance.
  cand.accepted = !(cand.F_new > state.eval.F);
  return cand;
}

/// Stop on step_norm < tol_step, |F_t - F_{t-1}| < tol_cost, or t >= max_iter.
inline std::optional<Termination> check_convergence(const std::vector<IterationRecord> &trace,
                                                    const OptimizerConfig &config) {
  if (trace.empty())
    throw InvalidArgument("check_convergence: empty trace");
  const IterationRecord &last = trace.back();
  if (last.t >= 1) {
    if (last.step_norm < config.tol_step)
      return Termination::step_tol;
    if (trace.size() >= 2 && std::abs(last.F - trace[trace.size() - 2].F) < config.tol_cost)
      return Termination::cost_tol;
  }
  if (last.t >= config.max_iter)
    return Termination::max_iter;
  return std::nullopt;
}

/// Called after every recorded iteration (including t = 0).
template <typename Scalar = double>
using IterationObserver = std::function<void(const IterationRecord &, const OptimizerState<Scalar> &)>;

template <typename Scalar>
RunResult<Scalar> run(const Cost<Scalar> &cost, const Matrix<Scalar> &X, const Matrix<Scalar> &C0,
                      const OptimizerConfig &config,
                      const IterationObserver<Scalar> &observer = {}) {
  config.validate();
  validate_samples(X);
  if (C0.rows() != X.rows() || C0.cols() != X.rows())
    throw InvalidArgument("run: C0 must be n x n with n = channels of X");

  OptimizerState<Scalar> st;
  st.C = C0;
  if (orthogonality_drift(st.C) > Scalar(kReorthogonalizeDrift))
    st.C = reorthogonalize(st.C);
  st.Y = st.C * X;
  st.eval = evaluate(cost, st.Y);
  st.system = assemble(st.eval, Scalar(0));

  RunResult<Scalar> result;
  double lambda = config.mode == Mode::pure_newton ? 0.0 : config.lambda0;
  result.trace.push_back({0, static_cast<double>(st.eval.F), 0.0, lambda, 0,
                          static_cast<double>(orthogonality_drift(st.C))});
  if (observer)
    observer(result.trace.back(), st);

  if (config.max_iter == 0) {
    result.termination = Termination::max_iter;
  } else {
    for (int t = 1;; ++t) {
      SkewCoordinates<Scalar> delta;
      Matrix<Scalar> D, Y_new;
      int rejected = 0;
      double lambda_used = lambda;
      bool failed = false;

      if (config.mode == Mode::pure_newton) {
        try {
          delta = solve_step(st.system);
        } catch (const SolverError &e) {
          result.termination = Termination::solver_failure;
          result.message = e.what();
          failed = true;
        }
        if (!failed) {
          D = expm_skew(delta);
          Y_new = D * st.Y;
        }
      } else {
        for (;;) {
          auto cand = lm_inner_step(st, cost, static_cast<Scalar>(lambda));
          if (cand.accepted) {
            lambda_used = lambda;
            lambda = std::max(lambda / config.alpha, config.lambda_min);
            delta = std::move(cand.delta);
            D = std::move(cand.D);
            Y_new = std::move(cand.Y);
            break;
          }
          ++rejected;
          lambda *= config.alpha;
          if (lambda > config.lambda_max || rejected > config.max_inner) {
            result.termination = Termination::lambda_overflow;
            result.message = "no acceptable step up to lambda = " + std::to_string(lambda);
            failed = true;
            break;
          }
        }
      }
      if (failed)
        break;

      st.C = D * st.C;
      st.Y = std::move(Y_new);
      if (orthogonality_drift(st.C) > Scalar(kReorthogonalizeDrift)) {
        st.C = reorthogonalize(st.C);
        st.Y = st.C * X;
      }
      st.eval = evaluate(cost, st.Y);
      st.system = assemble(st.eval, Scalar(0));

      result.trace.push_back({t, static_cast<double>(st.eval.F),
                              static_cast<double>(delta.norm()), lambda_used, rejected,
                              static_cast<double>(orthogonality_drift(st.C))});
      if (observer)
        observer(result.trace.back(), st);

      if (auto stop = check_convergence(result.trace, config)) {
        result.termination = *stop;
        break;
      }
    }
  }

  result.gradient_norm = static_cast<double>(st.system.rhs_red.norm());
  result.C_final = std::move(st.C);
  result.Y_final = std::move(st.Y);
  return result;
}

} // namespace orthnewton
