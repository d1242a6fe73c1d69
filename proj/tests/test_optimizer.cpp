#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

#include <numbers>

using namespace orthnewton;
using namespace orthnewton::testing;

namespace {

MatrixXd whitened_problem(std::uint64_t seed) {
  const std::vector<SourceKind> kinds{SourceKind::uniform, SourceKind::laplace,
                                      SourceKind::two_point};
  const MatrixXd S = synthetic_sources(kinds, 10000, seed);
  return prewhiten(MatrixXd(make_mixing(3, seed).A * S)).first;
}

OptimizerState<double> state_at(const Cost<double> &cost, const MatrixXd &Y) {
  OptimizerState<double> st;
  st.C = MatrixXd::Identity(Y.rows(), Y.rows());
  st.Y = Y;
  st.eval = evaluate(cost, Y);
  st.system = assemble(st.eval, 0.0);
  return st;
}

MatrixXd rotation(double th) {
  MatrixXd R(2, 2);
  R << std::cos(th), std::sin(th), -std::sin(th), std::cos(th);
  return R;
}

IterationRecord rec(int t, double F, double step) { return {t, F, step, 0.0, 0, 0.0}; }

} // namespace

TEST_CASE("configuration validation") {
  OptimizerConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.lambda0 == 50.0);
  CHECK(c.alpha == 10.0);
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.lambda0 = 1e13;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.tol_step = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("stopping rule") {
  OptimizerConfig c;
  c.max_iter = 5;
  CHECK(!check_convergence({rec(0, 1.0, 0.0)}, c));
  CHECK(check_convergence({rec(0, 1.0, 0.0), rec(1, 0.5, 0.0)}, c) == Termination::step_tol);
  CHECK(check_convergence({rec(0, 1.0, 0.0), rec(1, 1.0, 0.3)}, c) == Termination::cost_tol);

  std::vector<IterationRecord> trace{rec(0, 1.0, 0.0)};
  std::optional<Termination> stop;
  for (int t = 1; !stop; ++t) {
    trace.push_back(rec(t, t % 2 ? 2.0 : 1.0, 0.1));
    stop = check_convergence(trace, c);
  }
  CHECK(*stop == Termination::max_iter);
  CHECK(trace.back().t == 5);
  CHECK_THROWS_AS(check_convergence({}, c), InvalidArgument);
}

TEST_CASE("a stationary start stops after one zero step") {
  // Exactly independent symmetric channels: R is diagonal at C = I.
  const MatrixXd X =
      factorial_data({{-1.5, -0.5, 0.5, 1.5}, {-2.0, -0.2, 0.2, 2.0}, {-1.0, 1.0}});
  for (Mode mode : {Mode::pure_newton, Mode::levenberg_marquardt}) {
    OptimizerConfig c;
    c.mode = mode;
    const MatrixXd C0 = MatrixXd::Identity(3, 3);
    const auto r = run(make_neg_kurtosis_squared(), X, C0, c);
    CHECK(r.termination == Termination::step_tol);
    CHECK(r.iterations() == 1);
    CHECK(r.C_final == C0);
    CHECK(r.trace[1].step_norm == 0.0);
  }
}

TEST_CASE("LM accepted costs never increase") {
  for (std::uint64_t seed : {1, 2, 3}) {
    OptimizerConfig c;
    const auto r = run(make_neg_kurtosis_squared(), whitened_problem(seed),
                       MatrixXd(MatrixXd::Identity(3, 3)), c);
    CHECK((r.termination == Termination::step_tol || r.termination == Termination::cost_tol));
    for (std::size_t t = 1; t < r.trace.size(); ++t)
      CHECK(r.trace[t].F <= r.trace[t - 1].F);
    CHECK(r.trace.front().lambda == 50.0);
  }
}

TEST_CASE("lambda is carried across iterations") {
  OptimizerConfig c;
  const auto r = run(make_neg_kurtosis(), whitened_problem(4), MatrixXd(MatrixXd::Identity(3, 3)), c);
  REQUIRE(r.trace.size() >= 3);
  double before = c.lambda0;
  for (std::size_t t = 1; t < r.trace.size(); ++t) {
    double used = before;
    for (int k = 0; k < r.trace[t].rejected; ++k)
      used *= c.alpha;
    CHECK(r.trace[t].lambda == doctest::Approx(used));
    before = std::max(used / c.alpha, c.lambda_min);
  }
}

TEST_CASE("pure Newton converges quadratically near the optimum") {
  const MatrixXd X = whitened_problem(5);
  const auto cost = make_neg_kurtosis_squared();
  const auto base = run(cost, X, MatrixXd(MatrixXd::Identity(3, 3)), OptimizerConfig{});
  REQUIRE(base.gradient_norm < 1e-8);

  Rng rng(6);
  auto d = SkewCoordinates<double>::from_matrix(random_skew_matrix(3, rng));
  d = (0.03 / d.norm()) * d;
  OptimizerConfig c;
  c.mode = Mode::pure_newton;
  c.tol_cost = 0;
  c.tol_step = 1e-13;
  const auto r = run(cost, X, MatrixXd(expm_skew(d) * base.C_final), c);
  std::vector<double> e;
  for (const auto &rc : r.trace)
    if (rc.t > 0)
      e.push_back(rc.step_norm);
  REQUIRE(e.size() >= 4);
  CHECK(e[0] < 0.05);
  for (std::size_t t = 0; t + 1 < 3; ++t)
    CHECK(e[t + 1] <= 10.0 * e[t] * e[t]);
}

TEST_CASE("heavy damping gives an accepted descent step") {
  const auto cost = make_neg_kurtosis_squared();
  const auto st = state_at(cost, whitened_problem(7));
  const auto cand = lm_inner_step(st, cost, 1e6);
  CHECK(cand.accepted);
  CHECK(cand.F_new < st.eval.F);
  const MatrixXd descent = 0.5 * (st.eval.R - st.eval.R.transpose());
  CHECK((1e6 * cand.delta.matrix() - descent).norm() <= 1e-3 * descent.norm());
}

TEST_CASE("stationary state yields a zero accepted step") {
  const auto cost = make_neg_kurtosis();
  const MatrixXd X = factorial_data({{-1.0, 1.0}, {-1.5, -0.5, 0.5, 1.5}});
  const auto st = state_at(cost, X);
  const auto cand = lm_inner_step(st, cost, 50.0);
  CHECK(cand.accepted);
  CHECK(cand.F_new == st.eval.F);
  CHECK(cand.delta.norm() == 0.0);

  OptimizerConfig c;
  c.tol_step = 0;
  c.tol_cost = 0;
  c.max_iter = 3;
  const auto r = run(cost, X, MatrixXd(MatrixXd::Identity(2, 2)), c);
  CHECK(r.trace[1].lambda == 50.0);
  CHECK(r.trace[2].lambda == doctest::Approx(5.0));
  CHECK(r.trace[3].lambda == doctest::Approx(0.5));
}

TEST_CASE("overshooting Newton step is rejected and damping recovers") {
  // Two sub-Gaussian channels: F(theta) under -kappa is a pure cos(4 theta)
  // wave, so starting near its inflection sends the undamped step far away.
  const auto cost = make_neg_kurtosis();
  const std::vector<SourceKind> kinds{SourceKind::uniform, SourceKind::uniform};
  const MatrixXd S = prewhiten(synthetic_sources(kinds, 20000, 8)).first;
  bool found = false;
  for (int k = 1; k <= 200 && !found; ++k) {
    const double th = std::numbers::pi / 8 + 0.0025 * k;
    const auto st = state_at(cost, MatrixXd(rotation(th) * S));
    const auto newton = lm_inner_step(st, cost, 0.0);
    if (newton.accepted || newton.solver_condition)
      continue;
    found = true;
    CAPTURE(th);
    CHECK(newton.F_new > st.eval.F);
    bool recovered = false;
    for (double lambda = 1e-3; lambda < 1e12 && !recovered; lambda *= 10) {
      const auto cand = lm_inner_step(st, cost, lambda);
      recovered = cand.accepted;
      if (recovered)
        CHECK(cand.F_new <= st.eval.F);
    }
    CHECK(recovered);
  }
  CHECK(found);
}

TEST_CASE("a singular candidate is rejected with its condition estimate") {
  // Singular undamped system with a nonzero gradient.
  OptimizerState<double> st;
  st.C = MatrixXd::Identity(2, 2);
  st.system.n = 2;
  st.system.M_red = MatrixXd::Zero(1, 1);
  st.system.rhs_red = VectorXd::Ones(1);
  st.system.M_full = SparseOperator<double>(4, 4);
  st.eval.F = 0;
  st.Y = MatrixXd::Ones(2, 4);
  const auto cand = lm_inner_step(st, make_neg_kurtosis(), 0.0);
  CHECK(!cand.accepted);
  REQUIRE(cand.solver_condition.has_value());
  CHECK(*cand.solver_condition > kMaxCondition);
}

TEST_CASE("orthogonality and covariance are preserved along the run") {
  const MatrixXd X = whitened_problem(9);
  const MatrixXd I = MatrixXd::Identity(3, 3);
  int calls = 0;
  const IterationObserver<double> obs = [&](const IterationRecord &r, const OptimizerState<double> &st) {
    ++calls;
    CHECK(r.ortho_drift <= 1e-9);
    const MatrixXd cov = st.Y * st.Y.transpose() / static_cast<double>(st.Y.cols());
    CHECK((cov - I).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((st.Y - st.C * X).cwiseAbs().maxCoeff() <= 1e-10);
  };
  Rng rng(10);
  const auto r = run(make_neg_kurtosis_squared(), X, random_orthogonal(3, rng), OptimizerConfig{}, obs);
  CHECK(calls == static_cast<int>(r.trace.size()));
}

TEST_CASE("runs are bit-reproducible") {
  const MatrixXd X = whitened_problem(11);
  const auto a = run(make_neg_kurtosis_squared(), X, MatrixXd(MatrixXd::Identity(3, 3)), OptimizerConfig{});
  const auto b = run(make_neg_kurtosis_squared(), X, MatrixXd(MatrixXd::Identity(3, 3)), OptimizerConfig{});
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    CHECK(a.trace[t].F == b.trace[t].F);
    CHECK(a.trace[t].step_norm == b.trace[t].step_norm);
  }
  CHECK(a.C_final == b.C_final);
}

TEST_CASE("zero iteration budget returns the start") {
  OptimizerConfig c;
  c.max_iter = 0;
  const MatrixXd X = whitened_problem(12);
  const auto r = run(make_neg_kurtosis(), X, MatrixXd(MatrixXd::Identity(3, 3)), c);
  CHECK(r.termination == Termination::max_iter);
  CHECK(r.trace.size() == 1);
  CHECK(r.C_final == MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(run(make_neg_kurtosis(), X, MatrixXd(MatrixXd::Identity(2, 2)), c),
                  InvalidArgument);
}
