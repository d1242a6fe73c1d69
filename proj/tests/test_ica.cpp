#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

using namespace orthnewton;
using namespace orthnewton::testing;

namespace {

const std::vector<SourceKind> kMixedKinds{SourceKind::uniform, SourceKind::laplace,
                                          SourceKind::two_point};

double max_abs(const MatrixXd &m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("whitening of a diagonal covariance") {
  MatrixXd S(2, 4);
  S << 1, -1, 1, -1, 1, 1, -1, -1;
  const MatrixXd X = (VectorXd(2) << 2, 1).finished().asDiagonal() * S;
  const auto [Z, w] = prewhiten(X);
  MatrixXd expected = MatrixXd::Zero(2, 2);
  expected(0, 0) = 0.5;
  expected(1, 1) = 1.0;
  CHECK(max_abs(w.matrix - expected) <= 1e-15);
  CHECK(max_abs(Z - S) <= 1e-15);
}

TEST_CASE("whitened data has identity covariance") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed);
    Rng rng(seed);
    const MatrixXd X = rng.normal_matrix(n, n) * correlated_data(n, 3000, seed) +
                       MatrixXd::Constant(n, 3000, 4.0);
    const auto [Z, w] = prewhiten(X);
    CHECK(max_abs(sample_covariance(Z) - MatrixXd::Identity(n, n)) <= 1e-10);
    CHECK(Z.rowwise().mean().cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(max_abs(w.apply(X) - Z) <= 1e-12);
    CHECK(max_abs(w.matrix - w.matrix.transpose()) <= 1e-12);
  }
}

TEST_CASE("white input whitens to itself") {
  const MatrixXd S = factorial_data({{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}});
  const auto [Z, w] = prewhiten(S);
  CHECK(max_abs(w.matrix - MatrixXd::Identity(3, 3)) <= 1e-14);
  CHECK(max_abs(Z - S) <= 1e-14);
}

TEST_CASE("rank-deficient data is rejected") {
  MatrixXd X = correlated_data(3, 200, 1);
  X.row(2) = X.row(0) - 2.0 * X.row(1);
  CHECK_THROWS_WITH_AS(prewhiten(X), "rank-deficient data", RankDeficient);
}

TEST_CASE("mixing matrices") {
  const auto a = make_mixing(3, 7);
  const auto b = make_mixing(3, 7);
  CHECK(a.A == b.A);
  CHECK(make_mixing(3, 8).A != a.A);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const MatrixXd S = make_mixing(3, seed).A - MatrixXd::Identity(3, 3);
    CHECK(S.cwiseAbs().maxCoeff() < 0.5);
  }
}

TEST_CASE("whitening a seeded mixture") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MatrixXd X = make_mixing(3, seed).A * synthetic_sources(kMixedKinds, 10000, seed);
    CHECK(max_abs(sample_covariance(prewhiten(X).first) - MatrixXd::Identity(3, 3)) <= 1e-10);
  }
}

TEST_CASE("synthetic sources have the intended kurtosis signs") {
  const MatrixXd S = synthetic_sources(kMixedKinds, 200000, 3);
  CHECK(kurtosis(S.row(0)) == doctest::Approx(-1.2).epsilon(0.05));
  CHECK(kurtosis(S.row(1)) == doctest::Approx(3.0).epsilon(0.15));
  CHECK(kurtosis(S.row(2)) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(synthetic_sources(kMixedKinds, 100, 3) == synthetic_sources(kMixedKinds, 100, 3));
  CHECK(parse_source_kind("twopoint") == SourceKind::two_point);
  CHECK_THROWS_AS(parse_source_kind("cauchy"), InvalidArgument);
}

TEST_CASE("global transfer") {
  const auto mix = make_mixing(3, 1);
  const MatrixXd X = mix.A * synthetic_sources(kMixedKinds, 5000, 1);
  const auto w = prewhiten(X).second;
  const MatrixXd exact = (w.matrix * mix.A).inverse();
  CHECK(max_abs(global_transfer(exact, w, mix.A) - MatrixXd::Identity(3, 3)) <= 1e-12);
  CHECK(crosstalk(global_transfer(exact, w, mix.A)).mean_percent < 1e-8);

  MatrixXd P = MatrixXd::Zero(3, 3);
  P(0, 2) = -1;
  P(1, 0) = 1;
  P(2, 1) = -1;
  const MatrixXd G = global_transfer(MatrixXd(P * exact), w, mix.A);
  CHECK(max_abs(G - P) <= 1e-12);

  Rng rng(2);
  const MatrixXd dense = global_transfer(random_orthogonal(3, rng), w, mix.A);
  CHECK((dense.array().abs() > 1e-3).count() > 3);
}

TEST_CASE("crosstalk formula") {
  MatrixXd P = MatrixXd::Zero(3, 3);
  P(0, 1) = -2;
  P(1, 2) = 1;
  P(2, 0) = 0.5;
  auto r = crosstalk(P);
  CHECK(r.mean_percent == 0.0);
  CHECK(r.permutation == std::vector<Eigen::Index>{1, 2, 0});
  CHECK(r.permutation_is_bijection);

  MatrixXd G2(2, 2);
  G2 << 1, 0.1, 0, 1;
  r = crosstalk(G2);
  CHECK(r.per_channel(0) == doctest::Approx(0.1));
  CHECK(r.per_channel(1) == 0.0);
  CHECK(r.mean_percent == doctest::Approx(5.0));

  MatrixXd G3(3, 3);
  G3 << 1, 0.5, 0.5, 0, 1, 0, 0, 0, 1;
  r = crosstalk(G3);
  CHECK(r.per_channel(0) == doctest::Approx(1.0));
  CHECK(r.mean_percent == doctest::Approx(100.0 / 3.0));

  MatrixXd tie(2, 2);
  tie << 1, -1, 0.2, 1;
  r = crosstalk(tie);
  CHECK(r.permutation[0] == 0);
  CHECK(r.permutation[1] == 1);

  MatrixXd dup(2, 2);
  dup << 1, 0.2, 1, 0.3;
  CHECK(!crosstalk(dup).permutation_is_bijection);

  MatrixXd zero_row = MatrixXd::Identity(2, 2);
  zero_row.row(1).setZero();
  CHECK_THROWS_AS(crosstalk(zero_row), InvalidArgument);
}

TEST_CASE("crosstalk ignores output signs and order") {
  Rng rng(4);
  const MatrixXd G = MatrixXd::Identity(4, 4) + 0.2 * rng.normal_matrix(4, 4);
  const double base = crosstalk(G).mean_percent;
  MatrixXd flipped = G;
  flipped.row(1) *= -1;
  flipped.row(3) *= -1;
  CHECK(crosstalk(flipped).mean_percent == doctest::Approx(base).epsilon(1e-14));
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  CHECK(crosstalk(MatrixXd(perm * G)).mean_percent == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("Amari index") {
  CHECK(amari_index(MatrixXd::Identity(3, 3)) == 0.0);
  MatrixXd G(2, 2);
  G << 1, 1, 1, 1;
  CHECK(amari_index(G) == doctest::Approx(1.0));
}

TEST_CASE("separating already independent sources") {
  const MatrixXd S = factorial_data({{-1.5, -0.5, 0.5, 1.5}, {-1.0, 1.0}, {-3.0, 0.0, 3.0}});
  const auto res = run_ica(S, make_neg_kurtosis_squared(), OptimizerConfig{},
                           MatrixXd(MatrixXd::Identity(3, 3)));
  REQUIRE(res.crosstalk.has_value());
  CHECK(res.crosstalk->mean_percent < 1e-10);
  CHECK(res.run.iterations() <= 2);
}

TEST_CASE("separating a seeded mixture") {
  const auto mix = make_mixing(3, 7);
  const MatrixXd X = mix.A * synthetic_sources(kMixedKinds, 10000, 7);
  const auto res = run_ica(X, make_neg_kurtosis_squared(), OptimizerConfig{}, mix.A);
  REQUIRE(res.crosstalk.has_value());
  CHECK(res.crosstalk->mean_percent < 5.0);
  CHECK(res.crosstalk->permutation_is_bijection);
  CHECK(max_abs(res.outputs - res.run.C_final * res.whitening.apply(X)) <= 1e-9);
}

TEST_CASE("Gaussian sources terminate without error") {
  const std::vector<SourceKind> kinds(3, SourceKind::gaussian);
  const auto mix = make_mixing(3, 5);
  const MatrixXd X = mix.A * synthetic_sources(kinds, 5000, 5);
  IcaResult res;
  CHECK_NOTHROW(res = run_ica(X, make_neg_kurtosis_squared(), OptimizerConfig{}, mix.A));
  CHECK(std::isfinite(res.run.trace.back().F));
  CHECK(res.run.termination != Termination::solver_failure);
}
