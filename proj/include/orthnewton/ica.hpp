#pragma once

// ICA plumbing around the orthogonal-group optimizer: prewhitening, seeded
// synthetic mixtures, and separation scoring through the global transfer
// matrix G = C * whitening * A.

#include "orthnewton/cost.hpp"
#include "orthnewton/optimizer.hpp"
#include "orthnewton/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace orthnewton {

struct WhiteningTransform {
  VectorXd mean;
  /// Maps centered raw data to unit sample covariance.
  MatrixXd matrix;

  MatrixXd apply(const MatrixXd &X_raw) const {
    return matrix * (X_raw.colwise() - mean);
  }
};

/// Uniform-weight sample covariance of already-centered data.
inline MatrixXd sample_covariance(const MatrixXd &Xc) {
  return (Xc * Xc.transpose()) / static_cast<double>(Xc.cols());
}

/// Mean-centers and multiplies by the symmetric inverse square root of the
/// sample covariance.
inline std::pair<MatrixXd, WhiteningTransform> prewhiten(const MatrixXd &X_raw) {
  validate_samples(X_raw);
  WhiteningTransform w;
  w.mean = X_raw.rowwise().mean();
  const MatrixXd Xc = X_raw.colwise() - w.mean;
  const MatrixXd cov = sample_covariance(Xc);

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericalError("prewhiten: eigendecomposition failed");
  const VectorXd &ev = eig.eigenvalues();
  const double max_ev = ev.maxCoeff();
  if (!(max_ev > 0) || !(ev.minCoeff() > 1e-12 * max_ev))
    throw RankDeficient("rank-deficient data");
  const MatrixXd &V = eig.eigenvectors();
  w.matrix = V * ev.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  return {w.matrix * Xc, std::move(w)};
}

struct MixingSpec {
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  MatrixXd A;
};

inline constexpr std::uint64_t kStreamMixing = 1;
inline constexpr std::uint64_t kStreamSources = 2;
inline constexpr std::uint64_t kStreamInit = 3;

/// A = I + S with S_ij uniform on (-1/2, 1/2). A is not guaranteed to be
/// diagonally dominant.
inline MixingSpec make_mixing(Eigen::Index n, std::uint64_t seed) {
  if (n < 2)
    throw InvalidArgument("make_mixing: n must be >= 2");
  Rng rng(derive_seed(seed, kStreamMixing));
  MixingSpec m{n, seed, MatrixXd::Identity(n, n)};
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r)
      m.A(r, c) += rng.uniform_open(-0.5, 0.5);
  return m;
}

enum class SourceKind { uniform, laplace, two_point, gaussian };

inline SourceKind parse_source_kind(const std::string &s) {
  if (s == "uniform")
    return SourceKind::uniform;
  if (s == "laplace")
    return SourceKind::laplace;
  if (s == "twopoint" || s == "two_point" || s == "two-point")
    return SourceKind::two_point;
  if (s == "gaussian" || s == "normal")
    return SourceKind::gaussian;
  throw InvalidArgument("unknown source kind '" + s + "'");
}

inline std::string to_string(SourceKind k) {
  switch (k) {
  case SourceKind::uniform:
    return "uniform";
  case SourceKind::laplace:
    return "laplace";
  case SourceKind::two_point:
    return "twopoint";
  case SourceKind::gaussian:
    return "gaussian";
  }
  return "unknown";
}

/// Zero-mean, unit-variance independent sources, one row per kind.
inline MatrixXd synthetic_sources(const std::vector<SourceKind> &kinds, Eigen::Index samples,
                                  std::uint64_t seed) {
  if (kinds.empty())
    throw InvalidArgument("synthetic_sources: no source kinds");
  if (samples < 2)
    throw InvalidArgument("synthetic_sources: need at least 2 samples");
  Rng rng(derive_seed(seed, kStreamSources));
  MatrixXd S(static_cast<Eigen::Index>(kinds.size()), samples);
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    for (Eigen::Index s = 0; s < samples; ++s) {
      switch (kinds[static_cast<std::size_t>(i)]) {
      case SourceKind::uniform:
        S(i, s) = rng.uniform_unit_variance();
        break;
      case SourceKind::laplace:
        S(i, s) = rng.laplace();
        break;
      case SourceKind::two_point:
        S(i, s) = rng.two_point();
        break;
      case SourceKind::gaussian:
        S(i, s) = rng.normal();
        break;
      }
    }
  }
  return S;
}

/// G = C_final * whitening * A.
inline MatrixXd global_transfer(const MatrixXd &C_final, const WhiteningTransform &whitening,
                                const MatrixXd &A) {
  if (C_final.cols() != whitening.matrix.rows() || whitening.matrix.cols() != A.rows())
    throw InvalidArgument("global_transfer: dimension mismatch");
  return C_final * whitening.matrix * A;
}

struct CrosstalkReport {
  MatrixXd G;
  VectorXd per_channel;
  double mean_percent = 0;
  /// permutation[i] = source index dominating output i.
  std::vector<Eigen::Index> permutation;
  bool permutation_is_bijection = true;
};

/// Per output row i: sum of |G_ij| off the dominant column over the dominant
/// |G_ij*|. Ties go to the smallest column index.
inline CrosstalkReport crosstalk(const MatrixXd &G) {
  if (G.rows() != G.cols() || G.rows() < 1)
    throw InvalidArgument("crosstalk: G must be square and nonempty");
  const Eigen::Index n = G.rows();
  CrosstalkReport rep;
  rep.G = G;
  rep.per_channel.resize(n);
  rep.permutation.resize(static_cast<std::size_t>(n));
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < n; ++j)
      if (std::abs(G(i, j)) > std::abs(G(i, best)))
        best = j;
    const double peak = std::abs(G(i, best));
    if (!(peak > 0))
      throw InvalidArgument("crosstalk: zero row " + std::to_string(i));
    double leak = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != best)
        leak += std::abs(G(i, j));
    rep.per_channel(i) = leak / peak;
    rep.permutation[static_cast<std::size_t>(i)] = best;
    if (used[static_cast<std::size_t>(best)])
      rep.permutation_is_bijection = false;
    used[static_cast<std::size_t>(best)] = true;
  }
  rep.mean_percent = 100.0 * rep.per_channel.mean();
  return rep;
}

/// Amari performance index in [0, 1]; 0 for a scaled permutation.
inline double amari_index(const MatrixXd &G) {
  const Eigen::Index n = G.rows();
  if (n < 2 || G.cols() != n)
    throw InvalidArgument("amari_index: G must be square with n >= 2");
  const MatrixXd P = G.cwiseAbs();
  double sum = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    sum += P.row(i).sum() / P.row(i).maxCoeff() - 1.0;
  for (Eigen::Index j = 0; j < n; ++j)
    sum += P.col(j).sum() / P.col(j).maxCoeff() - 1.0;
  return sum / (2.0 * n * (n - 1));
}

struct IcaResult {
  WhiteningTransform whitening;
  RunResult<double> run;
  std::optional<CrosstalkReport> crosstalk;
  /// Unmixed signals C_final * whitening(X_raw).
  MatrixXd outputs;
};

/// prewhiten -> optimize over O(n) starting from C0 (identity if empty) ->
/// score against A when given.
inline IcaResult run_ica(const MatrixXd &X_raw, const Cost<double> &cost,
                         const OptimizerConfig &config, const std::optional<MatrixXd> &A = {},
                         const std::optional<MatrixXd> &C0 = {},
                         const IterationObserver<double> &observer = {}) {
  auto [X, w] = prewhiten(X_raw);
  const Eigen::Index n = X.rows();
  const MatrixXd start = C0 ? *C0 : MatrixXd::Identity(n, n);
  IcaResult out{std::move(w), run(cost, X, start, config, observer), std::nullopt, MatrixXd()};
  out.outputs = out.run.Y_final;
  if (A)
    out.crosstalk = crosstalk(global_transfer(out.run.C_final, out.whitening, *A));
  return out;
}

} // namespace orthnewton
