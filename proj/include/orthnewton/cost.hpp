#pragma once

// Cost functions of the form F(Y) = sum_i E f_i(Y_i) and the moment
// statistics the Newton system is built from:
//
//   R_ki  = E( f_i'(Y_i)  Y_k )
//   U_ikl = E( f_i''(Y_i) Y_k Y_l )
//
// E is the uniform mean over the columns (samples) of Y.

#include "orthnewton/core.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace orthnewton {

/// Scalar function with its first two derivatives.
template <typename Scalar = double>
struct PointwiseFunction {
  std::function<Scalar(Scalar)> f;
  std::function<Scalar(Scalar)> df;
  std::function<Scalar(Scalar)> d2f;
};

/// F(Y) = sum_i E f_i(Y_i). A single entry in `channels` is shared by all
/// channels.
template <typename Scalar = double>
struct SeparableCost {
  std::string name;
  std::vector<PointwiseFunction<Scalar>> channels;
};

/// F(Y) = sum_i g(u_i), u_i = E f(Y_i). Statistics follow from the
/// second-order chain rule:
///
///   R_ki  = g'(u_i) R^f_ki
///   U_ikl = g'(u_i) U^f_ikl + g''(u_i) R^f_ki R^f_li
template <typename Scalar = double>
struct CompositeCost {
  std::string name;
  PointwiseFunction<Scalar> inner;
  PointwiseFunction<Scalar> outer;
};

template <typename Scalar = double>
using Cost = std::variant<SeparableCost<Scalar>, CompositeCost<Scalar>>;

template <typename Scalar = double>
struct CostEvaluation {
  Scalar F = 0;
  Matrix<Scalar> R;
  std::vector<Matrix<Scalar>> U;

  Eigen::Index n() const { return R.rows(); }
};

/// Mean square below this marks a channel as degenerate.
inline constexpr double kDegenerateVariance = 1e-12;

template <typename Derived>
void validate_samples(const Eigen::MatrixBase<Derived> &Y) {
  if (Y.rows() < 1)
    throw InvalidArgument("sample matrix has no channels");
  if (Y.cols() < 2)
    throw InvalidArgument("sample matrix needs at least 2 samples");
  if (!Y.allFinite())
    throw NumericalError("sample matrix has non-finite entries");
}

template <typename Scalar>
std::string cost_name(const Cost<Scalar> &cost) {
  return std::visit([](const auto &c) { return c.name; }, cost);
}

namespace detail {

template <typename Scalar>
const PointwiseFunction<Scalar> &channel_function(const SeparableCost<Scalar> &cost,
                                                  Eigen::Index i, Eigen::Index n) {
  if (cost.channels.size() == 1)
    return cost.channels.front();
  if (static_cast<Eigen::Index>(cost.channels.size()) != n)
    throw InvalidArgument("separable cost: " + std::to_string(cost.channels.size()) +
                          " channel functions for " + std::to_string(n) + " channels");
  return cost.channels[static_cast<std::size_t>(i)];
}

template <typename Scalar>
void check_channels(const Matrix<Scalar> &Y) {
  const Scalar t = static_cast<Scalar>(Y.cols());
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    if (Y.row(i).squaredNorm() / t < Scalar(kDegenerateVariance))
      throw DegenerateChannel("degenerate channel " + std::to_string(i));
}

template <typename Scalar>
Scalar channel_mean(const std::function<Scalar(Scalar)> &f, const Matrix<Scalar> &Y,
                    Eigen::Index i) {
  Scalar sum = 0;
  for (Eigen::Index s = 0; s < Y.cols(); ++s)
    sum += f(Y(i, s));
  return sum / static_cast<Scalar>(Y.cols());
}

/// Per-channel means and (R, U) moments for per-channel functions `fn(i)`.
template <typename Scalar, typename ChannelFn>
CostEvaluation<Scalar> separable_statistics(const Matrix<Scalar> &Y, ChannelFn fn,
                                            Vector<Scalar> &means) {
  const Eigen::Index n = Y.rows();
  const Eigen::Index t = Y.cols();
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(t);

  Matrix<Scalar> d1(n, t);
  Matrix<Scalar> d2(n, t);
  means.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PointwiseFunction<Scalar> &pf = fn(i);
    Scalar sum = 0;
    for (Eigen::Index s = 0; s < t; ++s) {
      const Scalar y = Y(i, s);
      sum += pf.f(y);
      d1(i, s) = pf.df(y);
      d2(i, s) = pf.d2f(y);
    }
    means(i) = sum / static_cast<Scalar>(t);
  }

  CostEvaluation<Scalar> ev;
  ev.R = (Y * d1.transpose()) * inv_t;
  ev.U.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix<Scalar> weighted = Y.array().rowwise() * d2.row(i).array();
    const Matrix<Scalar> m = (weighted * Y.transpose()) * inv_t;
    // (m + m')/2 is bit-exactly symmetric.
    ev.U.push_back((m + m.transpose()) / Scalar(2));
  }
  return ev;
}

template <typename Scalar>
void check_finite(const CostEvaluation<Scalar> &ev) {
  bool ok = std::isfinite(ev.F) && ev.R.allFinite();
  for (const auto &u : ev.U)
    ok = ok && u.allFinite();
  if (!ok)
    throw NumericalError("non-finite cost statistic (moment overflow)");
}

} // namespace detail

/// F together with R and U at the samples Y (rows = channels).
template <typename Scalar>
CostEvaluation<Scalar> evaluate(const Cost<Scalar> &cost, const Matrix<Scalar> &Y) {
  validate_samples(Y);
  detail::check_channels(Y);
  const Eigen::Index n = Y.rows();

  CostEvaluation<Scalar> ev = std::visit(
      [&](const auto &c) -> CostEvaluation<Scalar> {
        using C = std::decay_t<decltype(c)>;
        Vector<Scalar> means;
        if constexpr (std::is_same_v<C, SeparableCost<Scalar>>) {
          auto out = detail::separable_statistics<Scalar>(
              Y, [&](Eigen::Index i) -> const auto & { return detail::channel_function(c, i, n); },
              means);
          out.F = 0;
          for (Eigen::Index i = 0; i < n; ++i)
            out.F += means(i);
          return out;
        } else {
          auto out = detail::separable_statistics<Scalar>(
              Y, [&](Eigen::Index) -> const auto & { return c.inner; }, means);
          Scalar F = 0;
          for (Eigen::Index i = 0; i < n; ++i) {
            const Scalar u = means(i);
            const Scalar g1 = c.outer.df(u);
            const Scalar g2 = c.outer.d2f(u);
            F += c.outer.f(u);
            const Vector<Scalar> rf = out.R.col(i);
            out.U[i] = g1 * out.U[i] + g2 * (rf * rf.transpose());
            out.R.col(i) = g1 * rf;
          }
          out.F = F;
          return out;
        }
      },
      cost);
  detail::check_finite(ev);
  return ev;
}

/// F alone. Bit-identical to evaluate(cost, Y).F.
template <typename Scalar>
Scalar cost_value(const Cost<Scalar> &cost, const Matrix<Scalar> &Y) {
  validate_samples(Y);
  detail::check_channels(Y);
  const Eigen::Index n = Y.rows();
  const Scalar F = std::visit(
      [&](const auto &c) -> Scalar {
        using C = std::decay_t<decltype(c)>;
        Scalar sum = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if constexpr (std::is_same_v<C, SeparableCost<Scalar>>)
            sum += detail::channel_mean(detail::channel_function(c, i, n).f, Y, i);
          else
            sum += c.outer.f(detail::channel_mean(c.inner.f, Y, i));
        }
        return sum;
      },
      cost);
  if (!std::isfinite(F))
    throw NumericalError("non-finite cost value");
  return F;
}

/// Excess kurtosis E(A^4)/E(A^2)^2 - 3 with sample moments (no centering).
template <typename Derived>
typename Derived::Scalar kurtosis(const Eigen::DenseBase<Derived> &samples) {
  using Scalar = typename Derived::Scalar;
  if (samples.size() < 1)
    throw InvalidArgument("kurtosis: empty sample");
  Scalar m2 = 0;
  Scalar m4 = 0;
  for (Eigen::Index s = 0; s < samples.size(); ++s) {
    const Scalar a2 = samples(s) * samples(s);
    m2 += a2;
    m4 += a2 * a2;
  }
  const Scalar t = static_cast<Scalar>(samples.size());
  m2 /= t;
  m4 /= t;
  if (!(m2 > Scalar(kDegenerateVariance)))
    throw DegenerateChannel("degenerate channel");
  return m4 / (m2 * m2) - Scalar(3);
}

/// f(y) = -(y^4 - 3); E f = -kappa for unit-variance channels.
template <typename Scalar = double>
Cost<Scalar> make_neg_kurtosis() {
  PointwiseFunction<Scalar> f{
      [](Scalar y) { return -(y * y * y * y - Scalar(3)); },
      [](Scalar y) { return Scalar(-4) * y * y * y; },
      [](Scalar y) { return Scalar(-12) * y * y; },
  };
  return SeparableCost<Scalar>{"kurtosis", {f}};
}

/// inner f(y) = y^4 - 3, outer g(u) = -u^2; F_i = -kappa_i^2 for unit-variance
/// channels, so the minimum seeks large |kappa| regardless of sign.
template <typename Scalar = double>
Cost<Scalar> make_neg_kurtosis_squared() {
  PointwiseFunction<Scalar> inner{
      [](Scalar y) { return y * y * y * y - Scalar(3); },
      [](Scalar y) { return Scalar(4) * y * y * y; },
      [](Scalar y) { return Scalar(12) * y * y; },
  };
  PointwiseFunction<Scalar> outer{
      [](Scalar u) { return -u * u; },
      [](Scalar u) { return Scalar(-2) * u; },
      [](Scalar) { return Scalar(-2); },
  };
  return CompositeCost<Scalar>{"kurtosis2", inner, outer};
}

} // namespace orthnewton
