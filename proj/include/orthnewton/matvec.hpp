#pragma once

// Column-string vectorization, the commutation/rotation/projection operators
// acting on column strings, and the exponential map from skew matrices to
// SO(n).
//
// Indexing is 0-based throughout: entry (r, c) of an n x n matrix lives at
// column-string slot r + n*c.

#include "orthnewton/core.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace orthnewton {

/// Column-major flattening: result[r + n*c] = A(r, c).
template <typename Derived>
Vector<typename Derived::Scalar> cs(const Eigen::MatrixBase<Derived> &A) {
  using Scalar = typename Derived::Scalar;
  if (A.rows() != A.cols())
    throw InvalidArgument("cs: matrix must be square");
  const Matrix<Scalar> tmp = A;
  return Eigen::Map<const Vector<Scalar>>(tmp.data(), tmp.size());
}

/// Side length of a square matrix flattened into `len` entries; throws if
/// `len` is not a perfect square.
inline Eigen::Index column_string_dim(Eigen::Index len) {
  auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(len))));
  while (n * n > len)
    --n;
  while ((n + 1) * (n + 1) <= len)
    ++n;
  if (n * n != len)
    throw InvalidArgument("cs_inv: length " + std::to_string(len) +
                          " is not a perfect square");
  return n;
}

template <typename Derived>
Matrix<typename Derived::Scalar> cs_inv(const Eigen::MatrixBase<Derived> &v) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = column_string_dim(v.size());
  const Vector<Scalar> tmp = v;
  return Eigen::Map<const Matrix<Scalar>>(tmp.data(), n, n);
}

/// An n^2 x n^2 operator on column strings.
template <typename Scalar>
struct OperatorN2 {
  Eigen::Index n = 0;
  SparseOperator<Scalar> op;
  bool is_permutation = false;
  bool is_projection = false;

  Matrix<Scalar> dense() const { return Matrix<Scalar>(op); }
};

namespace detail {

template <typename Scalar>
SparseOperator<Scalar> from_triplets(Eigen::Index dim,
                                     const std::vector<Eigen::Triplet<Scalar>> &t) {
  SparseOperator<Scalar> m(dim, dim);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

template <typename Scalar, typename Pred>
OperatorN2<Scalar> diagonal_selector(Eigen::Index n, Pred keep) {
  std::vector<Eigen::Triplet<Scalar>> t;
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r)
      if (keep(r, c))
        t.emplace_back(r + n * c, r + n * c, Scalar(1));
  return {n, from_triplets<Scalar>(n * n, t), false, true};
}

} // namespace detail

/// Commutation matrix: T cs(A) = cs(A').
template <typename Scalar = double>
OperatorN2<Scalar> build_T(Eigen::Index n) {
  if (n < 1)
    throw InvalidArgument("build_T: n must be >= 1");
  std::vector<Eigen::Triplet<Scalar>> t;
  t.reserve(n * n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r)
      t.emplace_back(r + n * c, c + n * r, Scalar(1));
  return {n, detail::from_triplets<Scalar>(n * n, t), true, false};
}

/// Selects the diagonal slots i + n*i.
template <typename Scalar = double>
OperatorN2<Scalar> build_PD(Eigen::Index n) {
  if (n < 1)
    throw InvalidArgument("build_PD: n must be >= 1");
  return detail::diagonal_selector<Scalar>(
      n, [](Eigen::Index r, Eigen::Index c) { return r == c; });
}

/// Selects the slots r + n*c with c <= r (lower triangle and diagonal). After
/// rotation by H + P_D these hold the symmetric combinations.
template <typename Scalar = double>
OperatorN2<Scalar> build_PS(Eigen::Index n) {
  if (n < 1)
    throw InvalidArgument("build_PS: n must be >= 1");
  return detail::diagonal_selector<Scalar>(
      n, [](Eigen::Index r, Eigen::Index c) { return c <= r; });
}

/// I - P_S: the strict upper triangle, home of the antisymmetric combinations.
template <typename Scalar = double>
OperatorN2<Scalar> build_PA(Eigen::Index n) {
  if (n < 1)
    throw InvalidArgument("build_PA: n must be >= 1");
  return detail::diagonal_selector<Scalar>(
      n, [](Eigen::Index r, Eigen::Index c) { return c > r; });
}

/// Sum of pi/4 rotations, one per pair i > j, mixing slot p = j + n*i (upper)
/// and q = i + n*j (lower):
///
///   row p: ( 1/sqrt2 at p, -1/sqrt2 at q)
///   row q: ( 1/sqrt2 at p,  1/sqrt2 at q)
///
/// Diagonal rows and columns are zero; H + P_D is orthogonal.
template <typename Scalar = double>
OperatorN2<Scalar> build_H(Eigen::Index n) {
  if (n < 2)
    throw InvalidArgument("build_H: n must be >= 2");
  const Scalar s = Scalar(1) / std::sqrt(Scalar(2));
  std::vector<Eigen::Triplet<Scalar>> t;
  t.reserve(2 * n * (n - 1));
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const Eigen::Index p = j + n * i;
      const Eigen::Index q = i + n * j;
      t.emplace_back(p, p, s);
      t.emplace_back(p, q, -s);
      t.emplace_back(q, p, s);
      t.emplace_back(q, q, s);
    }
  }
  return {n, detail::from_triplets<Scalar>(n * n, t), false, false};
}

/// Coordinates of one antisymmetric slot. The slot sits at column-string index
/// `row + n*col` with row < col; its reduced coordinate for a skew matrix
/// Delta is (Delta(row,col) - Delta(col,row)) / sqrt2 = sqrt2 * Delta(row,col).
struct AntisymmetricSlot {
  Eigen::Index row;
  Eigen::Index col;
  Eigen::Index index;
};

/// Antisymmetric slots in increasing column-string order. This is the order
/// of every reduced (n(n-1)/2)-vector in the library.
inline std::vector<AntisymmetricSlot> antisymmetric_slots(Eigen::Index n) {
  std::vector<AntisymmetricSlot> slots;
  slots.reserve(n * (n - 1) / 2);
  for (Eigen::Index c = 1; c < n; ++c)
    for (Eigen::Index r = 0; r < c; ++r)
      slots.push_back({r, c, r + n * c});
  return slots;
}

inline Eigen::Index antisymmetric_dim(Eigen::Index n) { return n * (n - 1) / 2; }
inline Eigen::Index symmetric_dim(Eigen::Index n) { return n * (n + 1) / 2; }

/// Skew-symmetric n x n matrix, the step in exponential coordinates.
/// Delta' = -Delta holds bit-exactly.
template <typename Scalar = double>
class SkewCoordinates {
public:
  SkewCoordinates() = default;

  static SkewCoordinates zero(Eigen::Index n) {
    SkewCoordinates s;
    s.m_ = Matrix<Scalar>::Zero(n, n);
    return s;
  }

  /// Accepts only matrices that are exactly antisymmetric.
  template <typename Derived>
  static SkewCoordinates from_matrix(const Eigen::MatrixBase<Derived> &D) {
    if (D.rows() != D.cols())
      throw InvalidArgument("SkewCoordinates: matrix must be square");
    if (!D.allFinite())
      throw NumericalError("SkewCoordinates: non-finite entries");
    if (D != -D.transpose())
      throw InvalidArgument("SkewCoordinates: matrix is not skew-symmetric");
    SkewCoordinates s;
    s.m_ = D;
    return s;
  }

  /// (A - A') / 2.
  template <typename Derived>
  static SkewCoordinates skew_part(const Eigen::MatrixBase<Derived> &A) {
    if (A.rows() != A.cols())
      throw InvalidArgument("SkewCoordinates: matrix must be square");
    const Matrix<Scalar> a = A;
    SkewCoordinates s;
    s.m_ = Matrix<Scalar>::Zero(a.rows(), a.cols());
    for (Eigen::Index c = 1; c < a.cols(); ++c)
      for (Eigen::Index r = 0; r < c; ++r) {
        const Scalar v = (a(r, c) - a(c, r)) / Scalar(2);
        s.m_(r, c) = v;
        s.m_(c, r) = -v;
      }
    return s;
  }

  /// Built from the strict lower triangle of L; the upper part is ignored.
  template <typename Derived>
  static SkewCoordinates from_lower(const Eigen::MatrixBase<Derived> &L) {
    if (L.rows() != L.cols())
      throw InvalidArgument("SkewCoordinates: matrix must be square");
    SkewCoordinates s;
    s.m_ = Matrix<Scalar>::Zero(L.rows(), L.cols());
    for (Eigen::Index c = 0; c < L.cols(); ++c)
      for (Eigen::Index r = c + 1; r < L.rows(); ++r) {
        s.m_(r, c) = L(r, c);
        s.m_(c, r) = -L(r, c);
      }
    return s;
  }

  /// Inverse of reduced(): x_a = sqrt2 * Delta(row_a, col_a).
  template <typename Derived>
  static SkewCoordinates from_reduced(Eigen::Index n, const Eigen::MatrixBase<Derived> &x) {
    if (x.size() != antisymmetric_dim(n))
      throw InvalidArgument("SkewCoordinates: reduced vector has wrong length");
    const Scalar s = Scalar(1) / std::sqrt(Scalar(2));
    SkewCoordinates out = zero(n);
    Eigen::Index a = 0;
    for (const auto &slot : antisymmetric_slots(n)) {
      const Scalar v = x(a++) * s;
      out.m_(slot.row, slot.col) = v;
      out.m_(slot.col, slot.row) = -v;
    }
    return out;
  }

  Vector<Scalar> reduced() const {
    const Eigen::Index n = m_.rows();
    Vector<Scalar> x(antisymmetric_dim(n));
    const Scalar s = std::sqrt(Scalar(2));
    Eigen::Index a = 0;
    for (const auto &slot : antisymmetric_slots(n))
      x(a++) = s * m_(slot.row, slot.col);
    return x;
  }

  const Matrix<Scalar> &matrix() const noexcept { return m_; }
  Eigen::Index n() const noexcept { return m_.rows(); }
  Scalar norm() const { return m_.norm(); }

  SkewCoordinates operator-() const {
    SkewCoordinates s;
    s.m_ = -m_;
    return s;
  }

  friend SkewCoordinates operator*(Scalar a, const SkewCoordinates &d) {
    SkewCoordinates s;
    s.m_ = a * d.m_;
    return s;
  }

private:
  Matrix<Scalar> m_;
};

/// ||C'C - I||_F.
template <typename Derived>
typename Derived::Scalar orthogonality_drift(const Eigen::MatrixBase<Derived> &C) {
  using Scalar = typename Derived::Scalar;
  return (C.transpose() * C - Matrix<Scalar>::Identity(C.cols(), C.cols())).norm();
}

/// exp(Delta) in SO(n), via Pade scaling-and-squaring.
template <typename Scalar>
Matrix<Scalar> expm_skew(const SkewCoordinates<Scalar> &delta) {
  const auto &D = delta.matrix();
  if (!D.allFinite())
    throw NumericalError("expm_skew: non-finite entries");
  if (D.size() == 0)
    return D;
  return D.exp();
}

/// Nearest orthogonal matrix (polar factor U V' of the SVD).
template <typename Derived>
Matrix<typename Derived::Scalar> reorthogonalize(const Eigen::MatrixBase<Derived> &C) {
  using Scalar = typename Derived::Scalar;
  if (C.rows() != C.cols())
    throw InvalidArgument("reorthogonalize: matrix must be square");
  if (!C.allFinite())
    throw NumericalError("reorthogonalize: non-finite entries");
  Eigen::JacobiSVD<Matrix<Scalar>> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto &sv = svd.singularValues();
  if (sv.size() == 0)
    return C;
  const Scalar tiny = std::numeric_limits<Scalar>::epsilon() * C.rows() * sv(0);
  if (sv(sv.size() - 1) <= tiny)
    throw RankDeficient("reorthogonalize: rank-deficient input");
  return svd.matrixU() * svd.matrixV().transpose();
}

} // namespace orthnewton
