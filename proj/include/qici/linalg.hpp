#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace qici {

template <int Rows, int Cols = Rows>
using Mat = Eigen::Matrix<double, Rows, Cols>;
template <int Rows>
using Vec = Eigen::Matrix<double, Rows, 1>;

using Vec2 = Vec<2>;
using Vec3 = Vec<3>;
using Vec4 = Vec<4>;
using Vec9 = Vec<9>;
using Mat2 = Mat<2>;
using Mat3 = Mat<3>;
using Mat6 = Mat<6>;
using Mat9 = Mat<9>;

/// Raised when a matrix expected to be symmetric positive definite cannot be
/// Cholesky-factorized.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a fusion rule produces an information matrix that is not SPD.
class FusionDegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  Plain out = 0.5 * (m + m.transpose());
  return out;
}

/// Largest absolute entry of (m - m^T).
template <typename Derived>
double asymmetry(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// True when the symmetric part of `m` admits a Cholesky factorization with
/// strictly positive pivots.
template <typename Derived>
bool is_spd(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  if (!m.allFinite()) return false;
  const Plain s = symmetrized(m);
  Eigen::LLT<Plain> llt(s);
  if (llt.info() != Eigen::Success) return false;
  return (llt.matrixLLT().diagonal().array() > 0.0).all();
}

/// Inverse of an SPD matrix through its Cholesky factor; the result is
/// re-symmetrized. Throws FactorizationError when `m` is not SPD.
template <typename Derived>
auto spd_inverse(const Eigen::MatrixBase<Derived>& m, const char* what = "matrix") {
  using Plain = typename Derived::PlainObject;
  if (!m.allFinite()) {
    throw FactorizationError(std::string(what) + " has non-finite entries");
  }
  const Plain s = symmetrized(m);
  Eigen::LLT<Plain> llt(s);
  if (llt.info() != Eigen::Success ||
      !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    throw FactorizationError(std::string(what) + " is not positive definite");
  }
  Plain inv = llt.solve(Plain::Identity(s.rows(), s.cols()));
  return Plain(symmetrized(inv));
}

}  // namespace qici
