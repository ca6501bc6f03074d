#pragma once

// JPL-convention quaternion algebra.
//
// Storage is [q1 q2 q3 q4] with the scalar last. The rotation matrix of
// q = ^L_G q maps global-frame coordinates into the local frame, and
// composition follows rot_matrix(a (x) b) = rot_matrix(a) * rot_matrix(b).
// Quaternions are kept unit-norm with q4 >= 0.

#include "qici/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace qici {

inline constexpr double kUnitInputTolerance = 1e-6;

class Quaternion {
 public:
  Quaternion() : c_(0.0, 0.0, 0.0, 1.0) {}

  static Quaternion identity() { return Quaternion(); }

  /// Normalizes and canonicalizes (q4 >= 0). Rejects non-finite or zero input.
  static Quaternion from_coeffs(const Vec4& coeffs) {
    if (!coeffs.allFinite()) {
      throw std::invalid_argument("quaternion has non-finite components");
    }
    const double n = coeffs.norm();
    if (!(n > 0.0)) throw std::invalid_argument("quaternion has zero norm");
    return Quaternion(coeffs / n, Raw{});
  }

  /// Like from_coeffs, but additionally requires |coeffs| = 1 within 1e-6.
  static Quaternion from_unit_coeffs(const Vec4& coeffs) {
    if (!coeffs.allFinite()) {
      throw std::invalid_argument("quaternion has non-finite components");
    }
    if (std::abs(coeffs.norm() - 1.0) > kUnitInputTolerance) {
      throw std::invalid_argument("quaternion is not unit norm");
    }
    return from_coeffs(coeffs);
  }

  static Quaternion from_coeffs(double q1, double q2, double q3, double q4) {
    return from_coeffs(Vec4(q1, q2, q3, q4));
  }

  /// Rotation by `angle` radians about `axis` (need not be normalized).
  static Quaternion from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (!(n > 0.0) || !std::isfinite(angle)) {
      throw std::invalid_argument("axis-angle needs a non-zero finite axis");
    }
    Vec4 c;
    c.head<3>() = std::sin(0.5 * angle) * axis / n;
    c[3] = std::cos(0.5 * angle);
    return from_coeffs(c);
  }

  /// Exact exponential map of a rotation vector (axis * angle).
  static Quaternion from_rotation_vector(const Vec3& rv) {
    const double angle = rv.norm();
    Vec4 c;
    if (angle < 1e-12) {
      c.head<3>() = 0.5 * rv;
      c[3] = 1.0;
    } else {
      c.head<3>() = std::sin(0.5 * angle) * rv / angle;
      c[3] = std::cos(0.5 * angle);
    }
    return from_coeffs(c);
  }

  const Vec4& coeffs() const { return c_; }
  Vec3 vec() const { return c_.head<3>(); }
  double w() const { return c_[3]; }
  double operator[](int i) const { return c_[i]; }

  bool operator==(const Quaternion& o) const { return c_ == o.c_; }

 private:
  struct Raw {};
  Quaternion(const Vec4& c, Raw) : c_(c[3] < 0.0 ? Vec4(-c) : c) {}

  Vec4 c_;
};

/// Skew-symmetric cross-product matrix: skew(v) * w == v.cross(w).
inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

/// JPL left-multiplication matrix: a (x) b == left_matrix(a) * b.
inline Mat<4> left_matrix(const Vec4& a) {
  Mat<4> l;
  l.topLeftCorner<3, 3>() = a[3] * Mat3::Identity() - skew(a.head<3>());
  l.topRightCorner<3, 1>() = a.head<3>();
  l.bottomLeftCorner<1, 3>() = -a.head<3>().transpose();
  l(3, 3) = a[3];
  return l;
}

/// Raw JPL product of two 4-vectors, without normalization or sign fixing.
inline Vec4 quat_product(const Vec4& a, const Vec4& b) { return left_matrix(a) * b; }

inline Quaternion multiply(const Quaternion& a, const Quaternion& b) {
  return Quaternion::from_coeffs(quat_product(a.coeffs(), b.coeffs()));
}

inline Quaternion operator*(const Quaternion& a, const Quaternion& b) { return multiply(a, b); }

/// Conjugate of a unit quaternion.
inline Quaternion inverse(const Quaternion& q) {
  Vec4 c = q.coeffs();
  c.head<3>() = -c.head<3>();
  return Quaternion::from_coeffs(c);
}

inline Mat3 rot_matrix(const Quaternion& q) {
  const Vec3 qv = q.vec();
  const double q4 = q.w();
  return (2.0 * q4 * q4 - 1.0) * Mat3::Identity() - 2.0 * q4 * skew(qv) +
         2.0 * qv * qv.transpose();
}

/// Inverse of rot_matrix (Shepperd's method on the transposed matrix).
inline Quaternion from_rot_matrix(const Mat3& r) {
  // rot_matrix(q) is the transpose of the scalar-last Hamilton matrix with the
  // same coefficients, so extract from m = r^T.
  const Mat3 m = r.transpose();
  const double tr = m.trace();
  Vec4 c;
  if (tr > 0.0) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    c << (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s, 0.25 * s;
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
    c << 0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s, (m(2, 1) - m(1, 2)) / s;
  } else if (m(1, 1) > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
    c << (m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s, (m(0, 2) - m(2, 0)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
    c << (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s, (m(1, 0) - m(0, 1)) / s;
  }
  return Quaternion::from_coeffs(c);
}

/// 4x3 operator with top block q4*I - skew(q_v) and bottom row -q_v^T.
inline Mat<4, 3> xi(const Quaternion& q) {
  Mat<4, 3> x;
  x.topRows<3>() = q.w() * Mat3::Identity() - skew(q.vec());
  x.bottomRows<1>() = -q.vec().transpose();
  return x;
}

/// Rotation-vector error dtheta with q_true ~= q_est (x) [dtheta/2; 1].
///
/// Evaluated exactly as 2 * xi(q_est)^T * q_true, after flipping q_true onto
/// the hemisphere of q_est so the shorter rotation is reported.
inline Vec3 error_angle(const Quaternion& q_est, const Quaternion& q_true) {
  Vec4 t = q_true.coeffs();
  if (q_est.coeffs().dot(t) < 0.0) t = -t;
  return 2.0 * xi(q_est).transpose() * t;
}

/// Unit quaternion (1/sqrt(1 + |d|^2/4)) * [d/2; 1].
inline Quaternion small_angle_to_quat(const Vec3& dtheta) {
  if (!dtheta.allFinite()) throw std::invalid_argument("small angle is not finite");
  Vec4 c;
  c.head<3>() = 0.5 * dtheta;
  c[3] = 1.0;
  return Quaternion::from_coeffs(c / std::sqrt(1.0 + 0.25 * dtheta.squaredNorm()));
}

}  // namespace qici
