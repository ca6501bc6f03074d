#pragma once

// Augmented-quaternion target state and its 9-dimensional error state,
// ordered [dTheta, dp, dv] everywhere in the library.

#include "qici/linalg.hpp"
#include "qici/quatcore.hpp"

namespace qici {

inline constexpr int kErrorDim = 9;

struct TargetState {
  Quaternion q;            ///< orientation ^L_G q
  Vec3 p = Vec3::Zero();   ///< position in G [m]
  Vec3 v = Vec3::Zero();   ///< velocity in G [m/s]

  bool finite() const { return p.allFinite() && v.allFinite() && q.coeffs().allFinite(); }
  bool operator==(const TargetState& o) const { return q == o.q && p == o.p && v == o.v; }
};

using ErrorState = Vec9;

inline Vec3 theta_part(const ErrorState& e) { return e.segment<3>(0); }
inline Vec3 position_part(const ErrorState& e) { return e.segment<3>(3); }
inline Vec3 velocity_part(const ErrorState& e) { return e.segment<3>(6); }

inline ErrorState pack_error(const Vec3& dtheta, const Vec3& dp, const Vec3& dv) {
  ErrorState e;
  e << dtheta, dp, dv;
  return e;
}

struct Estimate {
  TargetState state;
  Mat9 P = Mat9::Identity();

  bool operator==(const Estimate& o) const { return state == o.state && P == o.P; }
};

/// x [+] d: q <- q (x) dq(dTheta), p <- p + dp, v <- v + dv.
inline TargetState boxplus(const TargetState& x, const ErrorState& d) {
  if (d.isZero(0.0)) return x;
  TargetState out;
  out.q = multiply(x.q, small_angle_to_quat(theta_part(d)));
  out.p = x.p + position_part(d);
  out.v = x.v + velocity_part(d);
  return out;
}

/// Error of `mine` relative to the reference `theirs`, so that
/// mine ~= theirs [+] error_between(mine, theirs).
inline ErrorState error_between(const TargetState& mine, const TargetState& theirs) {
  return pack_error(error_angle(theirs.q, mine.q), mine.p - theirs.p, mine.v - theirs.v);
}

}  // namespace qici
