#pragma once

#include "qici/qici.hpp"

#include <cmath>
#include <random>

namespace qici::test {

inline Vec3 random_vec3(Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return Vec3(n(rng), n(rng), n(rng));
}

inline Quaternion random_quat(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quaternion::from_coeffs(Vec4(n(rng), n(rng), n(rng), n(rng)));
}

inline TargetState random_state(Rng& rng) {
  return TargetState{random_quat(rng), random_vec3(rng, 2.0), random_vec3(rng)};
}

/// A A^T + eps I with Gaussian A, rescaled so eigenvalues span a few decades.
template <int D>
Mat<D> random_spd(Rng& rng, double eps = 0.05) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat<D> a;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) a(i, j) = n(rng);
  Mat<D> p = a * a.transpose() + eps * Mat<D>::Identity();
  return symmetrized(p);
}

template <int D>
Vec<D> random_vec(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec<D> v;
  for (int i = 0; i < D; ++i) v[i] = n(rng);
  return v;
}

/// Rodrigues rotation matrix of the active rotation by `angle` about unit `m`.
inline Mat3 rodrigues(const Vec3& m, double angle) {
  const Vec3 u = m.normalized();
  Mat3 k;
  k << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
  return Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;
}

/// Central differences of the propagated error w.r.t. a boxplus perturbation.
inline Mat9 numeric_phi(const TargetState& x, const ImuReading& u, double dt, double h = 1e-6) {
  const TargetState fx = imu_propagate_state(x, u, dt);
  Mat9 j;
  for (int c = 0; c < 9; ++c) {
    Vec9 d = Vec9::Zero();
    d[c] = h;
    j.col(c) = (error_between(imu_propagate_state(boxplus(x, d), u, dt), fx) -
                error_between(imu_propagate_state(boxplus(x, -d), u, dt), fx)) /
               (2 * h);
  }
  return j;
}

/// Central differences of the unguarded projection w.r.t. a boxplus perturbation.
inline Mat<2, 9> numeric_h(const CameraModel& cam, const TargetState& x, double h = 1e-6) {
  Mat<2, 9> j;
  for (int c = 0; c < 9; ++c) {
    Vec9 d = Vec9::Zero();
    d[c] = h;
    const Vec3 a = cam.R_cg * (boxplus(x, d).p - cam.p_c);
    const Vec3 b = cam.R_cg * (boxplus(x, -d).p - cam.p_c);
    j.col(c) = (Vec2(a.x() / a.z(), a.y() / a.z()) - Vec2(b.x() / b.z(), b.y() / b.z())) / (2 * h);
  }
  return j;
}

/// Camera placed 2..5 m from `target`, looking at it with a random offset.
inline CameraModel camera_facing(const Vec3& target, Rng& rng) {
  std::uniform_real_distribution<double> dist(2.0, 4.5);
  Vec3 dir = random_vec3(rng).normalized();
  const Vec3 pos = target + dist(rng) * dir;
  return camera_looking_at(pos, target + random_vec3(rng, 0.3), 10.0, 2e-3);
}

/// Largest entry of |a - b| relative to max(1, |b|).
template <typename A, typename B>
double max_rel_diff(const A& a, const B& b) {
  return ((a - b).array().abs() / b.array().abs().max(1.0)).maxCoeff();
}

}  // namespace qici::test
