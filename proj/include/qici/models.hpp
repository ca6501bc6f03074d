#pragma once

// IMU-driven rigid-body dynamics and the pinhole camera sensor.

#include "qici/linalg.hpp"
#include "qici/quatcore.hpp"
#include "qici/state.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

namespace qici {

inline constexpr double kGravity = 9.81;

inline Vec3 gravity_vector() { return Vec3(0.0, 0.0, kGravity); }

struct ImuReading {
  Vec3 gyro = Vec3::Zero();   ///< omega_m, body frame [rad/s]
  Vec3 accel = Vec3::Zero();  ///< a_m, body frame, gravity included [m/s^2]
};

/// Continuous-time IMU noise densities. Q = diag(s_w^2 I3, s_a^2 I3).
struct NoiseSpec {
  double sigma_gyro = 0.03;
  double sigma_accel = 0.02;

  Mat6 Q() const {
    if (sigma_gyro < 0.0 || sigma_accel < 0.0) throw std::invalid_argument("negative IMU noise");
    Mat6 q = Mat6::Zero();
    q.topLeftCorner<3, 3>().diagonal().setConstant(sigma_gyro * sigma_gyro);
    q.bottomRightCorner<3, 3>().diagonal().setConstant(sigma_accel * sigma_accel);
    return q;
  }
};

inline void check_dt(double dt) {
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("dt must lie in (0, 0.1]");
}

/// Zero-order-hold strapdown step: closed-form attitude exponential, then
/// v += (R^T a_m - g) dt and p += v dt + (R^T a_m - g) dt^2 / 2 with R taken
/// at the start of the step.
inline TargetState imu_propagate_state(const TargetState& x, const ImuReading& u, double dt) {
  check_dt(dt);
  const Vec3 accel_world = rot_matrix(x.q).transpose() * u.accel - gravity_vector();
  TargetState out;
  out.q = u.gyro.isZero(0.0) ? x.q : multiply(Quaternion::from_rotation_vector(u.gyro * dt), x.q);
  out.p = x.p + x.v * dt + 0.5 * dt * dt * accel_world;
  out.v = x.v + accel_world * dt;
  return out;
}

struct ImuJacobians {
  Mat9 Phi;        ///< discrete error transition
  Mat<9, 6> G;     ///< continuous noise input
};

/// Error-state Jacobians of imu_propagate_state for the right-multiplied
/// attitude error (q = q_hat (x) dq).
///
/// With s = R^T a_m: attitude error is invariant under the attitude step,
/// dv picks up -[s x] dt and dp picks up -[s x] dt^2 / 2. G has -I3 on the
/// gyro block and -R^T on the accelerometer block.
inline ImuJacobians imu_error_jacobians(const TargetState& x, const ImuReading& u, double dt) {
  check_dt(dt);
  const Mat3 Rt = rot_matrix(x.q).transpose();
  const Mat3 s_cross = skew(Rt * u.accel);
  ImuJacobians j;
  j.Phi = Mat9::Identity();
  j.Phi.block<3, 3>(3, 0) = -0.5 * dt * dt * s_cross;
  j.Phi.block<3, 3>(3, 6) = dt * Mat3::Identity();
  j.Phi.block<3, 3>(6, 0) = -dt * s_cross;
  j.G = Mat<9, 6>::Zero();
  j.G.block<3, 3>(0, 0) = -Mat3::Identity();
  j.G.block<3, 3>(6, 3) = -Rt;
  return j;
}

/// IMU dynamics bound to a set of noise densities.
struct ImuDynamics {
  NoiseSpec noise;

  TargetState propagate_state(const TargetState& x, const ImuReading& u, double dt) const {
    return imu_propagate_state(x, u, dt);
  }
  ImuJacobians jacobians(const TargetState& x, const ImuReading& u, double dt) const {
    return imu_error_jacobians(x, u, dt);
  }
  /// Discrete process noise O = G Q G^T dt.
  Mat9 process_noise(const ImuJacobians& j, double dt) const {
    return symmetrized(Mat9(j.G * noise.Q() * j.G.transpose() * dt));
  }
};

struct CameraModel {
  Mat3 R_cg = Mat3::Identity();      ///< global -> camera rotation
  Vec3 p_c = Vec3::Zero();           ///< camera position in G [m]
  Mat2 R_pix = Mat2::Identity() * 4e-6;  ///< normalized-image-plane noise covariance
  double range = 5.0;                ///< sensing radius [m]
  double z_min = 0.1;                ///< minimum forward depth [m]
  double max_off_axis = 0.0;         ///< half field of view [rad]; 0 disables
  std::optional<Quaternion> attitude;  ///< quaternion R_cg was built from, if any

  void set_attitude(const Quaternion& q_cg) {
    attitude = q_cg;
    R_cg = rot_matrix(q_cg);
  }

  /// The stored quaternion while it still matches R_cg, else one recovered from R_cg.
  Quaternion attitude_quaternion() const {
    if (attitude && rot_matrix(*attitude) == R_cg) return *attitude;
    return from_rot_matrix(R_cg);
  }

  void validate() const {
    if (!(range > 0.0)) throw std::invalid_argument("camera range must be positive");
    if (!(z_min > 0.0)) throw std::invalid_argument("camera z_min must be positive");
    const Mat3 should_be_identity = R_cg.transpose() * R_cg;
    if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        std::abs(R_cg.determinant() - 1.0) > 1e-9) {
      throw std::invalid_argument("camera rotation is not a proper rotation");
    }
  }

  Vec3 to_camera(const Vec3& p_target) const { return R_cg * (p_target - p_c); }
};

inline Vec2 pinhole(const Vec3& cp) { return Vec2(cp.x() / cp.z(), cp.y() / cp.z()); }

/// Projection without visibility gating; empty when the point is not in front
/// of the camera by at least z_min.
inline std::optional<Vec2> project_point(const CameraModel& cam, const Vec3& p_target) {
  const Vec3 cp = cam.to_camera(p_target);
  if (!(cp.z() > cam.z_min)) return std::nullopt;
  return pinhole(cp);
}

inline bool is_visible(const CameraModel& cam, const Vec3& p_target) {
  if (!p_target.allFinite()) return false;
  const Vec3 cp = cam.to_camera(p_target);
  if (!(cp.z() > cam.z_min)) return false;
  if ((p_target - cam.p_c).norm() > cam.range) return false;
  if (cam.max_off_axis > 0.0 && std::atan2(cp.head<2>().norm(), cp.z()) > cam.max_off_axis) {
    return false;
  }
  return true;
}

/// Normalized image coordinates of a visible target, or nothing.
inline std::optional<Vec2> camera_project(const CameraModel& cam, const Vec3& p_target) {
  if (!is_visible(cam, p_target)) return std::nullopt;
  return pinhole(cam.to_camera(p_target));
}

inline Mat<2, 3> projection_jacobian(const Vec3& cp) {
  const double iz = 1.0 / cp.z();
  Mat<2, 3> hp;
  hp << iz, 0.0, -cp.x() * iz * iz,
        0.0, iz, -cp.y() * iz * iz;
  return hp;
}

/// H = H_p(cp) R_cg [0 I 0]; throws std::domain_error when the state is not
/// in front of the camera.
inline Mat<2, 9> camera_jacobian(const CameraModel& cam, const TargetState& x) {
  const Vec3 cp = cam.to_camera(x.p);
  if (!(cp.z() > cam.z_min)) throw std::domain_error("target is at or behind the image plane");
  Mat<2, 9> H = Mat<2, 9>::Zero();
  H.block<2, 3>(0, 3) = projection_jacobian(cp) * cam.R_cg;
  return H;
}

struct Measurement {
  Vec2 z = Vec2::Zero();
  int camera_id = 0;
  std::int64_t timestep = 0;
};

/// Draws the pixel noise unconditionally so the random stream advances the
/// same way whether or not the target is visible.
template <typename Rng>
std::optional<Measurement> simulate_measurement(const CameraModel& cam, const TargetState& x_true,
                                                Rng& rng, int camera_id = 0,
                                                std::int64_t timestep = 0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vec2 n(normal(rng), normal(rng));
  auto z = camera_project(cam, x_true.p);
  if (!z) return std::nullopt;
  Eigen::LLT<Mat2> llt(cam.R_pix);
  const Mat2 L = cam.R_pix.isZero(0.0) ? Mat2::Zero() : Mat2(llt.matrixL());
  return Measurement{*z + L * n, camera_id, timestep};
}

}  // namespace qici
