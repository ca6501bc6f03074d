#pragma once

// Per-agent distributed error-state filter over augmented-quaternion states:
// propagation, intermediate fusion of neighbour priors in the error space,
// and an information-form measurement update. A centralized error-state EKF
// built from the same pieces serves as the baseline.

#include "qici/fusion.hpp"
#include "qici/linalg.hpp"
#include "qici/models.hpp"
#include "qici/state.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace qici {

class PropagationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UpdateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Counters for recoverable events inside one agent's step.
struct Diagnostics {
  int fusion_fallbacks = 0;
  int linearization_failures = 0;

  Diagnostics& operator+=(const Diagnostics& o) {
    fusion_fallbacks += o.fusion_fallbacks;
    linearization_failures += o.linearization_failures;
    return *this;
  }
};

struct MeasurementContribution {
  Mat9 info = Mat9::Zero();
  Vec9 vec = Vec9::Zero();

  static MeasurementContribution zero() { return {}; }
  bool is_zero() const { return info.isZero(0.0) && vec.isZero(0.0); }
};

/// A prior as broadcast to neighbours, together with its information matrix
/// so receivers do not have to invert it again.
struct PriorMessage {
  Estimate prior;
  Mat9 information;

  static PriorMessage from(const Estimate& e) {
    return PriorMessage{e, spd_inverse(e.P, "prior covariance")};
  }
};

/// x_bar = f(x_hat), P_bar = Phi P Phi^T + G Q G^T dt.
template <typename Dynamics>
Estimate propagate(const Estimate& prev, const Dynamics& model, double dt,
                   const ImuReading& control) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const auto jac = model.jacobians(prev.state, control, dt);
  Estimate out;
  out.state = model.propagate_state(prev.state, control, dt);
  out.P = symmetrized(Mat9(jac.Phi * prev.P * jac.Phi.transpose() + model.process_noise(jac, dt)));
  if (!out.state.finite() || !out.P.allFinite()) {
    throw PropagationError("propagation produced non-finite values");
  }
  return out;
}

/// Fuses neighbour priors (which must include the agent's own prior) in the
/// error space around the agent's own prior, then applies the correction
/// with boxplus. Weights follow the 1/trace rule. A degenerate fusion leaves
/// `mine` unchanged and is counted in `diag`.
inline Estimate intermediate_estimate(const Estimate& mine,
                                      std::span<const PriorMessage> neighbours,
                                      FusionRule rule = FusionRule::ICI,
                                      Diagnostics* diag = nullptr) {
  if (neighbours.empty()) throw std::invalid_argument("neighbour set must contain the agent itself");
  bool has_self = false;
  for (const auto& m : neighbours) has_self = has_self || (m.prior == mine);
  if (!has_self) throw std::invalid_argument("neighbour set must contain the agent itself");
  if (neighbours.size() == 1) return mine;

  std::vector<VectorEstimate<kErrorDim>> errors;
  std::vector<Mat9> infos;
  std::vector<Mat9> covs;
  errors.reserve(neighbours.size());
  infos.reserve(neighbours.size());
  covs.reserve(neighbours.size());
  for (const auto& m : neighbours) {
    errors.push_back({error_between(m.prior.state, mine.state), m.prior.P});
    infos.push_back(m.information);
    covs.push_back(m.prior.P);
  }

  try {
    const FusionWeights w = trace_weights<kErrorDim>(covs);
    const auto fused = rule == FusionRule::ICI
                           ? ici_fuse_multi<kErrorDim>(errors, infos, w)
                           : ci_fuse_multi<kErrorDim>(errors, infos, w);
    if (!fused.x.allFinite()) throw FusionDegeneracyError("non-finite fused correction");
    return Estimate{boxplus(mine.state, fused.x), fused.P};
  } catch (const FusionDegeneracyError&) {
  } catch (const FactorizationError&) {
  }
  if (diag) ++diag->fusion_fallbacks;
  return mine;
}

inline Estimate intermediate_estimate(const Estimate& mine, std::span<const Estimate> neighbours,
                                      FusionRule rule = FusionRule::ICI,
                                      Diagnostics* diag = nullptr) {
  std::vector<PriorMessage> msgs;
  msgs.reserve(neighbours.size());
  for (const auto& e : neighbours) msgs.push_back(PriorMessage::from(e));
  return intermediate_estimate(mine, std::span<const PriorMessage>(msgs), rule, diag);
}

/// CI-based baseline of intermediate_estimate.
inline Estimate ci_variant_intermediate(const Estimate& mine, std::span<const Estimate> neighbours,
                                        Diagnostics* diag = nullptr) {
  return intermediate_estimate(mine, neighbours, FusionRule::CI, diag);
}

/// I = H^T R^-1 H and y = H^T R^-1 (z - h(x)), linearized at `est`. A blind
/// sensor (no measurement) contributes zeros; so does an estimate that sits
/// behind the camera, which is counted as a linearization failure.
inline MeasurementContribution measurement_contribution(const Estimate& est,
                                                        const CameraModel& sensor,
                                                        const std::optional<Measurement>& z,
                                                        Diagnostics* diag = nullptr) {
  if (!z) return MeasurementContribution::zero();
  Mat2 r_inv;
  try {
    r_inv = spd_inverse(sensor.R_pix, "measurement noise");
  } catch (const FactorizationError& e) {
    throw std::invalid_argument(e.what());
  }
  const auto predicted = project_point(sensor, est.state.p);
  if (!predicted || !est.state.finite()) {
    if (diag) ++diag->linearization_failures;
    return MeasurementContribution::zero();
  }
  const Mat<2, 9> H = camera_jacobian(sensor, est.state);
  const Mat<9, 2> HtRinv = H.transpose() * r_inv;
  MeasurementContribution c;
  c.info = symmetrized(Mat9(HtRinv * H));
  c.vec = HtRinv * (z->z - *predicted);
  return c;
}

/// P_hat = [P_check^-1 + sum I_j]^-1, x_hat = x_check [+] P_hat sum y_j.
/// Contributions are summed in the order given.
inline Estimate update(const Estimate& intermediate,
                       std::span<const MeasurementContribution> contributions) {
  bool any = false;
  for (const auto& c : contributions) any = any || !c.is_zero();
  if (!any) return intermediate;

  Mat9 info;
  try {
    info = spd_inverse(intermediate.P, "intermediate covariance");
  } catch (const FactorizationError& e) {
    throw UpdateError(e.what());
  }
  Vec9 info_vec = Vec9::Zero();
  for (const auto& c : contributions) {
    info += c.info;
    info_vec += c.vec;
  }
  Estimate out;
  try {
    out.P = spd_inverse(info, "posterior information");
  } catch (const FactorizationError& e) {
    throw UpdateError(e.what());
  }
  const Vec9 delta = out.P * info_vec;
  if (!delta.allFinite()) throw UpdateError("non-finite update correction");
  out.state = boxplus(intermediate.state, delta);
  return out;
}

/// Standard error-state EKF step consuming every sensor's measurement.
/// `measurements[k]` belongs to `sensors[k]`.
template <typename Dynamics>
Estimate centralized_step(const Estimate& prev, const Dynamics& model, double dt,
                          const ImuReading& control, std::span<const CameraModel> sensors,
                          std::span<const std::optional<Measurement>> measurements,
                          Diagnostics* diag = nullptr) {
  if (sensors.size() != measurements.size()) {
    throw std::invalid_argument("one measurement slot per sensor is required");
  }
  const Estimate prior = propagate(prev, model, dt, control);
  std::vector<MeasurementContribution> contributions;
  contributions.reserve(sensors.size());
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    contributions.push_back(measurement_contribution(prior, sensors[k], measurements[k], diag));
  }
  return update(prior, contributions);
}

}  // namespace qici
