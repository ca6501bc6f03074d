#pragma once

// Time-varying communication graphs, ground-truth trajectories and the
// synchronous per-step simulation engine.

#include "qici/estimator.hpp"
#include "qici/models.hpp"
#include "qici/random.hpp"
#include "qici/state.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qici {

// ---------------------------------------------------------------------------
// Communication graph

/// Directed graph for one time step; edge (j -> i) means agent i receives
/// from agent j. Self-loops are always present.
class CommGraph {
 public:
  explicit CommGraph(int n = 0) : n_(n), adj_(static_cast<std::size_t>(n) * n, 0) {
    for (int i = 0; i < n; ++i) set_edge(i, i);
  }

  int size() const { return n_; }
  bool has_edge(int from, int to) const { return adj_[index(from, to)] != 0; }
  void set_edge(int from, int to) { adj_[index(from, to)] = 1; }

  /// Senders j with (j -> i), ascending, including i itself.
  std::vector<int> in_neighbours(int i) const {
    std::vector<int> out;
    for (int j = 0; j < n_; ++j) {
      if (has_edge(j, i)) out.push_back(j);
    }
    return out;
  }

  int in_degree_excluding_self(int i) const {
    int d = 0;
    for (int j = 0; j < n_; ++j) d += (j != i && has_edge(j, i)) ? 1 : 0;
    return d;
  }

  std::uint64_t digest() const {
    Fnv1a h;
    h.value(n_);
    h.bytes(adj_.data(), adj_.size());
    return h.digest();
  }

 private:
  std::size_t index(int from, int to) const {
    if (from < 0 || to < 0 || from >= n_ || to >= n_) throw std::out_of_range("graph node out of range");
    return static_cast<std::size_t>(to) * n_ + from;
  }

  int n_;
  std::vector<std::uint8_t> adj_;
};

/// Each ordered pair (j -> i), j != i, is present independently with
/// probability `rate`; `symmetric` draws one link per unordered pair instead.
template <typename R>
CommGraph sample_graph(int n, double rate, R& rng, bool symmetric = false) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("communication rate outside [0, 1]");
  if (n < 0) throw std::invalid_argument("negative agent count");
  CommGraph g(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (symmetric && j < i) continue;
      if (u(rng) < rate) {
        g.set_edge(j, i);
        if (symmetric) g.set_edge(i, j);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Trajectories

enum class TrajectoryPreset { A, B };

inline std::string to_string(TrajectoryPreset p) { return p == TrajectoryPreset::A ? "preset-a" : "preset-b"; }

inline TrajectoryPreset preset_from_string(const std::string& s) {
  if (s == "preset-a") return TrajectoryPreset::A;
  if (s == "preset-b") return TrajectoryPreset::B;
  throw std::invalid_argument("unknown trajectory preset '" + s + "'");
}

/// Parametric paths standing in for unpublished flight paths: preset-a is a
/// circle with a vertical oscillation (helix-like), preset-b a lemniscate of
/// Gerono. The body z-axis follows the specific force, the heading follows
/// the velocity.
struct TrajectorySpec {
  TrajectoryPreset preset = TrajectoryPreset::A;
  double radius = 4.0;              ///< [m]
  double height = 1.5;              ///< mean altitude [m]
  double vertical_amplitude = 0.5;  ///< [m]
  double period = 15.0;             ///< one lap [s]
  double kp = 4.0;                  ///< path-following gains of the truth generator
  double kd = 4.0;

  void validate() const {
    if (!(radius > 0.0) || !(period > 0.0)) throw std::invalid_argument("trajectory radius and period must be positive");
    if (vertical_amplitude < 0.0 || kp < 0.0 || kd < 0.0) throw std::invalid_argument("negative trajectory parameter");
  }

  struct Kinematics {
    Vec3 p, v, a;
  };

  Kinematics at(double t) const {
    const double w = 2.0 * std::numbers::pi / period;
    const double r = radius;
    const double A = vertical_amplitude;
    const double s = std::sin(w * t), c = std::cos(w * t);
    const double s2 = std::sin(2 * w * t), c2 = std::cos(2 * w * t);
    Kinematics k;
    if (preset == TrajectoryPreset::A) {
      k.p = Vec3(r * c, r * s, height + A * s2);
      k.v = Vec3(-r * w * s, r * w * c, 2 * A * w * c2);
      k.a = Vec3(-r * w * w * c, -r * w * w * s, -4 * A * w * w * s2);
    } else {
      k.p = Vec3(r * s, 0.5 * r * s2, height + A * s);
      k.v = Vec3(r * w * c, r * w * c2, A * w * c);
      k.a = Vec3(-r * w * w * s, -2 * r * w * w * s2, -A * w * w * s);
    }
    return k;
  }

  Quaternion attitude_at(double t) const {
    const Kinematics k = at(t);
    const Vec3 zb = (k.a + gravity_vector()).normalized();
    const double yaw = std::atan2(k.v.y(), k.v.x());
    const Vec3 xc(std::cos(yaw), std::sin(yaw), 0.0);
    const Vec3 yb = zb.cross(xc).normalized();
    const Vec3 xb = yb.cross(zb);
    Mat3 r_gl;
    r_gl.col(0) = xb;
    r_gl.col(1) = yb;
    r_gl.col(2) = zb;
    return from_rot_matrix(r_gl.transpose());
  }
};

inline Vec3 rotation_vector(const Quaternion& q) {
  const Vec3 v = q.vec();
  const double n = v.norm();
  if (n < 1e-15) return 2.0 * v;
  return (2.0 * std::atan2(n, q.w()) / n) * v;
}

struct GroundTruth {
  std::vector<TargetState> states;    ///< steps + 1 samples
  std::vector<ImuReading> true_imu;   ///< steps readings
};

/// Noise-free ground truth: states[k+1] = imu_propagate_state(states[k],
/// true_imu[k], dt). Attitude is steered onto the preset attitude at every
/// sample; translation follows the path through a PD correction.
inline GroundTruth make_ground_truth(const TrajectorySpec& spec, double dt, int steps) {
  spec.validate();
  check_dt(dt);
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  GroundTruth gt;
  gt.states.reserve(steps + 1);
  gt.true_imu.reserve(steps);
  const auto k0 = spec.at(0.0);
  gt.states.push_back(TargetState{spec.attitude_at(0.0), k0.p, k0.v});
  for (int k = 0; k < steps; ++k) {
    const TargetState& s = gt.states.back();
    const double t = k * dt;
    const auto des = spec.at(t);
    const Vec3 accel = des.a + spec.kp * (des.p - s.p) + spec.kd * (des.v - s.v);
    const Quaternion step_rot = multiply(spec.attitude_at(t + dt), inverse(s.q));
    ImuReading u;
    u.gyro = rotation_vector(step_rot) / dt;
    u.accel = rot_matrix(s.q) * (accel + gravity_vector());
    gt.true_imu.push_back(u);
    gt.states.push_back(imu_propagate_state(s, u, dt));
  }
  return gt;
}

/// Adds discrete white noise with standard deviation sigma / sqrt(dt), the
/// sampled equivalent of the continuous densities in `noise`.
template <typename R>
std::vector<ImuReading> corrupt_imu(std::span<const ImuReading> true_imu, const NoiseSpec& noise,
                                    double dt, R& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double sg = noise.sigma_gyro / std::sqrt(dt);
  const double sa = noise.sigma_accel / std::sqrt(dt);
  std::vector<ImuReading> out;
  out.reserve(true_imu.size());
  for (const auto& u : true_imu) {
    ImuReading m = u;
    for (int i = 0; i < 3; ++i) m.gyro[i] += sg * n(rng);
    for (int i = 0; i < 3; ++i) m.accel[i] += sa * n(rng);
    out.push_back(m);
  }
  return out;
}

struct Trajectory {
  std::vector<TargetState> states;
  std::vector<ImuReading> true_imu;
  std::vector<ImuReading> imu;  ///< what the filters receive
};

template <typename R>
Trajectory generate_trajectory(const TrajectorySpec& spec, double dt, int steps,
                               const NoiseSpec& noise, R& rng) {
  GroundTruth gt = make_ground_truth(spec, dt, steps);
  Trajectory t;
  t.imu = corrupt_imu(std::span<const ImuReading>(gt.true_imu), noise, dt, rng);
  t.states = std::move(gt.states);
  t.true_imu = std::move(gt.true_imu);
  return t;
}

// ---------------------------------------------------------------------------
// Scenario

/// Camera at `position` looking at `target`, image y-axis pointing down.
inline CameraModel camera_looking_at(const Vec3& position, const Vec3& target, double range,
                                     double sigma_pixel) {
  const Vec3 zc = (target - position).normalized();
  Vec3 xc = zc.cross(Vec3::UnitZ());
  if (xc.norm() < 1e-9) xc = Vec3::UnitX();
  xc.normalize();
  const Vec3 yc = zc.cross(xc);
  Mat3 r;
  r.row(0) = xc.transpose();
  r.row(1) = yc.transpose();
  r.row(2) = zc.transpose();
  CameraModel cam;
  cam.set_attitude(from_rot_matrix(r));
  cam.p_c = position;
  cam.range = range;
  cam.R_pix = Mat2::Identity() * sigma_pixel * sigma_pixel;
  return cam;
}

/// `count` cameras evenly spaced on a horizontal ring, all aimed at `look_at`.
inline std::vector<CameraModel> camera_ring(int count = 8, double ring_radius = 7.0,
                                            double height = 3.0,
                                            const Vec3& look_at = Vec3(0.0, 0.0, 1.5),
                                            double range = 5.0, double sigma_pixel = 2e-3) {
  std::vector<CameraModel> cams;
  for (int i = 0; i < count; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / count;
    const Vec3 pos(ring_radius * std::cos(phi), ring_radius * std::sin(phi), height);
    cams.push_back(camera_looking_at(pos, look_at, range, sigma_pixel));
  }
  return cams;
}

struct InitSpec {
  double sigma_theta = 0.1;  ///< per axis [rad]
  double sigma_pos = 0.5;    ///< [m]
  double sigma_vel = 0.1;    ///< [m/s]

  Mat9 covariance() const {
    Vec9 d;
    d << Vec3::Constant(sigma_theta * sigma_theta), Vec3::Constant(sigma_pos * sigma_pos),
        Vec3::Constant(sigma_vel * sigma_vel);
    return d.asDiagonal();
  }
};

enum class Variant { ICI, CI, CENTRALIZED, NONE };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::ICI: return "ici";
    case Variant::CI: return "ci";
    case Variant::CENTRALIZED: return "centralized";
    case Variant::NONE: return "none";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "ici") return Variant::ICI;
  if (s == "ci") return Variant::CI;
  if (s == "centralized") return Variant::CENTRALIZED;
  if (s == "none") return Variant::NONE;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

struct Scenario {
  std::vector<CameraModel> cameras = camera_ring();
  TrajectorySpec trajectory;
  double comm_rate = 0.3;
  double dt = 0.01;
  int steps = 3000;
  NoiseSpec noise;
  InitSpec init;
  std::uint64_t seed = 20240501;
  bool symmetric_links = false;
  /// false: agents recompute neighbours' measurement terms from shared
  /// (h, R, z); true: neighbours send terms linearized at their own estimate.
  bool two_round = false;
  /// An agent whose position standard deviation exceeds this is declared
  /// diverged; 0 disables the check.
  double divergence_position_std = 0.0;

  int agent_count() const { return static_cast<int>(cameras.size()); }

  void validate() const {
    if (cameras.empty()) throw std::invalid_argument("scenario needs at least one camera");
    for (const auto& c : cameras) c.validate();
    trajectory.validate();
    check_dt(dt);
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (!(comm_rate >= 0.0 && comm_rate <= 1.0)) throw std::invalid_argument("comm_rate outside [0, 1]");
    if (noise.sigma_gyro < 0.0 || noise.sigma_accel < 0.0) throw std::invalid_argument("negative IMU noise");
    if (init.sigma_theta <= 0.0 || init.sigma_pos <= 0.0 || init.sigma_vel <= 0.0) {
      throw std::invalid_argument("initial standard deviations must be positive");
    }
    if (divergence_position_std < 0.0) throw std::invalid_argument("negative divergence threshold");
  }
};

// ---------------------------------------------------------------------------
// Trial engine

/// Everything one trial produced. Step k (1-based) is stored at index k-1.
struct TrialRecord {
  Variant variant = Variant::ICI;
  int agents = 0;
  int cameras = 0;
  int steps = 0;
  std::uint64_t seed = 0;
  std::vector<TargetState> truth;          ///< steps
  std::vector<Estimate> posteriors;        ///< steps x agents
  std::vector<std::uint8_t> diverged;      ///< steps x agents
  std::vector<std::uint8_t> visible;       ///< steps x cameras
  std::vector<std::uint64_t> graph_digest; ///< steps
  std::vector<int> divergence_step;        ///< per agent, -1 if never
  Diagnostics diagnostics;

  const Estimate& posterior(int step, int agent) const { return posteriors[cell(step, agent)]; }
  bool is_diverged(int step, int agent) const { return diverged[cell(step, agent)] != 0; }
  bool camera_sees(int step, int camera) const {
    return visible[static_cast<std::size_t>(step) * cameras + camera] != 0;
  }
  int divergence_events() const {
    return static_cast<int>(std::count_if(divergence_step.begin(), divergence_step.end(),
                                          [](int s) { return s >= 0; }));
  }

  std::uint64_t digest() const {
    Fnv1a h;
    h.value(static_cast<int>(variant));
    h.value(agents);
    h.value(steps);
    for (const auto& s : truth) {
      h.bytes(s.q.coeffs().data(), 4 * sizeof(double));
      h.bytes(s.p.data(), 3 * sizeof(double));
      h.bytes(s.v.data(), 3 * sizeof(double));
    }
    for (const auto& e : posteriors) {
      h.bytes(e.state.q.coeffs().data(), 4 * sizeof(double));
      h.bytes(e.state.p.data(), 3 * sizeof(double));
      h.bytes(e.state.v.data(), 3 * sizeof(double));
      h.bytes(e.P.data(), 81 * sizeof(double));
    }
    h.bytes(diverged.data(), diverged.size());
    h.bytes(visible.data(), visible.size());
    for (auto g : graph_digest) h.value(g);
    return h.digest();
  }

 private:
  std::size_t cell(int step, int agent) const {
    return static_cast<std::size_t>(step) * agents + agent;
  }
};

enum class Phase { Prior, Intermediate, Posterior };

/// Passed to an optional per-phase observer of run_trial.
struct PhaseEvent {
  int step;                 ///< 1-based
  int agent;
  Phase phase;
  const Estimate& estimate;
  int neighbours;           ///< in-neighbours used, self included
  bool measured;            ///< any non-zero measurement term was applied
};

using PhaseObserver = std::function<void(const PhaseEvent&)>;

namespace detail {

inline bool healthy(const Estimate& e, double max_pos_std) {
  if (!e.state.finite() || !is_spd(e.P)) return false;
  if (max_pos_std > 0.0 && e.P.block<3, 3>(3, 3).diagonal().maxCoeff() > max_pos_std * max_pos_std) {
    return false;
  }
  return true;
}

inline Estimate initial_estimate(const Scenario& sc, const TargetState& truth0,
                                 std::uint64_t trial_seed, int agent) {
  Rng rng = make_rng(trial_seed, Stream::Init, static_cast<std::uint64_t>(agent));
  std::normal_distribution<double> n(0.0, 1.0);
  Vec9 d;
  for (int i = 0; i < 3; ++i) d[i] = sc.init.sigma_theta * n(rng);
  for (int i = 3; i < 6; ++i) d[i] = sc.init.sigma_pos * n(rng);
  for (int i = 6; i < 9; ++i) d[i] = sc.init.sigma_vel * n(rng);
  return Estimate{boxplus(truth0, d), sc.init.covariance()};
}

}  // namespace detail

/// Runs one Monte-Carlo trial. Per step: sample the graph, propagate every
/// agent, fuse neighbour priors (ICI / CI variants), simulate measurements,
/// update. CENTRALIZED runs a single filter consuming every camera; NONE
/// never communicates. Deterministic in (scenario, variant, trial_seed).
inline TrialRecord run_trial(const Scenario& sc, Variant variant, std::uint64_t trial_seed,
                             const GroundTruth* truth = nullptr,
                             const PhaseObserver& observer = {}) {
  sc.validate();
  GroundTruth local_truth;
  if (truth == nullptr) {
    local_truth = make_ground_truth(sc.trajectory, sc.dt, sc.steps);
    truth = &local_truth;
  }
  if (static_cast<int>(truth->true_imu.size()) < sc.steps) {
    throw std::invalid_argument("ground truth shorter than scenario");
  }

  const int cams = sc.agent_count();
  const bool central = variant == Variant::CENTRALIZED;
  const int n = central ? 1 : cams;
  const ImuDynamics dynamics{sc.noise};

  Rng imu_rng = make_rng(trial_seed, Stream::Imu);
  const auto imu = corrupt_imu(std::span<const ImuReading>(truth->true_imu).first(sc.steps),
                               sc.noise, sc.dt, imu_rng);
  Rng graph_rng = make_rng(trial_seed, Stream::Graph);
  std::vector<Rng> pixel_rng;
  pixel_rng.reserve(cams);
  for (int c = 0; c < cams; ++c) pixel_rng.push_back(make_rng(trial_seed, Stream::Pixel, c));

  TrialRecord rec;
  rec.variant = variant;
  rec.agents = n;
  rec.cameras = cams;
  rec.steps = sc.steps;
  rec.seed = trial_seed;
  rec.truth.reserve(sc.steps);
  rec.posteriors.reserve(static_cast<std::size_t>(sc.steps) * n);
  rec.diverged.reserve(static_cast<std::size_t>(sc.steps) * n);
  rec.visible.reserve(static_cast<std::size_t>(sc.steps) * cams);
  rec.graph_digest.reserve(sc.steps);
  rec.divergence_step.assign(n, -1);

  std::vector<Estimate> est;
  est.reserve(n);
  for (int i = 0; i < n; ++i) est.push_back(detail::initial_estimate(sc, truth->states[0], trial_seed, i));
  std::vector<std::uint8_t> dead(n, 0);

  const double rate = (variant == Variant::ICI || variant == Variant::CI) ? sc.comm_rate : 0.0;
  const FusionRule rule = variant == Variant::CI ? FusionRule::CI : FusionRule::ICI;

  std::vector<Estimate> prior(n), inter(n);
  std::vector<std::optional<PriorMessage>> msgs(n);
  std::vector<std::optional<Measurement>> meas(cams);
  std::vector<PriorMessage> inbox;
  std::vector<MeasurementContribution> terms;
  std::vector<MeasurementContribution> own_terms(n);

  auto kill = [&](int i, int step) {
    if (!dead[i]) {
      dead[i] = 1;
      rec.divergence_step[i] = step;
    }
  };
  auto notify = [&](int step, int agent, Phase ph, const Estimate& e, int nb, bool measured) {
    if (observer) observer(PhaseEvent{step, agent, ph, e, nb, measured});
  };

  for (int k = 1; k <= sc.steps; ++k) {
    const CommGraph graph = sample_graph(cams, rate, graph_rng, sc.symmetric_links);
    const ImuReading& u = imu[k - 1];
    const TargetState& x_true = truth->states[k];

    // Propagation.
    for (int i = 0; i < n; ++i) {
      msgs[i].reset();
      if (dead[i]) continue;
      try {
        prior[i] = propagate(est[i], dynamics, sc.dt, u);
        if (!central) msgs[i] = PriorMessage::from(prior[i]);
        notify(k, i, Phase::Prior, prior[i], 1, false);
      } catch (const std::runtime_error&) {
        kill(i, k);
      }
    }

    for (int c = 0; c < cams; ++c) {
      meas[c] = simulate_measurement(sc.cameras[c], x_true, pixel_rng[c], c, k);
      rec.visible.push_back(meas[c] ? 1 : 0);
    }

    if (central) {
      if (!dead[0]) {
        try {
          terms.clear();
          for (int c = 0; c < cams; ++c) {
            terms.push_back(measurement_contribution(prior[0], sc.cameras[c], meas[c], &rec.diagnostics));
          }
          est[0] = update(prior[0], terms);
          const bool measured = std::any_of(terms.begin(), terms.end(), [](const auto& t) { return !t.is_zero(); });
          notify(k, 0, Phase::Posterior, est[0], 1, measured);
          if (!detail::healthy(est[0], sc.divergence_position_std)) kill(0, k);
        } catch (const std::runtime_error&) {
          kill(0, k);
        }
      }
    } else {
      std::vector<std::vector<int>> nbrs(n);
      // Intermediate estimation over the priors received this step.
      for (int i = 0; i < n; ++i) {
        if (dead[i] || !msgs[i]) continue;
        for (int j : graph.in_neighbours(i)) {
          if (!dead[j] && msgs[j]) nbrs[i].push_back(j);
        }
        inbox.clear();
        for (int j : nbrs[i]) inbox.push_back(*msgs[j]);
        inter[i] = (variant == Variant::ICI || variant == Variant::CI)
                       ? intermediate_estimate(prior[i], inbox, rule, &rec.diagnostics)
                       : prior[i];
        notify(k, i, Phase::Intermediate, inter[i], static_cast<int>(nbrs[i].size()), false);
      }
      if (sc.two_round) {
        for (int j = 0; j < n; ++j) {
          if (dead[j] || !msgs[j]) continue;
          own_terms[j] = measurement_contribution(inter[j], sc.cameras[j], meas[j], &rec.diagnostics);
        }
      }
      // Measurement update with the neighbourhood's measurements.
      for (int i = 0; i < n; ++i) {
        if (dead[i] || !msgs[i]) continue;
        terms.clear();
        for (int j : nbrs[i]) {
          if (variant == Variant::NONE && j != i) continue;
          terms.push_back(sc.two_round
                              ? own_terms[j]
                              : measurement_contribution(inter[i], sc.cameras[j], meas[j], &rec.diagnostics));
        }
        try {
          est[i] = update(inter[i], terms);
          const bool measured = std::any_of(terms.begin(), terms.end(), [](const auto& t) { return !t.is_zero(); });
          notify(k, i, Phase::Posterior, est[i], static_cast<int>(nbrs[i].size()), measured);
          if (!detail::healthy(est[i], sc.divergence_position_std)) kill(i, k);
        } catch (const std::runtime_error&) {
          kill(i, k);
        }
      }
    }

    rec.truth.push_back(x_true);
    rec.graph_digest.push_back(graph.digest());
    for (int i = 0; i < n; ++i) {
      rec.posteriors.push_back(est[i]);
      rec.diverged.push_back(dead[i]);
    }
  }
  return rec;
}

/// Calls fn(t, run_trial(child_seed t)) for t in [0, trials) on up to
/// `threads` workers and returns the results in trial order.
template <typename Fn>
auto for_each_trial(const Scenario& sc, Variant variant, int trials, int threads, Fn&& fn)
    -> std::vector<decltype(fn(0, std::declval<TrialRecord>()))> {
  using Result = decltype(fn(0, std::declval<TrialRecord>()));
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  sc.validate();
  const GroundTruth gt = make_ground_truth(sc.trajectory, sc.dt, sc.steps);
  std::vector<std::optional<Result>> slots(trials);
  std::vector<std::exception_ptr> errors(trials);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < trials; t = next++) {
      try {
        slots[t].emplace(fn(t, run_trial(sc, variant, child_seed(sc.seed, t), &gt)));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, trials);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Result> out;
  out.reserve(trials);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Full records for every trial. Memory grows with trials x steps x agents;
/// prefer for_each_trial with a reducing callback for large runs.
inline std::vector<TrialRecord> run_monte_carlo(const Scenario& sc, Variant variant, int trials,
                                                int threads = 1) {
  return for_each_trial(sc, variant, trials, threads,
                        [](int, TrialRecord&& r) { return std::move(r); });
}

}  // namespace qici
