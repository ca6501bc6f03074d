#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

namespace qici::cli {

namespace {

Quaternion random_quat(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quaternion::from_coeffs(Vec4(n(rng), n(rng), n(rng), n(rng)));
}

template <int D>
Mat<D> random_spd(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat<D> a;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) a(i, j) = n(rng);
  return a * a.transpose() + 0.1 * Mat<D>::Identity();
}

TargetState random_state(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return TargetState{random_quat(rng), Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), n(rng))};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

bool quaternion_identity() {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const Quaternion a = random_quat(rng), b = random_quat(rng);
    Mat<4> m;
    m.leftCols<3>() = xi(a);
    m.col(3) = a.coeffs();
    const Vec4 lhs = quat_product(inverse(a).coeffs(), b.coeffs());
    if ((lhs - m.transpose() * b.coeffs()).cwiseAbs().maxCoeff() > 1e-12) return false;
    if ((rot_matrix(a * b) - rot_matrix(a) * rot_matrix(b)).cwiseAbs().maxCoeff() > 1e-12) return false;
  }
  return true;
}

bool fusion_multi_matches_two() {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    VectorEstimate<3> a{Vec3(n(rng), n(rng), n(rng)), random_spd<3>(rng)};
    VectorEstimate<3> b{Vec3(n(rng), n(rng), n(rng)), random_spd<3>(rng)};
    const double alpha = u(rng);
    const std::vector<VectorEstimate<3>> both{a, b};
    const FusionWeights w({alpha, 1.0 - alpha});
    const auto m = ici_fuse_multi<3>(both, w);
    const auto s = ici_fuse_two(a, b, alpha);
    if ((m.P - s.P).cwiseAbs().maxCoeff() > 1e-10 || (m.x - s.x).cwiseAbs().maxCoeff() > 1e-10) return false;
  }
  return true;
}

bool ici_not_looser_than_ci() {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    VectorEstimate<3> a{Vec3::Zero(), random_spd<3>(rng)};
    VectorEstimate<3> b{Vec3::Zero(), random_spd<3>(rng)};
    const double ici = fuse_two(a, b, optimize_alpha_two(a, b, FusionRule::ICI), FusionRule::ICI).P.trace();
    const double ci = fuse_two(a, b, optimize_alpha_two(a, b, FusionRule::CI), FusionRule::CI).P.trace();
    if (ici > ci + 1e-9) return false;
  }
  return true;
}

bool jacobians_match_differences() {
  Rng rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const double h = 1e-6, dt = 0.01;
  for (int t = 0; t < 20; ++t) {
    const TargetState x = random_state(rng);
    const ImuReading u{Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), 9.81 + n(rng))};
    const Mat9 phi = imu_error_jacobians(x, u, dt).Phi;
    const TargetState fx = imu_propagate_state(x, u, dt);
    for (int c = 0; c < 9; ++c) {
      Vec9 d = Vec9::Zero();
      d[c] = h;
      const Vec9 col = (error_between(imu_propagate_state(boxplus(x, d), u, dt), fx) -
                        error_between(imu_propagate_state(boxplus(x, -d), u, dt), fx)) / (2 * h);
      for (int r = 0; r < 9; ++r)
        if (std::abs(col[r] - phi(r, c)) > 1e-4 * std::max(1.0, std::abs(phi(r, c)))) return false;
    }
    CameraModel cam;
    cam.p_c = x.p - Vec3(0.3 * n(rng), 0.3 * n(rng), 3.0);
    const Mat<2, 9> H = camera_jacobian(cam, x);
    for (int c = 0; c < 9; ++c) {
      Vec9 d = Vec9::Zero();
      d[c] = h;
      const Vec2 col = (pinhole(cam.to_camera(boxplus(x, d).p)) - pinhole(cam.to_camera(boxplus(x, -d).p))) / (2 * h);
      for (int r = 0; r < 2; ++r)
        if (rel_err(col[r], H(r, c)) > 1e-4) return false;
    }
  }
  return true;
}

bool graphs_have_self_loops() {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const CommGraph g = sample_graph(8, 0.3, rng);
    for (int i = 0; i < 8; ++i)
      if (!g.has_edge(i, i)) return false;
  }
  return true;
}

Scenario short_scenario() {
  Scenario sc;
  sc.steps = 200;
  sc.comm_rate = 0.5;
  return sc;
}

bool trials_are_deterministic() {
  const Scenario sc = short_scenario();
  return run_trial(sc, Variant::ICI, 77).digest() == run_trial(sc, Variant::ICI, 77).digest();
}

bool single_agent_matches_centralized() {
  Scenario sc = short_scenario();
  sc.cameras.resize(1);
  sc.comm_rate = 1.0;
  const TrialRecord a = run_trial(sc, Variant::ICI, 9);
  const TrialRecord b = run_trial(sc, Variant::CENTRALIZED, 9);
  for (int k = 0; k < sc.steps; ++k) {
    const Estimate& ea = a.posterior(k, 0);
    const Estimate& eb = b.posterior(k, 0);
    if (error_between(ea.state, eb.state).cwiseAbs().maxCoeff() > 1e-8) return false;
    if ((ea.P - eb.P).cwiseAbs().maxCoeff() > 1e-8) return false;
  }
  return true;
}

}  // namespace

bool selftest(std::ostream& out) {
  const std::pair<const char*, std::function<bool()>> checks[] = {
      {"quaternion product and rotation identities", quaternion_identity},
      {"multi-estimate ICI reduces to two-estimate ICI", fusion_multi_matches_two},
      {"trace-optimal ICI is not looser than CI", ici_not_looser_than_ci},
      {"transition and camera Jacobians vs finite differences", jacobians_match_differences},
      {"sampled graphs keep self-loops", graphs_have_self_loops},
      {"equal seeds give identical trials", trials_are_deterministic},
      {"single-agent network equals centralized filter", single_agent_matches_centralized},
  };
  bool all = true;
  for (const auto& [name, fn] : checks) {
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception&) {
      ok = false;
    }
    all = all && ok;
    out << (ok ? "PASS  " : "FAIL  ") << name << "\n";
  }
  return all;
}

}  // namespace qici::cli
