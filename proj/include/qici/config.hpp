#pragma once

// JSON scenario configuration. Every key is optional; missing keys take the
// embedded defaults, unknown keys are rejected.

#include "qici/random.hpp"
#include "qici/simnet.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qici {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  Scenario scenario;
  std::vector<double> comm_rates{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<Variant> variants{Variant::ICI, Variant::CI, Variant::CENTRALIZED};
  int trials = 50;
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

template <int N>
Vec<N> read_vec(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != N) throw ConfigError(what + " must be an array of " + std::to_string(N) + " numbers");
  Vec<N> v;
  for (int i = 0; i < N; ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " must contain numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline json camera_to_json(const CameraModel& c) {
  const Quaternion q = c.attitude_quaternion();
  const Vec4 qc = q.coeffs();
  return json{{"q", {qc[0], qc[1], qc[2], qc[3]}},
              {"p", {c.p_c[0], c.p_c[1], c.p_c[2]}},
              {"range", c.range},
              {"sigma_pixel", std::sqrt(c.R_pix(0, 0))},
              {"z_min", c.z_min},
              {"max_off_axis", c.max_off_axis}};
}

inline CameraModel camera_from_json(const json& j, int index) {
  const std::string where = "cameras[" + std::to_string(index) + "]";
  reject_unknown(j, {"q", "p", "range", "sigma_pixel", "z_min", "max_off_axis"}, where);
  if (!j.contains("q") || !j.contains("p")) throw ConfigError(where + " needs 'q' and 'p'");
  CameraModel c;
  try {
    c.set_attitude(Quaternion::from_unit_coeffs(read_vec<4>(j.at("q"), where + ".q")));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ".q: " + e.what());
  }
  c.p_c = read_vec<3>(j.at("p"), where + ".p");
  double sigma = 2e-3;
  read(j, "range", c.range, where);
  read(j, "sigma_pixel", sigma, where);
  read(j, "z_min", c.z_min, where);
  read(j, "max_off_axis", c.max_off_axis, where);
  if (!(sigma > 0.0)) throw ConfigError(where + ".sigma_pixel must be positive");
  c.R_pix = Mat2::Identity() * sigma * sigma;
  return c;
}

}  // namespace config_detail

inline nlohmann::json to_json(const RunConfig& rc) {
  using nlohmann::json;
  const Scenario& s = rc.scenario;
  json cams = json::array();
  for (const auto& c : s.cameras) cams.push_back(config_detail::camera_to_json(c));
  json variants = json::array();
  for (auto v : rc.variants) variants.push_back(to_string(v));
  return json{
      {"cameras", cams},
      {"trajectory",
       {{"preset", to_string(s.trajectory.preset)},
        {"radius", s.trajectory.radius},
        {"height", s.trajectory.height},
        {"vertical_amplitude", s.trajectory.vertical_amplitude},
        {"period", s.trajectory.period},
        {"kp", s.trajectory.kp},
        {"kd", s.trajectory.kd}}},
      {"dt", s.dt},
      {"steps", s.steps},
      {"noise", {{"sigma_gyro", s.noise.sigma_gyro}, {"sigma_accel", s.noise.sigma_accel}}},
      {"init",
       {{"sigma_theta", s.init.sigma_theta}, {"sigma_pos", s.init.sigma_pos}, {"sigma_vel", s.init.sigma_vel}}},
      {"comm_rate", s.comm_rate},
      {"comm_rates", rc.comm_rates},
      {"variants", variants},
      {"trials", rc.trials},
      {"seed", s.seed},
      {"symmetric_links", s.symmetric_links},
      {"two_round", s.two_round},
      {"divergence_position_std", s.divergence_position_std},
  };
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  using namespace config_detail;
  reject_unknown(j,
                 {"cameras", "trajectory", "dt", "steps", "noise", "init", "comm_rate", "comm_rates",
                  "variants", "trials", "seed", "symmetric_links", "two_round", "divergence_position_std"},
                 "config");
  RunConfig rc;
  Scenario& s = rc.scenario;
  if (j.contains("cameras")) {
    const json& cj = j.at("cameras");
    if (!cj.is_array() || cj.empty()) throw ConfigError("'cameras' must be a non-empty array");
    s.cameras.clear();
    for (std::size_t i = 0; i < cj.size(); ++i) s.cameras.push_back(camera_from_json(cj[i], static_cast<int>(i)));
  }
  if (j.contains("trajectory")) {
    const json& t = j.at("trajectory");
    reject_unknown(t, {"preset", "radius", "height", "vertical_amplitude", "period", "kp", "kd"}, "trajectory");
    std::string preset = to_string(s.trajectory.preset);
    read(t, "preset", preset, "trajectory");
    try {
      s.trajectory.preset = preset_from_string(preset);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    read(t, "radius", s.trajectory.radius, "trajectory");
    read(t, "height", s.trajectory.height, "trajectory");
    read(t, "vertical_amplitude", s.trajectory.vertical_amplitude, "trajectory");
    read(t, "period", s.trajectory.period, "trajectory");
    read(t, "kp", s.trajectory.kp, "trajectory");
    read(t, "kd", s.trajectory.kd, "trajectory");
  }
  read(j, "dt", s.dt, "config");
  read(j, "steps", s.steps, "config");
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    reject_unknown(n, {"sigma_gyro", "sigma_accel"}, "noise");
    read(n, "sigma_gyro", s.noise.sigma_gyro, "noise");
    read(n, "sigma_accel", s.noise.sigma_accel, "noise");
  }
  if (j.contains("init")) {
    const json& n = j.at("init");
    reject_unknown(n, {"sigma_theta", "sigma_pos", "sigma_vel"}, "init");
    read(n, "sigma_theta", s.init.sigma_theta, "init");
    read(n, "sigma_pos", s.init.sigma_pos, "init");
    read(n, "sigma_vel", s.init.sigma_vel, "init");
  }
  read(j, "comm_rate", s.comm_rate, "config");
  read(j, "comm_rates", rc.comm_rates, "config");
  if (j.contains("variants")) {
    std::vector<std::string> names;
    read(j, "variants", names, "config");
    rc.variants.clear();
    try {
      for (const auto& n : names) rc.variants.push_back(variant_from_string(n));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  read(j, "trials", rc.trials, "config");
  read(j, "seed", s.seed, "config");
  read(j, "symmetric_links", s.symmetric_links, "config");
  read(j, "two_round", s.two_round, "config");
  read(j, "divergence_position_std", s.divergence_position_std, "config");

  if (rc.trials < 1) throw ConfigError("'trials' must be >= 1");
  if (rc.variants.empty()) throw ConfigError("'variants' must not be empty");
  for (double r : rc.comm_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("communication rates must lie in [0, 1]");
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// Hex FNV-1a digest of the canonical (sorted-key, compact) JSON form.
inline std::string config_digest(const RunConfig& rc) {
  const std::string canon = to_json(rc).dump();
  Fnv1a h;
  h.bytes(canon.data(), canon.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.digest()));
  return buf;
}

}  // namespace qici
