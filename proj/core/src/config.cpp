#include "skidsteer/config.hpp"

#include <filesystem>
#include <set>

#include <json.hpp>

#include "skidsteer/errors.hpp"
#include "skidsteer/log_io.hpp"

namespace skidsteer {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw Error(ErrorCategory::ConfigParse, "field '" + field + "': " + msg);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

void read(const json& j, const std::string& path, const char* key, double& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number()) fail(join(path, key), "expected a number");
  out = v.get<double>();
}

void read(const json& j, const std::string& path, const char* key, int& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
  out = v.get<int>();
}

void read(const json& j, const std::string& path, const char* key, bool& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_boolean()) fail(join(path, key), "expected true or false");
  out = v.get<bool>();
}

void read(const json& j, const std::string& path, const char* key, std::string& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_string()) fail(join(path, key), "expected a string");
  out = v.get<std::string>();
}

template <int N>
Eigen::Matrix<double, N, 1> vec_of(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != N) fail(field, "expected an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) fail(field, "expected numbers");
    out[i] = v[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

template <int N>
void read(const json& j, const std::string& path, const char* key, Eigen::Matrix<double, N, 1>& out) {
  if (!j.contains(key)) return;
  out = vec_of<N>(j.at(key), join(path, key));
}

Pose pose_of(const json& j, const std::string& path) {
  check_keys(j, path, {"q_wxyz", "p"});
  Pose p;
  if (j.contains("q_wxyz")) {
    const Eigen::Matrix<double, 4, 1> q = vec_of<4>(j.at("q_wxyz"), path + ".q_wxyz");
    if (q.norm() < 1e-9) fail(path + ".q_wxyz", "zero quaternion");
    p.q = normalized(Quat(q[0], q[1], q[2], q[3]));
  }
  if (j.contains("p")) p.p = vec_of<3>(j.at("p"), path + ".p");
  return p;
}

void parse_noise(const json& j, const std::string& path, NoiseConfig& n) {
  check_keys(j, path,
             {"sigma_encoder", "sigma_xi_walk", "sigma_gyro", "sigma_accel", "sigma_gyro_bias_walk",
              "sigma_accel_bias_walk", "sigma_pixel_px", "nominal_focal_px", "sigma_planar_slack"});
  read(j, path, "sigma_encoder", n.sigma_encoder);
  if (j.contains("sigma_xi_walk")) {
    const json& v = j.at("sigma_xi_walk");
    if (v.is_number()) {
      n.sigma_xi_walk.setConstant(v.get<double>());
    } else {
      n.sigma_xi_walk = vec_of<5>(v, path + ".sigma_xi_walk");
    }
  }
  read(j, path, "sigma_gyro", n.sigma_gyro);
  read(j, path, "sigma_accel", n.sigma_accel);
  read(j, path, "sigma_gyro_bias_walk", n.sigma_gyro_bias_walk);
  read(j, path, "sigma_accel_bias_walk", n.sigma_accel_bias_walk);
  read(j, path, "sigma_planar_slack", n.sigma_planar_slack);
  double px = 0.6, f = kNominalFocalPx;
  read(j, path, "sigma_pixel_px", px);
  read(j, path, "nominal_focal_px", f);
  if (!(f > 0.0)) fail(path + ".nominal_focal_px", "must be positive");
  n.sigma_pixel = px / f;
  try {
    n.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

void parse_estimator(const json& j, const std::string& path, EstimatorConfig& e) {
  check_keys(j, path,
             {"keyframe_translation_gate", "keyframe_rotation_gate", "window_size", "max_iterations",
              "lambda_init", "convergence_tol", "huber_threshold", "use_manifold",
              "manifold_weights", "prior_pose_std", "prior_xi_std", "prior_velocity_std",
              "prior_accel_bias_std", "prior_gyro_bias_std", "prior_manifold_std",
              "compute_marginals"});
  read(j, path, "keyframe_translation_gate", e.keyframe_translation_gate);
  read(j, path, "keyframe_rotation_gate", e.keyframe_rotation_gate);
  read(j, path, "window_size", e.window_size);
  read(j, path, "max_iterations", e.solver.max_iterations);
  read(j, path, "lambda_init", e.solver.lambda_init);
  read(j, path, "convergence_tol", e.solver.convergence_tol);
  read(j, path, "huber_threshold", e.solver.huber_threshold);
  read(j, path, "use_manifold", e.use_manifold);
  read(j, path, "manifold_weights", e.manifold_weights);
  read(j, path, "prior_pose_std", e.prior_pose_std);
  if (j.contains("prior_xi_std")) {
    const json& v = j.at("prior_xi_std");
    if (v.is_number()) {
      e.prior_xi_std.setConstant(v.get<double>());
    } else {
      e.prior_xi_std = vec_of<5>(v, path + ".prior_xi_std");
    }
  }
  read(j, path, "prior_velocity_std", e.prior_velocity_std);
  read(j, path, "prior_accel_bias_std", e.prior_accel_bias_std);
  read(j, path, "prior_gyro_bias_std", e.prior_gyro_bias_std);
  read(j, path, "prior_manifold_std", e.prior_manifold_std);
  read(j, path, "compute_marginals", e.compute_marginals);
}

MotionProfile profile_from_json(const json& j, const std::string& path) {
  check_keys(j, path,
             {"segments", "ramp_time", "start_from_rest", "omega_wobble", "omega_wobble_freq",
              "speed_wobble", "speed_wobble_freq", "manifold"});
  MotionProfile p;
  if (!j.contains("segments") || !j.at("segments").is_array() || j.at("segments").empty()) {
    fail(path + ".segments", "expected a non-empty array of [duration, v_x, omega_z]");
  }
  for (std::size_t i = 0; i < j.at("segments").size(); ++i) {
    const std::string f = path + ".segments[" + std::to_string(i) + "]";
    const Vec3 s = vec_of<3>(j.at("segments")[i], f);
    if (!(s[0] > 0.0)) fail(f, "duration must be positive");
    p.segments.push_back({s[0], s[1], s[2]});
  }
  read(j, path, "ramp_time", p.ramp_time);
  read(j, path, "start_from_rest", p.start_from_rest);
  read(j, path, "omega_wobble", p.omega_wobble);
  read(j, path, "omega_wobble_freq", p.omega_wobble_freq);
  read(j, path, "speed_wobble", p.speed_wobble);
  read(j, path, "speed_wobble_freq", p.speed_wobble_freq);
  read(j, path, "manifold", p.manifold.m);
  return p;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::ConfigParse, std::string("malformed JSON: ") + e.what());
  }
  check_keys(j, "",
             {"name", "profile", "xi_true", "xi_walk", "xi_initial", "xi_initial_error",
              "xi_init_error_std", "xi_init_from_track_width", "noise", "simulate_noise", "rig",
              "rates", "landmarks", "estimator", "mode", "modes", "seeds", "threads",
              "observability"});
  ScenarioConfig c;
  read(j, "", "name", c.name);
  if (j.contains("profile")) {
    const json& p = j.at("profile");
    check_keys(p, "profile",
               {"kind", "length", "duration", "speed", "omega", "speed_wobble", "manifold", "file"});
    read(p, "profile", "kind", c.profile.kind);
    read(p, "profile", "length", c.profile.length);
    read(p, "profile", "duration", c.profile.duration);
    read(p, "profile", "speed", c.profile.speed);
    read(p, "profile", "omega", c.profile.omega);
    read(p, "profile", "speed_wobble", c.profile.speed_wobble);
    read(p, "profile", "file", c.profile.file);
    if (p.contains("manifold")) c.profile.manifold = vec_of<6>(p.at("manifold"), "profile.manifold");
    const std::string& k = c.profile.kind;
    if (k != "general" && k != "straight" && k != "circle" && k != "file") {
      fail("profile.kind", "expected general, straight, circle or file");
    }
    if (k == "file") {
      if (c.profile.file.empty()) fail("profile.file", "required when kind is 'file'");
      std::filesystem::path fp(c.profile.file);
      if (fp.is_relative()) fp = std::filesystem::path(base_dir) / fp;
      if (!std::filesystem::exists(fp)) fail("profile.file", "file '" + fp.string() + "' not found");
      c.profile.file = fp.string();
    }
  }
  if (j.contains("xi_true")) {
    const Vec5 v = vec_of<5>(j.at("xi_true"), "xi_true");
    c.xi_true = KinematicParams::from_vec(v);
    try {
      check_params(c.xi_true);
    } catch (const Error& e) {
      fail("xi_true", e.what());
    }
  }
  read(j, "", "xi_walk", c.xi_walk);
  if (j.contains("xi_initial")) c.xi_initial = vec_of<5>(j.at("xi_initial"), "xi_initial");
  if (j.contains("xi_initial_error")) {
    c.xi_initial_error = vec_of<5>(j.at("xi_initial_error"), "xi_initial_error");
  }
  read(j, "", "xi_init_error_std", c.xi_init_error_std);
  read(j, "", "xi_init_from_track_width", c.xi_init_from_track_width);
  if (j.contains("noise")) parse_noise(j.at("noise"), "noise", c.noise);
  read(j, "", "simulate_noise", c.simulate_noise);
  if (j.contains("rig")) {
    const json& r = j.at("rig");
    check_keys(r, "rig", {"extrinsics_oc", "extrinsics_oi", "gravity", "fov_half_angle", "max_range", "min_depth"});
    if (r.contains("extrinsics_oc")) c.rig.extrinsics_OC = pose_of(r.at("extrinsics_oc"), "rig.extrinsics_oc");
    if (r.contains("extrinsics_oi")) c.rig.extrinsics_OI = pose_of(r.at("extrinsics_oi"), "rig.extrinsics_oi");
    read(r, "rig", "gravity", c.rig.gravity);
    read(r, "rig", "fov_half_angle", c.rig.fov_half_angle);
    read(r, "rig", "max_range", c.rig.max_range);
    read(r, "rig", "min_depth", c.rig.min_depth);
  }
  if (j.contains("rates")) {
    const json& r = j.at("rates");
    check_keys(r, "rates", {"encoder", "imu", "camera", "sim_dt"});
    read(r, "rates", "encoder", c.encoder_rate);
    read(r, "rates", "imu", c.imu_rate);
    read(r, "rates", "camera", c.camera_rate);
    read(r, "rates", "sim_dt", c.sim_dt);
    for (auto [name, v] : {std::pair{"rates.encoder", c.encoder_rate}, {"rates.imu", c.imu_rate},
                           {"rates.camera", c.camera_rate}, {"rates.sim_dt", c.sim_dt}}) {
      if (!(v > 0.0)) fail(name, "must be positive");
    }
  }
  if (j.contains("landmarks")) {
    const json& l = j.at("landmarks");
    check_keys(l, "landmarks", {"per_meter", "corridor_width"});
    read(l, "landmarks", "per_meter", c.landmarks_per_meter);
    read(l, "landmarks", "corridor_width", c.corridor_width);
    if (!(c.landmarks_per_meter > 0.0)) fail("landmarks.per_meter", "must be positive");
  }
  if (j.contains("estimator")) parse_estimator(j.at("estimator"), "estimator", c.estimator);
  if (j.contains("mode")) {
    std::string m;
    read(j, "", "mode", m);
    try {
      c.modes = {parse_mode(m)};
    } catch (const Error& e) {
      fail("mode", e.what());
    }
  }
  if (j.contains("modes")) {
    const json& m = j.at("modes");
    if (!m.is_array() || m.empty()) fail("modes", "expected a non-empty array of mode names");
    c.modes.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const std::string f = "modes[" + std::to_string(i) + "]";
      if (!m[i].is_string()) fail(f, "expected a string");
      try {
        c.modes.push_back(parse_mode(m[i].get<std::string>()));
      } catch (const Error& e) {
        fail(f, e.what());
      }
    }
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    if (!s.is_array() || s.empty()) fail("seeds", "expected a non-empty array of integers");
    c.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number_unsigned()) fail("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
      c.seeds.push_back(s[i].get<std::uint64_t>());
    }
  }
  read(j, "", "threads", c.threads);
  if (j.contains("observability")) {
    const json& o = j.at("observability");
    check_keys(o, "observability", {"samples", "tol_ratio"});
    read(o, "observability", "samples", c.observability_samples);
    read(o, "observability", "tol_ratio", c.observability_tol_ratio);
  }
  c.estimator.noise = c.noise;
  c.estimator.rig = c.rig;
  try {
    c.estimator.validate();
  } catch (const Error& e) {
    fail("estimator", e.what());
  }
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCategory::ConfigParse, e.what());
  }
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_config(text, dir.empty() ? "." : dir);
}

MotionProfile resolve_profile(const ScenarioConfig& cfg) {
  const ProfileConfig& p = cfg.profile;
  if (p.kind != "file") {
    MotionProfile out = p.kind == "general"    ? general_motion_profile(p.length)
                        : p.kind == "straight" ? straight_profile(p.duration, p.speed, p.speed_wobble)
                                               : circle_profile(p.duration, p.speed, p.omega);
    if (p.manifold) out.manifold.m = *p.manifold;
    return out;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(p.file));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCategory::ConfigParse, "field 'profile.file': malformed JSON: " + std::string(e.what()));
  } catch (const Error& e) {
    throw Error(ErrorCategory::ConfigParse, "field 'profile.file': " + std::string(e.what()));
  }
  return profile_from_json(j, "profile.file");
}

}  // namespace skidsteer
