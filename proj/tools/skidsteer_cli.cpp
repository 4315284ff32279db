#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skidsteer/config.hpp"
#include "skidsteer/errors.hpp"
#include "skidsteer/log_io.hpp"
#include "skidsteer/observability.hpp"
#include "skidsteer/scenario.hpp"

using namespace skidsteer;
using ojson = nlohmann::ordered_json;

namespace {

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    write_text_file(path, text);
  }
}

ojson vec_json(const VecX& v) {
  ojson a = ojson::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ojson report_json(const ObservabilityReport& r, const ParamSet& ps) {
  ojson j;
  j["variant"] = r.variant;
  j["columns"] = ps.column_names();
  j["rows"] = r.matrix.rows();
  j["rank"] = r.rank;
  j["nullity"] = r.nullity();
  j["singular_values"] = vec_json(r.singular_values);
  ojson basis = ojson::array();
  for (int c = 0; c < r.nullspace_basis.cols(); ++c) basis.push_back(vec_json(r.nullspace_basis.col(c)));
  j["nullspace_basis"] = basis;
  ojson matched = ojson::array();
  for (const auto& m : r.matched_null_directions) {
    matched.push_back({{"label", m.label}, {"angle_deg", m.angle_deg}, {"matched", m.matched}});
  }
  j["matched_null_directions"] = matched;
  ojson deg = ojson::array();
  for (Degeneracy d : r.degeneracy) deg.push_back(degeneracy_name(d));
  j["degeneracy"] = deg;
  ojson flags = ojson::array();
  for (Degeneracy d : r.motion_flags) flags.push_back(degeneracy_name(d));
  j["motion_flags"] = flags;
  return j;
}

int cmd_simulate(const std::string& config, std::uint64_t seed, bool seed_set,
                 const std::string& out) {
  const ScenarioConfig cfg = load_config(config);
  const std::uint64_t s = seed_set ? seed : cfg.seeds.front();
  const SimulatedScenario sim = simulate_scenario(cfg, s);
  emit(out, format_log(sim.log));
  return 0;
}

int cmd_estimate(const std::string& log_path, const std::string& config, const std::string& mode,
                 std::uint64_t seed, bool seed_set, const std::string& out,
                 const std::string& csv) {
  const ScenarioConfig cfg = load_config(config);
  const MeasurementLog log = read_log_file(log_path);
  const EstimatorMode m = mode.empty() ? cfg.modes.front() : parse_mode(mode);
  const std::uint64_t s = seed_set ? seed : log.header.seed;
  const RunResult r = run_estimator(log, cfg, m, initial_xi(cfg, log, s), s);
  emit(out, run_result_json(r));
  if (!csv.empty()) write_text_file(csv, keyframes_csv(r));
  if (r.failed) {
    std::cerr << "error[" << r.error_category << "]: " << r.error_message << "\n";
    return exit_code(ErrorCategory::SolverDiverged);
  }
  return 0;
}

int cmd_observability(const std::vector<std::string>& configs, const std::string& out) {
  ojson all = ojson::array();
  for (const std::string& path : configs) {
    const ScenarioConfig cfg = load_config(path);
    const MotionProfile profile = resolve_profile(cfg);
    const Trajectory traj = generate_trajectory(profile, XiSchedule(cfg.xi_true), cfg.sim_dt);
    ojson entry;
    entry["config"] = cfg.name;
    entry["profile"] = cfg.profile.kind;
    ojson reports = ojson::array();
    for (ObsVariant v : all_variants()) {
      const bool imu = v != ObsVariant::Mono5 && v != ObsVariant::Mono3;
      const InferredMotion motion =
          infer_motion(traj, cfg.xi_true, cfg.rig, imu, 1.0, cfg.observability_samples);
      ParamSet ps;
      ps.variant = v;
      ps.xi = cfg.xi_true;
      ps.scale = motion.scale;
      ps.extrinsics_OC = cfg.rig.extrinsics_OC;
      reports.push_back(report_json(observability_report(motion, ps, cfg.observability_tol_ratio), ps));
    }
    entry["reports"] = reports;
    all.push_back(entry);
  }
  emit(out, all.dump(2) + "\n");
  return 0;
}

int cmd_montecarlo(const std::string& config, int runs, int threads, const std::string& out) {
  if (runs < 1) throw Error(ErrorCategory::InvalidArgument, "--runs must be >= 1");
  const ScenarioConfig cfg = load_config(config);
  const MonteCarloResult mc = run_monte_carlo(cfg, runs, threads >= 0 ? threads : cfg.threads);
  emit(out, monte_carlo_json(mc));
  for (const auto& f : mc.failures) std::cerr << "failed run " << f << "\n";
  if (!mc.failures.empty() && mc.failures.size() == mc.runs.size()) {
    return exit_code(ErrorCategory::SolverDiverged);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skid-steer visual-inertial-odometer estimation tools"};
  app.require_subcommand(1);

  std::string config, out, log_path, mode, csv;
  std::vector<std::string> configs;
  std::uint64_t seed = 0;
  int runs = 15, threads = -1;

  auto* sim = app.add_subcommand("simulate", "write a synthetic measurement log");
  sim->add_option("-c,--config", config, "scenario config")->required();
  auto* sim_seed = sim->add_option("-s,--seed", seed, "seed (default: first seed in config)");
  sim->add_option("-o,--out", out, "output log path (default stdout)");

  auto* est = app.add_subcommand("estimate", "run the estimator over a log");
  est->add_option("-l,--log", log_path, "measurement log")->required();
  est->add_option("-c,--config", config, "scenario config")->required();
  est->add_option("-m,--mode", mode, "vio_xi5 | vo_icr3 | vio_fixed_xi | vio_icr3");
  auto* est_seed = est->add_option("-s,--seed", seed, "seed for the initial guess (default: log seed)");
  est->add_option("-o,--out", out, "result JSON path (default stdout)");
  est->add_option("--csv", csv, "per-keyframe CSV path");

  auto* obs = app.add_subcommand("observability", "observability reports for each variant");
  obs->add_option("-c,--config", configs, "scenario config, repeatable")->required();
  obs->add_option("-o,--out", out, "report path (default stdout)");

  auto* mc = app.add_subcommand("montecarlo", "independent runs over seeds and modes");
  mc->add_option("-c,--config", config, "scenario config")->required();
  mc->add_option("-n,--runs", runs, "number of seeds (taken from config seeds, then counting up)");
  mc->add_option("-j,--threads", threads, "worker threads (default: config)");
  mc->add_option("-o,--out", out, "aggregate JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sim) return cmd_simulate(config, seed, sim_seed->count() > 0, out);
    if (*est) return cmd_estimate(log_path, config, mode, seed, est_seed->count() > 0, out, csv);
    if (*obs) return cmd_observability(configs, out);
    if (*mc) return cmd_montecarlo(config, runs, threads, out);
  } catch (const Error& e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
