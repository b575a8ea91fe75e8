#include "hdvplan/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "hdvplan/envelope.hpp"
#include "hdvplan/errors.hpp"
#include "hdvplan/format.hpp"
#include "hdvplan/io.hpp"
#include "hdvplan/tuning.hpp"
#include "json.hpp"

namespace hdvplan::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::ios_base::failure("failed writing '" + path.string() + "'");
  spdlog::info("wrote {}", path.string());
}

template <class F>
void write_stream(const fs::path& path, F&& body) {
  std::ostringstream ss;
  body(ss);
  write_file(path, ss.str());
}

fs::path prepare_output(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::ios_base::failure("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

std::string resolve(const std::string& base, const std::string& path) {
  if (base.empty() || path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

double number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ParseError("config: '" + key + "' must be a number");
  return v.get<double>();
}

int integer(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ParseError("config: '" + key + "' must be an integer");
  return v.get<int>();
}

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ParseError("config: unknown key '" + key + "' in " + where);
}

const VehicleParams& require_vehicle(const ExperimentConfig& c) {
  if (!c.vehicle) throw ValidationError("no vehicle given (use --vehicle or the 'vehicle' config key)");
  return *c.vehicle;
}

/// Loads the road and brings it onto the planner's grid.
RoadPath load_planning_road(const ExperimentConfig& c, PlanConfig& plan) {
  if (c.road_path.empty()) throw ValidationError("no road given (use --road or the 'road' config key)");
  auto road = load_road_file(c.road_path);
  if (!c.delta_s_set) {
    plan.delta_s = road.delta_s();
  } else if (std::abs(road.delta_s() - plan.delta_s) > 1e-12 * std::max(1.0, plan.delta_s)) {
    spdlog::warn("road spacing {} m differs from delta_s {} m; resampling the road", road.delta_s(),
                 plan.delta_s);
    road = road.resampled(plan.delta_s);
  }
  return road;
}

struct DriveOutputs {
  DriveResult result;
  SweptEnvelope envelope;
  EnvelopeReport report;
};

DriveOutputs drive_and_write(const ExperimentConfig& c, const PlanConfig& plan_in, const fs::path& dir) {
  PlanConfig plan = plan_in;
  const auto& vehicle = require_vehicle(c);
  const auto road = load_planning_road(c, plan);
  plan.validate();
  const auto geometry = reconstruct_global(road);
  DriveOutputs out;
  out.result = receding_horizon_run(geometry, c.start, vehicle, plan, c.kappa_start);
  out.envelope = swept_envelope(*geometry, out.result.trajectory, vehicle, c.outline_spacing);
  out.report = envelope_report(out.envelope, geometry->road(), vehicle, c.margin_m);

  write_stream(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, out.result.trajectory); });
  write_file(dir / "stats.json", drive_stats_json(out.result, plan));
  write_stream(dir / "envelope.csv", [&](std::ostream& o) { write_envelope_csv(o, out.envelope); });
  write_file(dir / "metrics.json", envelope_report_json(out.report));
  if (c.timing) write_file(dir / "timing.json", timing_json(out.result, plan));
  if (c.svg)
    write_stream(dir / "plot.svg",
                 [&](std::ostream& o) { write_svg(o, *geometry, &out.result.trajectory, &out.envelope); });
  return out;
}

void print_summary_header() {
  std::printf("%-10s %-5s %8s %14s %14s %10s %12s\n", "run", "mode", "windows", "mean_solve_s", "max_solve_s",
              "qp/window", "imbalance_m");
}

void print_summary(const std::string& label, const DriveOutputs& d, const PlanConfig& plan) {
  long qp = 0;
  for (const auto& w : d.result.windows) qp += w.stats.sqp_iters;
  const double per = d.result.windows.empty() ? 0.0 : static_cast<double>(qp) / d.result.windows.size();
  const double imbalance = d.report.has_interior ? d.report.interior_imbalance : d.report.imbalance;
  std::printf("%-10s %-5s %8zu %14.6f %14.6f %10.2f %12.4f\n", label.c_str(), to_string(plan.mode),
              d.result.windows.size(), d.result.mean_solve_s(), d.result.max_solve_s(), per, imbalance);
}

int drive_exit_code(const DriveResult& r, const PlanConfig& plan) {
  if (plan.mode == PlanMode::sqp && !r.all_converged()) {
    spdlog::warn("{} planning window(s) did not converge; results were written",
                 std::count_if(r.windows.begin(), r.windows.end(), [](const auto& w) { return !w.stats.converged; }));
    return kNoConvergence;
  }
  return kOk;
}

}  // namespace

namespace {

ExperimentConfig parse_config_doc(const nlohmann::json& doc, const std::string& base_dir);

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config: expected a JSON object");
  try {
    return parse_config_doc(doc, base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

namespace {

ExperimentConfig parse_config_doc(const nlohmann::json& doc, const std::string& base_dir) {
  reject_unknown(doc,
                 {"road", "vehicle", "output_dir", "horizon_m", "delta_s", "execute_m", "omega_kappa", "mode",
                  "objective", "sqp_tol", "sqp_max_iter", "qp", "start", "kappa_start", "start_s", "envelope",
                  "svg", "timing", "radius", "curvature", "trajectory"},
                 "config");
  ExperimentConfig c;
  auto& p = c.plan;
  if (doc.contains("road")) c.road_path = resolve(base_dir, doc["road"].get<std::string>());
  if (doc.contains("trajectory")) c.trajectory_path = resolve(base_dir, doc["trajectory"].get<std::string>());
  if (doc.contains("vehicle")) {
    const auto& v = doc["vehicle"];
    c.vehicle = v.is_string() ? parse_vehicle_json(read_file(resolve(base_dir, v.get<std::string>())))
                              : parse_vehicle_json(v.dump());
  }
  if (doc.contains("output_dir")) c.output_dir = resolve(base_dir, doc["output_dir"].get<std::string>());
  if (doc.contains("horizon_m")) p.horizon_m = number(doc["horizon_m"], "horizon_m");
  if (doc.contains("delta_s")) {
    p.delta_s = number(doc["delta_s"], "delta_s");
    c.delta_s_set = true;
  }
  if (doc.contains("execute_m")) p.execute_m = number(doc["execute_m"], "execute_m");
  if (doc.contains("omega_kappa")) p.omega_kappa = number(doc["omega_kappa"], "omega_kappa");
  if (doc.contains("mode")) p.mode = plan_mode_from_string(doc["mode"].get<std::string>());
  if (doc.contains("objective")) p.objective = objective_from_string(doc["objective"].get<std::string>());
  if (doc.contains("sqp_tol")) p.sqp_tol = number(doc["sqp_tol"], "sqp_tol");
  if (doc.contains("sqp_max_iter")) p.sqp_max_iter = integer(doc["sqp_max_iter"], "sqp_max_iter");
  if (doc.contains("qp")) {
    const auto& q = doc["qp"];
    reject_unknown(q, {"eps_abs", "eps_rel", "max_iter"}, "qp");
    if (q.contains("eps_abs")) p.qp.eps_abs = number(q["eps_abs"], "qp.eps_abs");
    if (q.contains("eps_rel")) p.qp.eps_rel = number(q["eps_rel"], "qp.eps_rel");
    if (q.contains("max_iter")) p.qp.max_iter = integer(q["max_iter"], "qp.max_iter");
  }
  if (doc.contains("start")) {
    const auto& s = doc["start"];
    reject_unknown(s, {"e_y", "e_psi", "beta1"}, "start");
    if (s.contains("e_y")) c.start.e_y = number(s["e_y"], "start.e_y");
    if (s.contains("e_psi")) c.start.e_psi = number(s["e_psi"], "start.e_psi");
    if (s.contains("beta1")) c.start.beta1 = number(s["beta1"], "start.beta1");
  }
  if (doc.contains("kappa_start")) c.kappa_start = number(doc["kappa_start"], "kappa_start");
  if (doc.contains("start_s")) c.start_s = number(doc["start_s"], "start_s");
  if (doc.contains("envelope")) {
    const auto& e = doc["envelope"];
    reject_unknown(e, {"spacing", "margin_m"}, "envelope");
    if (e.contains("spacing")) c.outline_spacing = number(e["spacing"], "envelope.spacing");
    if (e.contains("margin_m")) c.margin_m = number(e["margin_m"], "envelope.margin_m");
  }
  if (doc.contains("svg")) c.svg = doc["svg"].get<bool>();
  if (doc.contains("timing")) c.timing = doc["timing"].get<bool>();
  if (doc.contains("radius")) c.radius = number(doc["radius"], "radius");
  if (doc.contains("curvature")) c.curvature = number(doc["curvature"], "curvature");
  return c;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_file(path), fs::path(path).parent_path().string());
}

int cmd_tune(const ExperimentConfig& c) {
  const auto& vehicle = require_vehicle(c);
  const auto dir = prepare_output(c.output_dir);
  if (!c.road_path.empty() && !c.radius && !c.curvature) {
    const auto road = load_road_file(c.road_path);
    const auto schedule = k_schedule(road, vehicle);
    write_stream(dir / "k_schedule.csv", [&](std::ostream& o) { write_k_schedule_csv(o, road, schedule); });
    return kOk;
  }
  double kappa = 0.0;
  if (c.radius) {
    if (*c.radius == 0.0) throw ValidationError("radius must be nonzero");
    kappa = 1.0 / *c.radius;
  } else if (c.curvature) {
    kappa = *c.curvature;
  } else {
    throw ValidationError("tune needs --radius, --curvature or --road");
  }
  std::string doc;
  if (std::abs(kappa) < kStraightCurvature) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(kind_of(vehicle));
    j["straight"] = true;
    j["curvature"] = kappa;
    j["K"] = kDefaultK;
    j["note"] = "curvature below the straight-road threshold; default weight used";
    doc = j.dump(2) + "\n";
  } else {
    doc = geometric_solution_json(optimal_K(1.0 / kappa, vehicle));
  }
  write_file(dir / "tune.json", doc);
  std::cout << doc;
  return kOk;
}

int cmd_plan(const ExperimentConfig& c) {
  const auto& vehicle = require_vehicle(c);
  PlanConfig plan = c.plan;
  const auto road = load_planning_road(c, plan);
  plan.validate();
  const auto dir = prepare_output(c.output_dir);
  const auto geometry = reconstruct_global(road);
  const auto start = static_cast<std::size_t>(std::llround(c.start_s / road.delta_s()));
  const auto N = plan.horizon_steps();
  if (start + N > road.segments()) throw ValidationError("plan window runs past the end of the road");
  const auto schedule = k_schedule(road, vehicle);
  const double kmax = tractor_of(vehicle).kappa_max;
  const double k0 = c.kappa_start.value_or(std::clamp(road[start].kappa_gamma, -kmax, kmax));
  const auto problem = make_problem(geometry, start, N, c.start, k0, schedule, vehicle, plan.objective);
  const auto result = hdvplan::plan(problem, plan);
  auto traj = simulate(*geometry, start, problem.z_start, result.kappa, vehicle);
  write_stream(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, traj); });
  write_file(dir / "stats.json", plan_stats_json(result, plan));
  if (c.svg) write_stream(dir / "plot.svg", [&](std::ostream& o) { write_svg(o, *geometry, &traj, nullptr); });
  std::printf("objective %.6g  sqp_iters %d  qp_iters %d  converged %s  solve_s %.6f\n", result.objective,
              result.stats.sqp_iters, result.stats.qp_iters, result.stats.converged ? "yes" : "no",
              result.stats.solve_time_s);
  return plan.mode == PlanMode::sqp && !result.stats.converged ? kNoConvergence : kOk;
}

int cmd_drive(const ExperimentConfig& c) {
  const auto dir = prepare_output(c.output_dir);
  const auto d = drive_and_write(c, c.plan, dir);
  print_summary_header();
  print_summary("drive", d, c.plan);
  return drive_exit_code(d.result, c.plan);
}

int cmd_envelope(const ExperimentConfig& c) {
  const auto& vehicle = require_vehicle(c);
  if (c.trajectory_path.empty()) throw ValidationError("envelope needs --trajectory");
  if (c.road_path.empty()) throw ValidationError("envelope needs --road");
  const auto road = load_road_file(c.road_path);
  std::ifstream in(c.trajectory_path);
  if (!in) throw std::ios_base::failure("cannot open trajectory file '" + c.trajectory_path + "'");
  auto traj = read_trajectory_csv(in);
  if (traj.kind != kind_of(vehicle)) throw ValidationError("trajectory and vehicle kinds differ");
  const auto geometry = reconstruct_global(road);
  const auto dir = prepare_output(c.output_dir);
  const auto env = swept_envelope(*geometry, traj, vehicle, c.outline_spacing);
  const auto report = envelope_report(env, road, vehicle, c.margin_m);
  write_stream(dir / "envelope.csv", [&](std::ostream& o) { write_envelope_csv(o, env); });
  write_file(dir / "metrics.json", envelope_report_json(report));
  if (c.svg) write_stream(dir / "plot.svg", [&](std::ostream& o) { write_svg(o, *geometry, &traj, &env); });
  std::cout << envelope_report_json(report);
  return kOk;
}

int cmd_compare(const ExperimentConfig& c) {
  const auto dir = prepare_output(c.output_dir);
  PlanConfig tuned = c.plan;
  tuned.objective = ObjectiveKind::tuned;
  PlanConfig baseline = c.plan;
  baseline.objective = ObjectiveKind::rear_axle;
  const auto t = drive_and_write(c, tuned, prepare_output((dir / "tuned").string()));
  const auto b = drive_and_write(c, baseline, prepare_output((dir / "baseline").string()));
  auto pick = [](const EnvelopeReport& r) { return r.has_interior ? r.interior_imbalance : r.imbalance; };
  nlohmann::ordered_json doc;
  doc["tuned"] = {{"imbalance", pick(t.report)},
                  {"max_left_width", t.report.max_left_width},
                  {"max_right_width", t.report.max_right_width}};
  doc["baseline"] = {{"imbalance", pick(b.report)},
                     {"max_left_width", b.report.max_left_width},
                     {"max_right_width", b.report.max_right_width}};
  doc["imbalance_delta"] = pick(b.report) - pick(t.report);
  doc["steady_interior"] = t.report.has_interior && b.report.has_interior;
  write_file(dir / "compare.json", doc.dump(2) + "\n");
  print_summary_header();
  print_summary("tuned", t, tuned);
  print_summary("baseline", b, baseline);
  std::printf("imbalance delta (baseline - tuned): %.4f m\n", pick(b.report) - pick(t.report));
  const int te = drive_exit_code(t.result, tuned);
  return te != kOk ? te : drive_exit_code(b.result, baseline);
}

int report_exception() {
  try {
    throw;
  } catch (const GeometryInfeasible& e) {
    spdlog::error("infeasible geometry: {}", e.what());
    return kInfeasibleGeometry;
  } catch (const NoConvergence& e) {
    spdlog::error("no convergence: {}", e.what());
    return kNoConvergence;
  } catch (const ParseError& e) {
    spdlog::error("parse error: {}", e.what());
    return kInputError;
  } catch (const ValidationError& e) {
    spdlog::error("invalid input: {}", e.what());
    return kInputError;
  } catch (const OutOfRange& e) {
    spdlog::error("out of range: {}", e.what());
    return kInputError;
  } catch (const std::ios_base::failure& e) {
    spdlog::error("I/O error: {}", e.what());
    return kInputError;
  } catch (const Error& e) {
    spdlog::error("solver error: {}", e.what());
    return kSolverError;
  } catch (const std::exception& e) {
    spdlog::error("error: {}", e.what());
    return kSolverError;
  }
}

int main(int argc, char** argv) {
  // Logs go to stderr; stdout carries results.
  if (!spdlog::get("hdvplan")) spdlog::set_default_logger(spdlog::stderr_color_mt("hdvplan"));
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  spdlog::cfg::load_env_levels();  // SPDLOG_LEVEL=info|debug|...

  CLI::App app{"Swept-area balanced path planning for buses and tractor-trailers"};
  app.require_subcommand(1);

  std::string config_path;
  ExperimentConfig flags;
  std::string vehicle_path, mode, objective;
  std::optional<double> horizon, delta_s, execute, omega, margin, spacing, e_y, e_psi, beta1, kappa_start, start_s;
  std::optional<std::string> road, out, trajectory;
  std::optional<double> radius, curvature;
  bool svg = false, timing = false;

  auto common = [&](CLI::App* sub, bool planning) {
    sub->add_option("-c,--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--road", road, "road file (.csv or .json)");
    sub->add_option("--vehicle", vehicle_path, "vehicle JSON file");
    sub->add_option("-o,--out", out, "output directory");
    if (planning) {
      sub->add_option("--mode", mode, "sqp or rti");
      sub->add_option("--objective", objective, "tuned or rear_axle");
      sub->add_option("--horizon", horizon, "planning horizon [m]");
      sub->add_option("--delta-s", delta_s, "grid spacing [m]");
      sub->add_option("--execute", execute, "executed distance per replan [m]");
      sub->add_option("--omega", omega, "curvature smoothness weight");
      sub->add_option("--e-y", e_y, "initial lateral error [m]");
      sub->add_option("--e-psi", e_psi, "initial heading error [rad]");
      sub->add_option("--beta1", beta1, "initial joint angle [rad]");
      sub->add_option("--kappa-start", kappa_start, "curvature before the first step [1/m]");
    }
  };
  auto* tune = app.add_subcommand("tune", "balanced turning geometry and weight K");
  common(tune, false);
  tune->add_option("--radius", radius, "signed road radius [m]");
  tune->add_option("--curvature", curvature, "signed road curvature [1/m]");

  auto* plan = app.add_subcommand("plan", "one plan over the first horizon");
  common(plan, true);
  plan->add_option("--start-s", start_s, "arc length of the plan start [m]");
  plan->add_flag("--svg", svg, "also write plot.svg");

  auto* drive = app.add_subcommand("drive", "receding-horizon drive plus envelope");
  common(drive, true);
  drive->add_flag("--svg", svg, "also write plot.svg");
  drive->add_flag("--timing", timing, "also write timing.json (wall-clock, not reproducible)");
  drive->add_option("--margin", margin, "transient margin excluded from steady widths [m]");
  drive->add_option("--spacing", spacing, "outline sampling spacing [m]");

  auto* envelope = app.add_subcommand("envelope", "swept envelope of a trajectory CSV");
  common(envelope, false);
  envelope->add_option("--trajectory", trajectory, "trajectory CSV");
  envelope->add_flag("--svg", svg, "also write plot.svg");
  envelope->add_option("--margin", margin, "transient margin [m]");
  envelope->add_option("--spacing", spacing, "outline sampling spacing [m]");

  auto* compare = app.add_subcommand("compare", "tuned objective against the rear-axle baseline");
  common(compare, true);
  compare->add_flag("--svg", svg, "also write plot.svg");
  compare->add_flag("--timing", timing, "also write timing.json");
  compare->add_option("--margin", margin, "transient margin [m]");
  compare->add_option("--spacing", spacing, "outline sampling spacing [m]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (road) c.road_path = *road;
    if (!vehicle_path.empty()) c.vehicle = parse_vehicle_json(read_file(vehicle_path));
    if (out) c.output_dir = *out;
    if (!mode.empty()) c.plan.mode = plan_mode_from_string(mode);
    if (!objective.empty()) c.plan.objective = objective_from_string(objective);
    if (horizon) c.plan.horizon_m = *horizon;
    if (delta_s) {
      c.plan.delta_s = *delta_s;
      c.delta_s_set = true;
    }
    if (execute) c.plan.execute_m = *execute;
    if (omega) c.plan.omega_kappa = *omega;
    if (e_y) c.start.e_y = *e_y;
    if (e_psi) c.start.e_psi = *e_psi;
    if (beta1) c.start.beta1 = *beta1;
    if (kappa_start) c.kappa_start = *kappa_start;
    if (start_s) c.start_s = *start_s;
    if (margin) c.margin_m = *margin;
    if (spacing) c.outline_spacing = *spacing;
    if (trajectory) c.trajectory_path = *trajectory;
    if (radius) c.radius = *radius;
    if (curvature) c.curvature = *curvature;
    if (svg) c.svg = true;
    if (timing) c.timing = true;

    if (tune->parsed()) return cmd_tune(c);
    if (plan->parsed()) return cmd_plan(c);
    if (drive->parsed()) return cmd_drive(c);
    if (envelope->parsed()) return cmd_envelope(c);
    return cmd_compare(c);
  } catch (...) {
    return report_exception();
  }
}

}  // namespace hdvplan::cli
