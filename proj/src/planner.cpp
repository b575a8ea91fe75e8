#include "hdvplan/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include <spdlog/spdlog.h>

#include "hdvplan/errors.hpp"

namespace hdvplan {

namespace {

std::size_t checked_steps(double length, double delta_s, const char* what) {
  const double ratio = length / delta_s;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw ValidationError(std::string("PlanConfig: ") + what + " must be a positive multiple of delta_s");
  return static_cast<std::size_t>(rounded);
}

double lateral_weight(ObjectiveKind objective, double K) { return objective == ObjectiveKind::tuned ? K : 1.0; }
double aux_weight(ObjectiveKind objective) { return objective == ObjectiveKind::tuned ? 1.0 : 0.0; }

std::vector<double> initial_controls(const PlanProblem& problem) {
  const auto& road = problem.geometry->road();
  const double kmax = tractor_of(problem.params).kappa_max;
  std::vector<double> kappa(problem.steps);
  for (std::size_t i = 0; i < problem.steps; ++i)
    kappa[i] = std::clamp(road[problem.start_index + i].kappa_gamma, -kmax, kmax);
  return kappa;
}

struct Iterate {
  std::vector<double> kappa;
  std::vector<VehicleState> states;
  double objective = std::numeric_limits<double>::infinity();
};

std::optional<Iterate> rollout(const PlanProblem& problem, double omega_kappa, std::vector<double> kappa) {
  clamp_controls(kappa, problem.kappa_start, tractor_of(problem.params), problem.geometry->road().delta_s());
  try {
    auto traj = simulate(*problem.geometry, problem.start_index, problem.z_start, kappa, problem.params);
    Iterate it;
    it.objective = objective_eval(traj.states, kappa, problem.K, omega_kappa, problem.objective);
    it.kappa = std::move(kappa);
    it.states = std::move(traj.states);
    return it;
  } catch (const DomainError& e) {
    spdlog::debug("rollout rejected: {}", e.what());
    return std::nullopt;
  }
}

Eigen::VectorXd pack(const QpLayout& layout, VehicleKind kind, const Iterate& it) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(layout.num_variables()));
  for (std::size_t i = 0; i <= layout.steps; ++i)
    x.segment(static_cast<Eigen::Index>(layout.state(i, 0)), static_cast<Eigen::Index>(layout.state_dim)) =
        to_vector(it.states[i], kind);
  for (std::size_t i = 0; i < layout.steps; ++i) x[static_cast<Eigen::Index>(layout.control(i))] = it.kappa[i];
  return x;
}

std::vector<double> controls_of(const QpLayout& layout, const Eigen::VectorXd& x) {
  std::vector<double> kappa(layout.steps);
  for (std::size_t i = 0; i < layout.steps; ++i) kappa[i] = x[static_cast<Eigen::Index>(layout.control(i))];
  return kappa;
}

HorizonLinearization linearize_range(const PlanProblem& problem, std::span<const VehicleState> states,
                                     std::span<const double> kappa, bool parallel) {
  const auto& road = problem.geometry->road();
  const auto N = static_cast<std::ptrdiff_t>(problem.steps);
  HorizonLinearization lin;
  lin.dynamics.resize(problem.steps);
  lin.aux.resize(problem.steps + 1);
  auto stage = [&](std::ptrdiff_t i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto r = problem.start_index + idx;
    if (i < N)
      lin.dynamics[idx] = linearize_dynamics(states[idx], kappa[idx], road[r].kappa_gamma, road.delta_s(),
                                             problem.params);
    lin.aux[idx] = linearize_aux(*problem.geometry, road.s(r), states[idx], problem.params);
  };
  if (parallel) {
    // Projection errors must not escape an OpenMP region; keep the first one.
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i <= N; ++i) {
      try {
        stage(i);
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::ptrdiff_t i = 0; i <= N; ++i) stage(i);
  }
  return lin;
}

PlanResult finish(const PlanProblem& problem, Iterate it, PlanStats stats,
                  std::chrono::steady_clock::time_point t0) {
  PlanResult out;
  stats.constraint_violation = constraint_violation(problem, it.states, it.kappa);
  stats.solve_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.kappa = std::move(it.kappa);
  out.states = std::move(it.states);
  out.objective = it.objective;
  out.stats = stats;
  return out;
}

Iterate start_iterate(const PlanProblem& problem, const PlanConfig& config,
                      std::optional<std::span<const double>> warm_kappa) {
  std::vector<double> kappa;
  if (warm_kappa && warm_kappa->size() == problem.steps)
    kappa.assign(warm_kappa->begin(), warm_kappa->end());
  else
    kappa = initial_controls(problem);
  auto it = rollout(problem, config.omega_kappa, kappa);
  if (!it && warm_kappa) it = rollout(problem, config.omega_kappa, initial_controls(problem));
  if (!it) throw DomainError("planner: initial rollout leaves the model domain");
  return *it;
}

struct QpStep {
  std::vector<double> kappa;
  double step_norm = 0.0;
  int iterations = 0;
  bool solved = false;
  Eigen::VectorXd y;
};

QpStep qp_step(const PlanProblem& problem, const PlanConfig& config, const Iterate& it,
               const Eigen::VectorXd& dual) {
  const QpLayout layout{problem.steps, state_dim(problem.kind())};
  const auto qp = build_qp(problem, config.omega_kappa, it.states, it.kappa);
  QpWarmStart warm{pack(layout, problem.kind(), it), dual};
  const auto sol = solve_qp(qp, config.qp, &warm);
  spdlog::debug("qp: {} after {} iterations, residuals {} / {}", to_string(sol.status), sol.iterations,
                sol.residuals.primal, sol.residuals.dual);
  if (sol.status == QpStatus::primal_infeasible)
    throw InfeasibleDetected("planner: QP subproblem is primal infeasible (corridor too narrow?)");
  if (sol.status == QpStatus::dual_infeasible) throw InfeasibleDetected("planner: QP subproblem is unbounded");
  QpStep out;
  out.kappa = controls_of(layout, sol.x);
  out.step_norm = (sol.x - warm.x).lpNorm<Eigen::Infinity>();
  out.iterations = sol.iterations;
  out.solved = sol.status == QpStatus::solved;
  out.y = sol.y;
  return out;
}

std::vector<double> blend(const std::vector<double>& from, const std::vector<double>& to, double alpha) {
  std::vector<double> out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) out[i] = from[i] + alpha * (to[i] - from[i]);
  return out;
}

}  // namespace

const char* to_string(PlanMode mode) { return mode == PlanMode::sqp ? "sqp" : "rti"; }
const char* to_string(ObjectiveKind objective) {
  return objective == ObjectiveKind::tuned ? "tuned" : "rear_axle";
}

PlanMode plan_mode_from_string(const std::string& name) {
  if (name == "sqp") return PlanMode::sqp;
  if (name == "rti") return PlanMode::rti;
  throw ValidationError("unknown mode '" + name + "' (expected sqp or rti)");
}

ObjectiveKind objective_from_string(const std::string& name) {
  if (name == "tuned") return ObjectiveKind::tuned;
  if (name == "rear_axle") return ObjectiveKind::rear_axle;
  throw ValidationError("unknown objective '" + name + "' (expected tuned or rear_axle)");
}

void PlanConfig::validate() const {
  if (!(delta_s > 0.0) || !std::isfinite(delta_s)) throw ValidationError("PlanConfig: delta_s must be > 0");
  if (!(omega_kappa > 0.0)) throw ValidationError("PlanConfig: omega_kappa must be > 0");
  if (!(execute_m <= horizon_m)) throw ValidationError("PlanConfig: execute_m must not exceed horizon_m");
  if (!(sqp_tol > 0.0) || sqp_max_iter < 1) throw ValidationError("PlanConfig: bad SQP settings");
  if (!(qp.eps_abs >= 0.0) || !(qp.eps_rel >= 0.0) || qp.max_iter < 1)
    throw ValidationError("PlanConfig: bad QP settings");
  horizon_steps();
  execute_steps();
}

std::size_t PlanConfig::horizon_steps() const { return checked_steps(horizon_m, delta_s, "horizon_m"); }
std::size_t PlanConfig::execute_steps() const { return checked_steps(execute_m, delta_s, "execute_m"); }

Corridor make_corridor(const RoadPath& road, std::size_t start_index, std::size_t steps,
                       const VehicleParams& params) {
  if (start_index + steps > road.segments()) throw OutOfRange("corridor window runs past the road");
  const double half = 0.5 * tractor_of(params).W;
  const double aux_half =
      kind_of(params) == VehicleKind::bus ? half : 0.5 * std::get<TractorTrailerParams>(params).W_trailer;
  Corridor c;
  for (std::size_t i = 0; i <= steps; ++i) {
    const auto& sample = road[start_index + i];
    c.e_y_lower.push_back(-sample.w_right + half);
    c.e_y_upper.push_back(sample.w_left - half);
    c.aux_lower.push_back(-sample.w_right + aux_half);
    c.aux_upper.push_back(sample.w_left - aux_half);
  }
  return c;
}

void PlanProblem::validate() const {
  if (!geometry) throw ValidationError("PlanProblem: missing road geometry");
  if (steps < 1) throw ValidationError("PlanProblem: horizon must have at least one step");
  if (start_index + steps > geometry->road().segments()) throw OutOfRange("PlanProblem: window runs past the road");
  hdvplan::validate(params);
  const auto n = steps + 1;
  if (K.size() != n || corridor.e_y_lower.size() != n || corridor.e_y_upper.size() != n ||
      corridor.aux_lower.size() != n || corridor.aux_upper.size() != n)
    throw ValidationError("PlanProblem: slices must have N + 1 entries");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(corridor.e_y_lower[i] < corridor.e_y_upper[i]) || !(corridor.aux_lower[i] < corridor.aux_upper[i]))
      throw ValidationError("PlanProblem: corridor is empty (lane narrower than the vehicle)", i);
  }
  if (std::abs(kappa_start) > tractor_of(params).kappa_max + 1e-12)
    throw ValidationError("PlanProblem: |kappa_start| exceeds kappa_max");
}

PlanProblem make_problem(std::shared_ptr<const RoadGeometry> geometry, std::size_t start_index,
                         std::size_t steps, const VehicleState& z_start, double kappa_start,
                         const KSchedule& schedule, const VehicleParams& params, ObjectiveKind objective) {
  PlanProblem p;
  const auto& road = geometry->road();
  if (start_index + steps > road.segments()) throw OutOfRange("plan window runs past the road");
  if (schedule.values.size() != road.size()) throw ValidationError("K schedule does not match the road");
  p.corridor = make_corridor(road, start_index, steps, params);
  p.K.assign(schedule.values.begin() + static_cast<std::ptrdiff_t>(start_index),
             schedule.values.begin() + static_cast<std::ptrdiff_t>(start_index + steps + 1));
  p.geometry = std::move(geometry);
  p.start_index = start_index;
  p.steps = steps;
  p.z_start = z_start;
  p.z_start.e_y_aux = aux_error(*p.geometry, road.s(start_index), z_start, params);
  p.kappa_start = kappa_start;
  p.params = params;
  p.objective = objective;
  p.validate();
  return p;
}

double objective_eval(std::span<const VehicleState> states, std::span<const double> kappa,
                      std::span<const double> K, double omega_kappa, ObjectiveKind objective) {
  double smooth = 0.0;
  for (std::size_t i = 1; i < kappa.size(); ++i) {
    const double d = kappa[i] - kappa[i - 1];
    smooth += d * d;
  }
  double lateral = 0.0;
  for (std::size_t i = 1; i < states.size(); ++i) {
    const double r = lateral_weight(objective, K[i]) * states[i].e_y + aux_weight(objective) * states[i].e_y_aux;
    lateral += r * r;
  }
  return omega_kappa * smooth + lateral;
}

HorizonLinearization linearize_horizon(const PlanProblem& problem, std::span<const VehicleState> states,
                                       std::span<const double> kappa) {
  return linearize_range(problem, states, kappa, true);
}

HorizonLinearization linearize_horizon_serial(const PlanProblem& problem,
                                              std::span<const VehicleState> states,
                                              std::span<const double> kappa) {
  return linearize_range(problem, states, kappa, false);
}

QpProblem build_qp(const PlanProblem& problem, double omega_kappa, std::span<const VehicleState> states,
                   std::span<const double> kappa) {
  return build_qp(problem, omega_kappa, linearize_horizon(problem, states, kappa), states, kappa);
}

QpProblem build_qp(const PlanProblem& problem, double omega_kappa, const HorizonLinearization& lin,
                   std::span<const VehicleState> states, std::span<const double> kappa) {
  const auto kind = problem.kind();
  const std::size_t N = problem.steps;
  const std::size_t d = state_dim(kind);
  const std::size_t core = core_dim(kind);
  const std::size_t aux = d - 1;
  const QpLayout layout{N, d};
  const auto nx = layout.num_variables();
  if (states.size() != N + 1 || kappa.size() != N) throw ValidationError("build_qp: iterate has the wrong length");
  const auto& tractor = tractor_of(problem.params);
  const double rate = tractor.kappa_rate_max * problem.geometry->road().delta_s();

  // Cost: P = 2 (omega D'D + sum g g'), q = 0.
  std::vector<Eigen::Triplet<double>> pt;
  auto add_outer = [&](const std::vector<std::pair<std::size_t, double>>& g, double w) {
    for (const auto& [a, va] : g)
      for (const auto& [b, vb] : g)
        pt.emplace_back(static_cast<int>(a), static_cast<int>(b), 2.0 * w * va * vb);
  };
  for (std::size_t i = 1; i < N; ++i) add_outer({{layout.control(i), 1.0}, {layout.control(i - 1), -1.0}}, omega_kappa);
  for (std::size_t i = 1; i <= N; ++i) {
    std::vector<std::pair<std::size_t, double>> g{{layout.state(i, 0), lateral_weight(problem.objective, problem.K[i])}};
    if (problem.objective == ObjectiveKind::tuned) g.emplace_back(layout.state(i, aux), 1.0);
    add_outer(g, 1.0);
  }

  std::vector<Eigen::Triplet<double>> at;
  std::vector<double> lo, hi;
  auto row = [&](std::initializer_list<std::pair<std::size_t, double>> entries, double l, double u) {
    const int r = static_cast<int>(lo.size());
    for (const auto& [col, v] : entries)
      if (v != 0.0) at.emplace_back(r, static_cast<int>(col), v);
    lo.push_back(l);
    hi.push_back(u);
  };

  const Eigen::VectorXd z0 = to_vector(problem.z_start, kind);
  for (std::size_t j = 0; j < d; ++j) row({{layout.state(0, j), 1.0}}, z0[static_cast<Eigen::Index>(j)], z0[static_cast<Eigen::Index>(j)]);

  for (std::size_t i = 0; i < N; ++i) {
    const auto& L = lin.dynamics[i];
    if (!L.A.allFinite() || !L.B.allFinite() || !L.c.allFinite())
      throw LinearizationFailed("dynamics model is not finite", i);
    for (std::size_t r = 0; r < core; ++r) {
      const int rr = static_cast<int>(lo.size());
      at.emplace_back(rr, static_cast<int>(layout.state(i + 1, r)), 1.0);
      for (std::size_t c = 0; c < core; ++c) {
        const double v = L.A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        if (v != 0.0) at.emplace_back(rr, static_cast<int>(layout.state(i, c)), -v);
      }
      const double b = L.B[static_cast<Eigen::Index>(r)];
      if (b != 0.0) at.emplace_back(rr, static_cast<int>(layout.control(i)), -b);
      lo.push_back(L.c[static_cast<Eigen::Index>(r)]);
      hi.push_back(L.c[static_cast<Eigen::Index>(r)]);
    }
  }

  for (std::size_t i = 1; i <= N; ++i) {
    const auto& m = lin.aux[i];
    const double db = m.d_dbeta1.value_or(0.0);
    if (!std::isfinite(m.base) || !std::isfinite(m.d_dey) || !std::isfinite(m.d_depsi) || !std::isfinite(db))
      throw LinearizationFailed("aux error model is not finite", i);
    const auto& z = states[i];
    const double rhs = m.base - m.d_dey * z.e_y - m.d_depsi * z.e_psi - db * z.beta1;
    if (kind == VehicleKind::bus)
      row({{layout.state(i, aux), 1.0}, {layout.state(i, 0), -m.d_dey}, {layout.state(i, 1), -m.d_depsi}}, rhs, rhs);
    else
      row({{layout.state(i, aux), 1.0},
           {layout.state(i, 0), -m.d_dey},
           {layout.state(i, 1), -m.d_depsi},
           {layout.state(i, 2), -db}},
          rhs, rhs);
  }

  for (std::size_t i = 1; i <= N; ++i) {
    row({{layout.state(i, 0), 1.0}}, problem.corridor.e_y_lower[i], problem.corridor.e_y_upper[i]);
    row({{layout.state(i, aux), 1.0}}, problem.corridor.aux_lower[i], problem.corridor.aux_upper[i]);
  }
  for (std::size_t i = 0; i < N; ++i) row({{layout.control(i), 1.0}}, -tractor.kappa_max, tractor.kappa_max);
  row({{layout.control(0), 1.0}}, problem.kappa_start - rate, problem.kappa_start + rate);
  for (std::size_t i = 1; i < N; ++i) row({{layout.control(i), 1.0}, {layout.control(i - 1), -1.0}}, -rate, rate);

  QpProblem qp;
  qp.P.resize(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nx));
  qp.P.setFromTriplets(pt.begin(), pt.end());
  qp.q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nx));
  qp.A.resize(static_cast<Eigen::Index>(lo.size()), static_cast<Eigen::Index>(nx));
  qp.A.setFromTriplets(at.begin(), at.end());
  qp.l = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  qp.u = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  return qp;
}

void clamp_controls(std::vector<double>& kappa, double kappa_start, const BusParams& tractor, double delta_s) {
  const double rate = tractor.kappa_rate_max * delta_s;
  double prev = kappa_start;
  for (auto& k : kappa) {
    k = std::clamp(k, prev - rate, prev + rate);
    k = std::clamp(k, -tractor.kappa_max, tractor.kappa_max);
    prev = k;
  }
}

double constraint_violation(const PlanProblem& problem, std::span<const VehicleState> states,
                            std::span<const double> kappa) {
  const auto& tractor = tractor_of(problem.params);
  const double rate = tractor.kappa_rate_max * problem.geometry->road().delta_s();
  double worst = 0.0;
  double prev = problem.kappa_start;
  for (double k : kappa) {
    worst = std::max({worst, std::abs(k) - tractor.kappa_max, std::abs(k - prev) - rate});
    prev = k;
  }
  const auto& c = problem.corridor;
  for (std::size_t i = 1; i < states.size(); ++i) {
    worst = std::max({worst, c.e_y_lower[i] - states[i].e_y, states[i].e_y - c.e_y_upper[i],
                      c.aux_lower[i] - states[i].e_y_aux, states[i].e_y_aux - c.aux_upper[i]});
  }
  return worst;
}

namespace {
constexpr double kFeasibilityTol = 1e-6;
}  // namespace

PlanResult sqp_solve(const PlanProblem& problem, const PlanConfig& config,
                     std::optional<std::span<const double>> warm_kappa) {
  const auto t0 = std::chrono::steady_clock::now();
  Iterate it = start_iterate(problem, config, warm_kappa);
  PlanStats stats;
  Eigen::VectorXd dual;
  // Penalty weight of the l1 merit used while the iterate is infeasible.
  double mu = 0.0;
  double violation = constraint_violation(problem, it.states, it.kappa);
  for (int k = 0; k < config.sqp_max_iter; ++k) {
    const auto step = qp_step(problem, config, it, dual);
    ++stats.sqp_iters;
    stats.qp_iters += step.iterations;
    stats.step_norm = step.step_norm;
    dual = step.y;
    spdlog::debug("sqp iteration {}: objective {} step {} qp iterations {}", k, it.objective, step.step_norm,
                  step.iterations);
    if (step.step_norm < config.sqp_tol) {
      stats.converged = step.solved;
      break;
    }
    mu = std::max(mu, 2.0 * step.y.lpNorm<1>() + 1.0);
    const bool feasible = violation <= kFeasibilityTol;
    std::optional<Iterate> next;
    double next_violation = 0.0;
    for (double alpha : {1.0, 0.5}) {
      auto trial = rollout(problem, config.omega_kappa, blend(it.kappa, step.kappa, alpha));
      if (!trial) continue;
      const double v = constraint_violation(problem, trial->states, trial->kappa);
      const bool accept = feasible ? (v <= kFeasibilityTol && trial->objective <= it.objective)
                                   : (trial->objective + mu * v <= it.objective + mu * violation);
      if (accept) {
        next = std::move(trial);
        next_violation = v;
        break;
      }
    }
    if (!next) {
      spdlog::debug("sqp: no decrease at iteration {}, keeping the best iterate", k);
      break;
    }
    it = std::move(*next);
    violation = next_violation;
  }
  return finish(problem, std::move(it), stats, t0);
}

PlanResult rti_step(const PlanProblem& problem, const PlanConfig& config,
                    std::optional<std::span<const double>> warm_kappa) {
  const auto t0 = std::chrono::steady_clock::now();
  Iterate it = start_iterate(problem, config, warm_kappa);
  PlanStats stats;
  const auto step = qp_step(problem, config, it, {});
  stats.sqp_iters = 1;
  stats.qp_iters = step.iterations;
  stats.step_norm = step.step_norm;
  stats.converged = step.solved && step.step_norm < config.sqp_tol;
  for (double alpha : {1.0, 0.5}) {
    if (auto trial = rollout(problem, config.omega_kappa, blend(it.kappa, step.kappa, alpha))) {
      it = std::move(*trial);
      break;
    }
  }
  return finish(problem, std::move(it), stats, t0);
}

PlanResult plan(const PlanProblem& problem, const PlanConfig& config,
                std::optional<std::span<const double>> warm_kappa) {
  return config.mode == PlanMode::sqp ? sqp_solve(problem, config, warm_kappa)
                                      : rti_step(problem, config, warm_kappa);
}

double DriveResult::mean_solve_s() const {
  if (windows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& w : windows) sum += w.stats.solve_time_s;
  return sum / static_cast<double>(windows.size());
}

double DriveResult::max_solve_s() const {
  double m = 0.0;
  for (const auto& w : windows) m = std::max(m, w.stats.solve_time_s);
  return m;
}

bool DriveResult::all_converged() const {
  return std::all_of(windows.begin(), windows.end(), [](const WindowStats& w) { return w.stats.converged; });
}

DriveResult receding_horizon_run(std::shared_ptr<const RoadGeometry> geometry, const VehicleState& z0,
                                 const VehicleParams& params, const PlanConfig& config,
                                 std::optional<double> kappa_start) {
  config.validate();
  hdvplan::validate(params);
  const auto& road = geometry->road();
  if (std::abs(road.delta_s() - config.delta_s) > 1e-12 * std::max(1.0, config.delta_s))
    throw ValidationError("road delta_s differs from the configured delta_s");
  const auto N = config.horizon_steps();
  const auto E = config.execute_steps();
  if (road.segments() < N) throw ValidationError("road is shorter than one planning horizon");

  DriveResult out;
  out.schedule = k_schedule(road, params);
  const auto kind = kind_of(params);
  const double kmax = tractor_of(params).kappa_max;
  double k_prev = kappa_start.value_or(std::clamp(road[0].kappa_gamma, -kmax, kmax));

  Trajectory& driven = out.trajectory;
  driven.kind = kind;
  driven.start_index = 0;
  VehicleState z = z0;
  if (kind == VehicleKind::bus) z.beta1 = 0.0;
  z.e_y_aux = aux_error(*geometry, 0.0, z, params);
  driven.states.push_back(z);
  driven.s.push_back(0.0);

  std::vector<double> warm;
  std::size_t j = 0;
  std::size_t window = 0;
  while (j + N <= road.segments()) {
    PlanResult result;
    try {
      auto problem = make_problem(geometry, j, N, z, k_prev, out.schedule, params, config.objective);
      result = warm.empty() ? plan(problem, config) : plan(problem, config, std::span<const double>(warm));
    } catch (const Error& e) {
      spdlog::error("planning window {} (s = {} m) failed: {}", window, road.s(j), e.what());
      throw;
    }
    out.windows.push_back({j, result.stats, result.objective});
    spdlog::debug("window {} at s={} obj={} iters={} t={}s", window, road.s(j), result.objective,
                  result.stats.sqp_iters, result.stats.solve_time_s);

    const std::span<const double> executed(result.kappa.data(), E);
    const auto piece = simulate(*geometry, j, z, executed, params);
    for (std::size_t i = 1; i < piece.states.size(); ++i) {
      driven.states.push_back(piece.states[i]);
      driven.s.push_back(piece.s[i]);
    }
    driven.kappa.insert(driven.kappa.end(), executed.begin(), executed.end());
    z = piece.states.back();
    k_prev = executed.back();
    j += E;
    ++window;

    warm.assign(result.kappa.begin() + static_cast<std::ptrdiff_t>(E), result.kappa.end());
    warm.resize(N, result.kappa.back());
  }
  attach_poses(*geometry, driven);
  return out;
}

}  // namespace hdvplan
