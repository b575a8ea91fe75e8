#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdvplan/qp.hpp"
#include "hdvplan/road.hpp"
#include "hdvplan/tuning.hpp"
#include "hdvplan/vehicle.hpp"

namespace hdvplan {

enum class PlanMode { sqp, rti };
/// `tuned` penalises (K e_y + e_y_aux)^2; `rear_axle` penalises e_y^2 only
/// (aux corridor rows are kept).
enum class ObjectiveKind { tuned, rear_axle };

const char* to_string(PlanMode mode);
const char* to_string(ObjectiveKind objective);
PlanMode plan_mode_from_string(const std::string& name);
ObjectiveKind objective_from_string(const std::string& name);

struct PlanConfig {
  double horizon_m = 100.0;
  double delta_s = 0.5;
  double execute_m = 5.0;
  double omega_kappa = 10.0;
  PlanMode mode = PlanMode::sqp;
  ObjectiveKind objective = ObjectiveKind::tuned;
  double sqp_tol = 1e-6;
  int sqp_max_iter = 30;
  QpSettings qp;

  /// Throws ValidationError.
  void validate() const;
  std::size_t horizon_steps() const;
  std::size_t execute_steps() const;
};

/// Lateral bounds per state index (entry 0 is not constrained).
struct Corridor {
  std::vector<double> e_y_lower, e_y_upper;
  std::vector<double> aux_lower, aux_upper;
};

/// Corridor from the road half-widths, shrunk by the relevant body half-width.
Corridor make_corridor(const RoadPath& road, std::size_t start_index, std::size_t steps,
                       const VehicleParams& params);

struct PlanProblem {
  std::shared_ptr<const RoadGeometry> geometry;  // whole road
  std::size_t start_index = 0;
  std::size_t steps = 0;  // N
  VehicleState z_start;
  double kappa_start = 0.0;
  std::vector<double> K;  // N + 1 weights
  Corridor corridor;
  VehicleParams params;
  ObjectiveKind objective = ObjectiveKind::tuned;

  VehicleKind kind() const { return kind_of(params); }
  void validate() const;
};

PlanProblem make_problem(std::shared_ptr<const RoadGeometry> geometry, std::size_t start_index,
                         std::size_t steps, const VehicleState& z_start, double kappa_start,
                         const KSchedule& schedule, const VehicleParams& params,
                         ObjectiveKind objective = ObjectiveKind::tuned);

struct PlanStats {
  int sqp_iters = 0;
  int qp_iters = 0;
  double solve_time_s = 0.0;
  bool converged = false;
  double constraint_violation = 0.0;
  double step_norm = 0.0;
};

struct PlanResult {
  std::vector<double> kappa;         // N controls
  std::vector<VehicleState> states;  // N + 1 states, exact rollout of kappa
  double objective = 0.0;
  PlanStats stats;
};

/// omega * sum_{i=1}^{N-1} (k_i - k_{i-1})^2 + sum_{i=1}^{N} (K_i e_y,i + e_aux,i)^2
/// (or e_y,i^2 for the rear-axle objective).
double objective_eval(std::span<const VehicleState> states, std::span<const double> kappa,
                      std::span<const double> K, double omega_kappa,
                      ObjectiveKind objective = ObjectiveKind::tuned);

struct HorizonLinearization {
  std::vector<DynamicsLinearization> dynamics;  // N
  std::vector<AuxErrorModel> aux;               // N + 1
};

/// Per-stage linearisation around an iterate, parallel over stages.
HorizonLinearization linearize_horizon(const PlanProblem& problem, std::span<const VehicleState> states,
                                       std::span<const double> kappa);
HorizonLinearization linearize_horizon_serial(const PlanProblem& problem,
                                              std::span<const VehicleState> states,
                                              std::span<const double> kappa);

/// Variable layout of the multiple-shooting QP: [z_0 .. z_N, k_0 .. k_{N-1}].
struct QpLayout {
  std::size_t steps = 0;
  std::size_t state_dim = 0;
  std::size_t num_variables() const { return (steps + 1) * state_dim + steps; }
  std::size_t state(std::size_t i, std::size_t component) const { return i * state_dim + component; }
  std::size_t control(std::size_t i) const { return (steps + 1) * state_dim + i; }
};

/// Throws LinearizationFailed naming the stage whose model is not finite.
QpProblem build_qp(const PlanProblem& problem, double omega_kappa, std::span<const VehicleState> states,
                   std::span<const double> kappa);
QpProblem build_qp(const PlanProblem& problem, double omega_kappa, const HorizonLinearization& lin,
                   std::span<const VehicleState> states, std::span<const double> kappa);

/// Makes a control sequence satisfy the curvature and rate bounds, walking
/// forward from kappa_start.
void clamp_controls(std::vector<double>& kappa, double kappa_start, const BusParams& tractor,
                    double delta_s);

/// Full SQP. Starts from `warm_kappa` when given, otherwise from the
/// clipped road curvature. Never throws NoConvergence; the flag is in stats.
PlanResult sqp_solve(const PlanProblem& problem, const PlanConfig& config,
                     std::optional<std::span<const double>> warm_kappa = std::nullopt);

/// Exactly one QP around the warm start.
PlanResult rti_step(const PlanProblem& problem, const PlanConfig& config,
                    std::optional<std::span<const double>> warm_kappa = std::nullopt);

PlanResult plan(const PlanProblem& problem, const PlanConfig& config,
                std::optional<std::span<const double>> warm_kappa = std::nullopt);

/// Largest violation of the box, rate and corridor bounds of a plan.
double constraint_violation(const PlanProblem& problem, std::span<const VehicleState> states,
                            std::span<const double> kappa);

struct WindowStats {
  std::size_t start_index = 0;
  PlanStats stats;
  double objective = 0.0;
};

struct DriveResult {
  Trajectory trajectory;
  std::vector<WindowStats> windows;
  KSchedule schedule;

  double mean_solve_s() const;
  double max_solve_s() const;
  bool all_converged() const;
};

/// Plans over `horizon_m`, executes `execute_m`, shifts, and repeats until
/// less than one horizon of road remains. `kappa_start` defaults to the
/// clipped road curvature at s = 0.
DriveResult receding_horizon_run(std::shared_ptr<const RoadGeometry> geometry, const VehicleState& z0,
                                 const VehicleParams& params, const PlanConfig& config,
                                 std::optional<double> kappa_start = std::nullopt);

}  // namespace hdvplan
