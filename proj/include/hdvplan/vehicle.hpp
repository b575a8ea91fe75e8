#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hdvplan/road.hpp"

namespace hdvplan {

enum class VehicleKind { bus, tractor_trailer };

const char* to_string(VehicleKind kind);

/// Rigid single-body vehicle (also the tractor of a tractor-trailer).
struct BusParams {
  double L1 = 0.0;   // wheelbase
  double L1f = 0.0;  // front overhang
  double L1r = 0.0;  // rear overhang
  double W = 0.0;    // body width
  double kappa_max = 0.0;
  double kappa_rate_max = 0.0;  // per metre of travel

  /// Throws ValidationError.
  void validate() const;
};

struct TractorTrailerParams {
  BusParams tractor;
  double L2 = 0.0;   // hitch to trailer axle
  double L2r = 0.0;  // trailer rear overhang
  double M1 = 0.0;   // signed hitch offset, negative = hitch ahead of the tractor rear axle
  double W_trailer = 0.0;

  void validate() const;
};

using VehicleParams = std::variant<BusParams, TractorTrailerParams>;

VehicleKind kind_of(const VehicleParams& params);
const BusParams& tractor_of(const VehicleParams& params);
void validate(const VehicleParams& params);

/// Road-aligned state. `beta1` is unused (kept at zero) for buses; `e_y_aux`
/// is the front-axle error for a bus and the trailer-axle error for a
/// tractor-trailer.
struct VehicleState {
  double e_y = 0.0;
  double e_psi = 0.0;
  double beta1 = 0.0;
  double e_y_aux = 0.0;

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// 3 for a bus, 4 for a tractor-trailer.
constexpr std::size_t state_dim(VehicleKind kind) { return kind == VehicleKind::bus ? 3 : 4; }
/// Dimension of the integrated part of the state (aux error excluded).
constexpr std::size_t core_dim(VehicleKind kind) { return state_dim(kind) - 1; }

Eigen::VectorXd to_vector(const VehicleState& state, VehicleKind kind);
VehicleState from_vector(const Eigen::Ref<const Eigen::VectorXd>& v, VehicleKind kind);

struct BusDerivative {
  double e_y = 0.0;
  double e_psi = 0.0;
};

struct TractorTrailerDerivative {
  double e_y = 0.0;
  double e_psi = 0.0;
  double beta1 = 0.0;
};

/// Throws DomainError when |e_psi| >= pi/2, |beta1| >= pi/2 (trailer) or
/// 1 - e_y * kappa_gamma <= 0.
void check_domain(const VehicleState& state, double kappa_gamma, VehicleKind kind);

BusDerivative spatial_deriv_bus(const VehicleState& state, double kappa, double kappa_gamma);
TractorTrailerDerivative spatial_deriv_tt(const VehicleState& state, double kappa, double kappa_gamma,
                                          const TractorTrailerParams& params);

/// Euler-forward step of the integrated states over `delta_s`. The aux
/// component is copied through unchanged.
VehicleState euler_step(const VehicleState& state, double kappa, double kappa_gamma, double delta_s,
                        const VehicleParams& params);

/// One grid step from sample `index` to `index + 1`: Euler on the integrated
/// states, then the aux error refreshed exactly by projection.
VehicleState step(const RoadGeometry& geometry, std::size_t index, const VehicleState& state,
                  double kappa, const VehicleParams& params);

// --- body placement ---------------------------------------------------------

GlobalPose rear_axle_pose(const RoadGeometry& geometry, double s, double e_y, double e_psi);
Point2 front_axle_point(const GlobalPose& rear, const BusParams& params);
Point2 hitch_point(const GlobalPose& rear, const TractorTrailerParams& params);
/// Trailer axle pose; trailer heading = tractor heading - beta1.
GlobalPose trailer_axle_pose(const GlobalPose& rear, double beta1, const TractorTrailerParams& params);

// --- auxiliary lateral errors ------------------------------------------------

/// Signed lateral error of the bus front axle with the rear axle at
/// (s, e_y, e_psi).
double aux_error_bus(const RoadGeometry& geometry, double s, double e_y, double e_psi,
                     const BusParams& params);
/// Signed lateral error of the trailer axle.
double aux_error_tt(const RoadGeometry& geometry, double s, double e_y, double e_psi, double beta1,
                    const TractorTrailerParams& params);
double aux_error(const RoadGeometry& geometry, double s, const VehicleState& state,
                 const VehicleParams& params);

/// Local linear model of the aux error around a working point.
struct AuxErrorModel {
  double base = 0.0;
  double d_dey = 0.0;
  double d_depsi = 0.0;
  std::optional<double> d_dbeta1;  // tractor-trailer only

  double predict(const VehicleState& at, const VehicleState& about) const;
};

inline constexpr double kFiniteDifferenceStep = 1e-4;

AuxErrorModel linearize_aux(const RoadGeometry& geometry, double s, const VehicleState& state,
                            const VehicleParams& params, double h = kFiniteDifferenceStep);

/// z+ ~= A z + B kappa + c for one Euler step. The aux row is all zero: the
/// aux error is an algebraic output tied to the state through AuxErrorModel.
struct DynamicsLinearization {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  Eigen::VectorXd c;
};

DynamicsLinearization linearize_dynamics(const VehicleState& state, double kappa, double kappa_gamma,
                                         double delta_s, const VehicleParams& params,
                                         double h = kFiniteDifferenceStep);

double steering_to_curvature(double phi, const BusParams& params);
double curvature_to_steering(double kappa, const BusParams& params);

// --- trajectories -----------------------------------------------------------

struct Trajectory {
  VehicleKind kind = VehicleKind::bus;
  std::size_t start_index = 0;        // road sample of states[0]
  std::vector<double> s;              // arc length per state
  std::vector<VehicleState> states;   // one per grid point
  std::vector<double> kappa;          // states.size() - 1 controls
  std::vector<GlobalPose> poses;      // rear-axle global pose per state
};

/// Global rear-axle poses for every state of a trajectory.
void attach_poses(const RoadGeometry& geometry, Trajectory& trajectory);

/// Rolls `controls` out from `z0` at road sample `start_index`. z0's aux
/// component is recomputed exactly. Throws DomainError with the failing step.
Trajectory simulate(const RoadGeometry& geometry, std::size_t start_index, const VehicleState& z0,
                    std::span<const double> controls, const VehicleParams& params);

}  // namespace hdvplan
