#pragma once

#include <optional>
#include <vector>

#include "hdvplan/road.hpp"
#include "hdvplan/vehicle.hpp"

namespace hdvplan {

/// Below this |kappa_gamma| a sample counts as straight and gets kDefaultK.
inline constexpr double kStraightCurvature = 1e-4;
inline constexpr double kDefaultK = 1.0;
/// Trailers shorter than this are rejected as degenerate.
inline constexpr double kMinTrailerLength = 1e-3;

/// Stationary, swept-area-balanced configuration on a circular road. All
/// radii carry the sign of R_road (positive = left turn).
struct GeometricSolution {
  VehicleKind kind = VehicleKind::bus;
  double R_road = 0.0;
  double R1 = 0.0;                 // bus / tractor rear-axle turning radius
  std::optional<double> R2;        // trailer-axle radius
  double R_left = 0.0;             // inner swept radius
  double R_right = 0.0;            // outer swept radius
  double e_y = 0.0;
  double e_y_aux = 0.0;
  std::optional<double> beta1;
  double K = 0.0;

  /// Lane-centre lateral extent of the swept area on either side.
  double swept_half_width() const { return 0.5 * std::abs(R_right - R_left); }
};

/// Closed-form balanced turning radius of a bus. Throws GeometryInfeasible.
double bus_optimal_radius(double R_road, const BusParams& params);
GeometricSolution bus_optimal_K(double R_road, const BusParams& params);

/// Right-hand side of the tractor-trailer balance equation
/// 2 R_road = sqrt(R1^2 + M1^2 - L2^2) - W/2 + sqrt((R1 + W/2)^2 + (L1 + L1f)^2).
double tt_balance_rhs(double R1, const TractorTrailerParams& params);

/// Balanced tractor turning radius, found by bracketed bisection with a
/// Newton polish. Throws GeometryInfeasible or NoConvergence.
double tt_optimal_radius(double R_road, const TractorTrailerParams& params);
GeometricSolution tt_optimal_K(double R_road, const TractorTrailerParams& params);

GeometricSolution optimal_K(double R_road, const VehicleParams& params);

/// Road-aligned state of the stationary solution (e_psi = 0).
VehicleState steady_state(const GeometricSolution& solution);

struct KSchedule {
  VehicleKind kind = VehicleKind::bus;
  std::vector<double> values;  // one per road sample
};

/// Per-sample weights from the local road curvature. Throws
/// GeometryInfeasible naming the first infeasible sample.
KSchedule k_schedule(const RoadPath& road, const VehicleParams& params);

}  // namespace hdvplan
