#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "hdvplan/envelope.hpp"
#include "hdvplan/planner.hpp"
#include "hdvplan/tuning.hpp"
#include "hdvplan/vehicle.hpp"

// Keep nlohmann out of the public headers: documents travel as strings.
namespace hdvplan {

/// `s,e_y,e_psi,beta1,e_y_aux,kappa,x,y,heading`; beta1 is empty for a bus
/// and kappa is empty on the last row.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
/// Inverse of write_trajectory_csv. The vehicle kind follows from the beta1
/// column. Throws ParseError.
Trajectory read_trajectory_csv(std::istream& in);

/// Flat object: kind ("bus" | "tractor_trailer"), L1, L1f, L1r, W,
/// kappa_max, kappa_rate_max and, for a tractor-trailer, L2, L2r, M1,
/// W_trailer. Throws ParseError / ValidationError.
VehicleParams parse_vehicle_json(const std::string& text);
std::string vehicle_json(const VehicleParams& params);

std::string geometric_solution_json(const GeometricSolution& solution);

/// `s,kappa,K` per road sample.
void write_k_schedule_csv(std::ostream& out, const RoadPath& road, const KSchedule& schedule);

/// `s,left,right` for covered bins only.
void write_envelope_csv(std::ostream& out, const SweptEnvelope& envelope);
std::string envelope_report_json(const EnvelopeReport& report);

/// Run statistics without wall-clock fields, so identical runs serialise to
/// identical bytes.
std::string drive_stats_json(const DriveResult& result, const PlanConfig& config);
std::string plan_stats_json(const PlanResult& result, const PlanConfig& config);
/// Wall-clock statistics: mean / max solve time per replan.
std::string timing_json(const DriveResult& result, const PlanConfig& config);

struct SvgOptions {
  double pixels_per_metre = 8.0;
};

/// Static plot: lane boundaries, centre line, swept band and rear-axle path.
void write_svg(std::ostream& out, const RoadGeometry& geometry, const Trajectory* trajectory,
               const SweptEnvelope* envelope, const SvgOptions& options = {});

}  // namespace hdvplan
