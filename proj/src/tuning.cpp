#include "hdvplan/tuning.hpp"

#include <cmath>
#include <string>

#include "hdvplan/errors.hpp"

namespace hdvplan {

namespace {

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

void require_turn(double R_road) {
  if (!std::isfinite(R_road) || R_road == 0.0)
    throw GeometryInfeasible("road radius must be finite and nonzero");
}

// Balance residual written in terms of delta = R1 - R_road so that no large
// terms cancel: rhs(R1) - 2 R_road.
double tt_residual(double delta, double R_road, const TractorTrailerParams& p) {
  const double R1 = R_road + delta;
  const double half_w = p.tractor.W / 2.0;
  const double L = p.tractor.L1 + p.tractor.L1f;
  const double R2 = std::sqrt(R1 * R1 + p.M1 * p.M1 - p.L2 * p.L2);
  const double outer = std::hypot(R1 + half_w, L);
  return 2.0 * delta + (p.M1 * p.M1 - p.L2 * p.L2) / (R2 + R1) + L * L / (outer + R1 + half_w);
}

double tt_residual_slope(double delta, double R_road, const TractorTrailerParams& p) {
  const double R1 = R_road + delta;
  const double half_w = p.tractor.W / 2.0;
  const double L = p.tractor.L1 + p.tractor.L1f;
  const double R2 = std::sqrt(R1 * R1 + p.M1 * p.M1 - p.L2 * p.L2);
  return R1 / R2 + (R1 + half_w) / std::hypot(R1 + half_w, L);
}

}  // namespace

double bus_optimal_radius(double R_road, const BusParams& params) {
  require_turn(R_road);
  const double R = std::abs(R_road);
  const double W = params.W;
  if (!(R > W / 2.0)) throw GeometryInfeasible("road radius must exceed W/2");
  const double L = params.L1 + params.L1f;
  // R - R1 = L^2 / (4R + 2W), the cancellation-free form of the closed form.
  const double R1 = R - L * L / (4.0 * R + 2.0 * W);
  if (!(R1 > W / 2.0)) throw GeometryInfeasible("balanced turning radius does not exceed W/2");
  if (R1 < (1.0 / params.kappa_max) * (1.0 - 1e-12))
    throw GeometryInfeasible("balanced turning radius " + std::to_string(R1) +
                             " m is below the minimum 1/kappa_max");
  return sign_of(R_road) * R1;
}

GeometricSolution bus_optimal_K(double R_road, const BusParams& params) {
  const double R1 = std::abs(bus_optimal_radius(R_road, params));
  const double R = std::abs(R_road);
  const double W = params.W;
  const double L = params.L1 + params.L1f;

  const double e_y = L * L / (4.0 * R + 2.0 * W);
  const double front = std::hypot(params.L1, R1);
  const double e_y_aux = e_y - params.L1 * params.L1 / (front + R1);
  if (!(e_y > 0.0) || !(e_y_aux < 0.0))
    throw GeometryInfeasible("front axle does not off-track outside the lane centre; no positive weight");
  const double K = -e_y_aux / e_y;

  const double sgn = sign_of(R_road);
  GeometricSolution sol;
  sol.kind = VehicleKind::bus;
  sol.R_road = R_road;
  sol.R1 = sgn * R1;
  sol.R_left = sgn * (R1 - W / 2.0);
  sol.R_right = sgn * std::hypot(R1 + W / 2.0, L);
  sol.e_y = sgn * e_y;
  sol.e_y_aux = sgn * e_y_aux;
  sol.K = K;
  return sol;
}

double tt_balance_rhs(double R1, const TractorTrailerParams& p) {
  const double half_w = p.tractor.W / 2.0;
  const double L = p.tractor.L1 + p.tractor.L1f;
  return std::sqrt(R1 * R1 + p.M1 * p.M1 - p.L2 * p.L2) - half_w + std::hypot(R1 + half_w, L);
}

double tt_optimal_radius(double R_road, const TractorTrailerParams& params) {
  require_turn(R_road);
  if (params.L2 < kMinTrailerLength) throw GeometryInfeasible("degenerate trailer: L2 below 1e-3 m");
  const double R = std::abs(R_road);
  const auto& t = params.tractor;
  const double lower_R1 =
      std::max(std::sqrt(std::max(0.0, params.L2 * params.L2 - params.M1 * params.M1)) + t.W / 2.0 + 1e-6,
               1.0 / t.kappa_max);
  const double upper_R1 = 2.0 * R + t.L1 + t.L1f + t.W;
  double lo = lower_R1 - R;
  double hi = upper_R1 - R;
  const double f_lo = tt_residual(lo, R, params);
  if (f_lo > 0.0)
    throw GeometryInfeasible("road radius too small: no balanced tractor radius above " +
                             std::to_string(lower_R1) + " m");
  if (tt_residual(hi, R, params) < 0.0) throw GeometryInfeasible("balance equation has no bracket");

  int it = 0;
  for (; it < 200 && hi - lo > 1e-13 * std::max(1.0, R); ++it) {
    const double mid = 0.5 * (lo + hi);
    (tt_residual(mid, R, params) < 0.0 ? lo : hi) = mid;
  }
  double delta = 0.5 * (lo + hi);
  for (int polish = 0; polish < 3 && it < 200; ++polish, ++it) {
    const double next = delta - tt_residual(delta, R, params) / tt_residual_slope(delta, R, params);
    if (!(next >= lo - 1e-9) || !(next <= hi + 1e-9)) break;
    delta = next;
  }
  if (it >= 200 || std::abs(tt_residual(delta, R, params)) > 1e-10)
    throw NoConvergence("tractor-trailer balance equation did not converge");
  return sign_of(R_road) * (R + delta);
}

GeometricSolution tt_optimal_K(double R_road, const TractorTrailerParams& params) {
  const double R = std::abs(R_road);
  const double R1 = std::abs(tt_optimal_radius(R_road, params));
  const auto& t = params.tractor;
  const double R2 = std::sqrt(R1 * R1 + params.M1 * params.M1 - params.L2 * params.L2);
  if (!(R2 > t.W / 2.0)) throw GeometryInfeasible("trailer axle radius does not exceed W/2");

  const double e_y = R - R1;
  const double e_y_aux = R - R2;
  if (!(e_y < 0.0) || !(e_y_aux > 0.0))
    throw GeometryInfeasible("trailer does not off-track inside the lane centre; no positive weight");
  const double K = -e_y_aux / e_y;

  const double sgn = sign_of(R_road);
  GeometricSolution sol;
  sol.kind = VehicleKind::tractor_trailer;
  sol.R_road = R_road;
  sol.R1 = sgn * R1;
  sol.R2 = sgn * R2;
  sol.R_left = sgn * (R2 - t.W / 2.0);
  sol.R_right = sgn * std::hypot(R1 + t.W / 2.0, t.L1 + t.L1f);
  sol.e_y = sgn * e_y;
  sol.e_y_aux = sgn * e_y_aux;
  sol.beta1 = sgn * (std::atan(params.M1 / R1) + std::atan(params.L2 / R2));
  sol.K = K;
  return sol;
}

GeometricSolution optimal_K(double R_road, const VehicleParams& params) {
  if (const auto* tt = std::get_if<TractorTrailerParams>(&params)) return tt_optimal_K(R_road, *tt);
  return bus_optimal_K(R_road, std::get<BusParams>(params));
}

VehicleState steady_state(const GeometricSolution& solution) {
  return {solution.e_y, 0.0, solution.beta1.value_or(0.0), solution.e_y_aux};
}

KSchedule k_schedule(const RoadPath& road, const VehicleParams& params) {
  KSchedule schedule;
  schedule.kind = kind_of(params);
  schedule.values.reserve(road.size());
  for (std::size_t i = 0; i < road.size(); ++i) {
    const double kappa = road[i].kappa_gamma;
    if (std::abs(kappa) < kStraightCurvature) {
      schedule.values.push_back(kDefaultK);
      continue;
    }
    try {
      schedule.values.push_back(optimal_K(1.0 / kappa, params).K);
    } catch (const GeometryInfeasible& e) {
      throw GeometryInfeasible(e.what(), i);
    } catch (const NoConvergence& e) {
      throw GeometryInfeasible(e.what(), i);
    }
  }
  return schedule;
}

}  // namespace hdvplan
