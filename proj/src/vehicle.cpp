#include "hdvplan/vehicle.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hdvplan/errors.hpp"

namespace hdvplan {

const char* to_string(VehicleKind kind) {
  return kind == VehicleKind::bus ? "bus" : "tractor_trailer";
}

void BusParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(L1) || !finite(L1f) || !finite(L1r) || !finite(W) || !finite(kappa_max) ||
      !finite(kappa_rate_max))
    throw ValidationError("bus parameters must be finite");
  if (!(L1 > 0.0)) throw ValidationError("L1 must be positive");
  if (L1f < 0.0 || L1r < 0.0) throw ValidationError("overhangs must be non-negative");
  if (!(W > 0.0)) throw ValidationError("W must be positive");
  if (!(kappa_max > 0.0)) throw ValidationError("kappa_max must be positive");
  if (!(kappa_rate_max > 0.0)) throw ValidationError("kappa_rate_max must be positive");
  if (!(1.0 / kappa_max > W / 2.0))
    throw ValidationError("minimum turning radius 1/kappa_max must exceed W/2");
}

void TractorTrailerParams::validate() const {
  tractor.validate();
  if (!std::isfinite(L2) || !std::isfinite(L2r) || !std::isfinite(M1) || !std::isfinite(W_trailer))
    throw ValidationError("trailer parameters must be finite");
  if (!(L2 > 0.0)) throw ValidationError("L2 must be positive");
  if (L2r < 0.0) throw ValidationError("L2r must be non-negative");
  if (!(L2 > std::abs(M1))) throw ValidationError("L2 must exceed |M1|");
  if (!(W_trailer > 0.0)) throw ValidationError("W_trailer must be positive");
}

VehicleKind kind_of(const VehicleParams& params) {
  return std::holds_alternative<BusParams>(params) ? VehicleKind::bus : VehicleKind::tractor_trailer;
}

const BusParams& tractor_of(const VehicleParams& params) {
  if (const auto* bus = std::get_if<BusParams>(&params)) return *bus;
  return std::get<TractorTrailerParams>(params).tractor;
}

void validate(const VehicleParams& params) {
  std::visit([](const auto& p) { p.validate(); }, params);
}

Eigen::VectorXd to_vector(const VehicleState& state, VehicleKind kind) {
  if (kind == VehicleKind::bus) return Eigen::Vector3d(state.e_y, state.e_psi, state.e_y_aux);
  return Eigen::Vector4d(state.e_y, state.e_psi, state.beta1, state.e_y_aux);
}

VehicleState from_vector(const Eigen::Ref<const Eigen::VectorXd>& v, VehicleKind kind) {
  if (kind == VehicleKind::bus) return {v[0], v[1], 0.0, v[2]};
  return {v[0], v[1], v[2], v[3]};
}

void check_domain(const VehicleState& state, double kappa_gamma, VehicleKind kind) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  if (!std::isfinite(state.e_y) || !std::isfinite(state.e_psi) || !std::isfinite(state.beta1))
    throw DomainError("state is not finite");
  if (std::abs(state.e_psi) >= half_pi)
    throw DomainError("heading error |e_psi| >= pi/2: " + std::to_string(state.e_psi));
  if (kind == VehicleKind::tractor_trailer && std::abs(state.beta1) >= half_pi)
    throw DomainError("joint angle |beta1| >= pi/2 (jackknife): " + std::to_string(state.beta1));
  if (1.0 - state.e_y * kappa_gamma <= 0.0)
    throw DomainError("1 - e_y * kappa_gamma <= 0 (beyond the centre of curvature)");
}

BusDerivative spatial_deriv_bus(const VehicleState& state, double kappa, double kappa_gamma) {
  check_domain(state, kappa_gamma, VehicleKind::bus);
  const double scale = 1.0 - state.e_y * kappa_gamma;
  return {scale * std::tan(state.e_psi), scale / std::cos(state.e_psi) * kappa - kappa_gamma};
}

TractorTrailerDerivative spatial_deriv_tt(const VehicleState& state, double kappa, double kappa_gamma,
                                          const TractorTrailerParams& params) {
  check_domain(state, kappa_gamma, VehicleKind::tractor_trailer);
  const double scale = 1.0 - state.e_y * kappa_gamma;
  const double ds_dt = scale / std::cos(state.e_psi);
  const double joint = kappa - std::sin(state.beta1) / params.L2 +
                       params.M1 / params.L2 * std::cos(state.beta1) * kappa;
  return {scale * std::tan(state.e_psi), ds_dt * kappa - kappa_gamma, ds_dt * joint};
}

VehicleState euler_step(const VehicleState& state, double kappa, double kappa_gamma, double delta_s,
                        const VehicleParams& params) {
  VehicleState next = state;
  if (const auto* tt = std::get_if<TractorTrailerParams>(&params)) {
    const auto d = spatial_deriv_tt(state, kappa, kappa_gamma, *tt);
    next.e_y += delta_s * d.e_y;
    next.e_psi += delta_s * d.e_psi;
    next.beta1 += delta_s * d.beta1;
  } else {
    const auto d = spatial_deriv_bus(state, kappa, kappa_gamma);
    next.e_y += delta_s * d.e_y;
    next.e_psi += delta_s * d.e_psi;
    next.beta1 = 0.0;
  }
  return next;
}

VehicleState step(const RoadGeometry& geometry, std::size_t index, const VehicleState& state,
                  double kappa, const VehicleParams& params) {
  const auto& road = geometry.road();
  if (index >= road.segments()) throw OutOfRange("step: index beyond the last road segment");
  auto next = euler_step(state, kappa, road[index].kappa_gamma, road.delta_s(), params);
  next.e_y_aux = aux_error(geometry, road.s(index + 1), next, params);
  return next;
}

GlobalPose rear_axle_pose(const RoadGeometry& geometry, double s, double e_y, double e_psi) {
  const auto p = geometry.offset_point(s, e_y);
  return {p.x, p.y, geometry.heading(s) + e_psi};
}

Point2 front_axle_point(const GlobalPose& rear, const BusParams& params) {
  return {rear.x + params.L1 * std::cos(rear.heading), rear.y + params.L1 * std::sin(rear.heading)};
}

Point2 hitch_point(const GlobalPose& rear, const TractorTrailerParams& params) {
  return {rear.x - params.M1 * std::cos(rear.heading), rear.y - params.M1 * std::sin(rear.heading)};
}

GlobalPose trailer_axle_pose(const GlobalPose& rear, double beta1, const TractorTrailerParams& params) {
  const auto hitch = hitch_point(rear, params);
  const double heading = rear.heading - beta1;
  return {hitch.x - params.L2 * std::cos(heading), hitch.y - params.L2 * std::sin(heading), heading};
}

double aux_error_bus(const RoadGeometry& geometry, double s, double e_y, double e_psi,
                     const BusParams& params) {
  const auto rear = rear_axle_pose(geometry, s, e_y, e_psi);
  const auto front = front_axle_point(rear, params);
  return project_point(geometry, front, s + params.L1 * std::cos(e_psi)).lateral;
}

double aux_error_tt(const RoadGeometry& geometry, double s, double e_y, double e_psi, double beta1,
                    const TractorTrailerParams& params) {
  const auto rear = rear_axle_pose(geometry, s, e_y, e_psi);
  const auto axle = trailer_axle_pose(rear, beta1, params);
  return project_point(geometry, {axle.x, axle.y}, s - params.M1 - params.L2).lateral;
}

double aux_error(const RoadGeometry& geometry, double s, const VehicleState& state,
                 const VehicleParams& params) {
  if (const auto* tt = std::get_if<TractorTrailerParams>(&params))
    return aux_error_tt(geometry, s, state.e_y, state.e_psi, state.beta1, *tt);
  return aux_error_bus(geometry, s, state.e_y, state.e_psi, std::get<BusParams>(params));
}

double AuxErrorModel::predict(const VehicleState& at, const VehicleState& about) const {
  double value = base + d_dey * (at.e_y - about.e_y) + d_depsi * (at.e_psi - about.e_psi);
  if (d_dbeta1) value += *d_dbeta1 * (at.beta1 - about.beta1);
  return value;
}

AuxErrorModel linearize_aux(const RoadGeometry& geometry, double s, const VehicleState& state,
                            const VehicleParams& params, double h) {
  auto eval = [&](double dey, double depsi, double dbeta) {
    VehicleState z = state;
    z.e_y += dey;
    z.e_psi += depsi;
    z.beta1 += dbeta;
    return aux_error(geometry, s, z, params);
  };
  AuxErrorModel model;
  model.base = eval(0.0, 0.0, 0.0);
  model.d_dey = (eval(h, 0.0, 0.0) - eval(-h, 0.0, 0.0)) / (2.0 * h);
  model.d_depsi = (eval(0.0, h, 0.0) - eval(0.0, -h, 0.0)) / (2.0 * h);
  if (kind_of(params) == VehicleKind::tractor_trailer)
    model.d_dbeta1 = (eval(0.0, 0.0, h) - eval(0.0, 0.0, -h)) / (2.0 * h);
  return model;
}

DynamicsLinearization linearize_dynamics(const VehicleState& state, double kappa, double kappa_gamma,
                                         double delta_s, const VehicleParams& params, double h) {
  const auto kind = kind_of(params);
  const auto n = state_dim(kind);
  const auto m = core_dim(kind);
  auto core = [&](const VehicleState& z, double k) {
    auto next = to_vector(euler_step(z, k, kappa_gamma, delta_s, params), kind);
    next[static_cast<Eigen::Index>(n - 1)] = 0.0;
    return Eigen::VectorXd(next);
  };

  DynamicsLinearization lin;
  lin.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd z = to_vector(state, kind);
  for (std::size_t j = 0; j < m; ++j) {
    Eigen::VectorXd zp = z, zm = z;
    zp[static_cast<Eigen::Index>(j)] += h;
    zm[static_cast<Eigen::Index>(j)] -= h;
    lin.A.col(static_cast<Eigen::Index>(j)) =
        (core(from_vector(zp, kind), kappa) - core(from_vector(zm, kind), kappa)) / (2.0 * h);
  }
  lin.B = (core(state, kappa + h) - core(state, kappa - h)) / (2.0 * h);
  lin.c = core(state, kappa) - lin.A * z - lin.B * kappa;
  return lin;
}

double steering_to_curvature(double phi, const BusParams& params) {
  return std::tan(phi) / params.L1;
}

double curvature_to_steering(double kappa, const BusParams& params) {
  return std::atan(kappa * params.L1);
}

void attach_poses(const RoadGeometry& geometry, Trajectory& trajectory) {
  trajectory.poses.clear();
  trajectory.poses.reserve(trajectory.states.size());
  for (std::size_t i = 0; i < trajectory.states.size(); ++i) {
    auto pose = rear_axle_pose(geometry, trajectory.s[i], trajectory.states[i].e_y,
                               trajectory.states[i].e_psi);
    pose.heading = normalize_angle(pose.heading);
    trajectory.poses.push_back(pose);
  }
}

Trajectory simulate(const RoadGeometry& geometry, std::size_t start_index, const VehicleState& z0,
                    std::span<const double> controls, const VehicleParams& params) {
  const auto& road = geometry.road();
  if (start_index + controls.size() > road.segments())
    throw OutOfRange("simulate: controls run past the end of the road");
  Trajectory out;
  out.kind = kind_of(params);
  out.start_index = start_index;
  out.kappa.assign(controls.begin(), controls.end());
  out.states.reserve(controls.size() + 1);
  out.s.reserve(controls.size() + 1);

  VehicleState z = z0;
  if (out.kind == VehicleKind::bus) z.beta1 = 0.0;
  try {
    check_domain(z, road[start_index].kappa_gamma, out.kind);
  } catch (const DomainError& e) {
    throw DomainError(e.what(), 0);
  }
  z.e_y_aux = aux_error(geometry, road.s(start_index), z, params);
  out.states.push_back(z);
  out.s.push_back(road.s(start_index));
  for (std::size_t i = 0; i < controls.size(); ++i) {
    try {
      z = step(geometry, start_index + i, z, controls[i], params);
      check_domain(z, road[start_index + i + 1].kappa_gamma, out.kind);
    } catch (const DomainError& e) {
      throw DomainError(e.what(), i);
    }
    out.states.push_back(z);
    out.s.push_back(road.s(start_index + i + 1));
  }
  attach_poses(geometry, out);
  return out;
}

}  // namespace hdvplan
