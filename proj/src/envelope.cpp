#include "hdvplan/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "hdvplan/errors.hpp"
#include "hdvplan/tuning.hpp"

namespace hdvplan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

BodyOutline rectangle(double back, double front, double half_width) {
  return {{Point2{-back, -half_width}, Point2{front, -half_width}, Point2{front, half_width},
           Point2{-back, half_width}}};
}

/// Edge samples of an outline in body frame, each edge split into pieces no
/// longer than `spacing`.
std::vector<Point2> edge_samples(const BodyOutline& outline, double spacing) {
  std::vector<Point2> out;
  for (std::size_t e = 0; e < 4; ++e) {
    const auto a = outline.corners[e];
    const auto b = outline.corners[(e + 1) % 4];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / spacing - 1e-12)));
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(n);
      out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  return out;
}

struct Body {
  std::vector<Point2> samples;
  // Arc-length offset of the body reference point relative to the rear
  // axle, used as the projection hint.
  double hint_offset = 0.0;
  bool trailer = false;
};

struct Bins {
  std::vector<double> left, right;
  explicit Bins(std::size_t n) : left(n, -std::numeric_limits<double>::infinity()),
                                 right(n, std::numeric_limits<double>::infinity()) {}
  void merge(const Bins& other) {
    for (std::size_t j = 0; j < left.size(); ++j) {
      left[j] = std::max(left[j], other.left[j]);
      right[j] = std::min(right[j], other.right[j]);
    }
  }
};

std::vector<Body> bodies(const VehicleParams& params, double spacing) {
  std::vector<Body> out;
  const auto& tractor = tractor_of(params);
  out.push_back({edge_samples(tractor_outline(tractor), spacing), 0.0, false});
  if (kind_of(params) == VehicleKind::tractor_trailer) {
    const auto& tt = std::get<TractorTrailerParams>(params);
    out.push_back({edge_samples(trailer_outline(tt), spacing), -tt.M1 - tt.L2, true});
  }
  return out;
}

void sweep_state(const RoadGeometry& geometry, const Trajectory& trajectory, const VehicleParams& params,
                 const std::vector<Body>& parts, std::size_t i, Bins& bins) {
  const auto& road = geometry.road();
  const double ds = road.delta_s();
  const auto& rear = trajectory.poses[i];
  const auto& state = trajectory.states[i];
  for (const auto& body : parts) {
    GlobalPose frame = rear;
    if (body.trailer) frame = trailer_axle_pose(rear, state.beta1, std::get<TractorTrailerParams>(params));
    const double c = std::cos(frame.heading), sn = std::sin(frame.heading);
    for (const auto& q : body.samples) {
      const Point2 p{frame.x + c * q.x - sn * q.y, frame.y + sn * q.x + c * q.y};
      const auto proj = project_point(geometry, p, trajectory.s[i] + body.hint_offset + q.x);
      const double bin = std::round(proj.s / ds);
      if (bin < 0.0 || bin > static_cast<double>(road.segments())) continue;
      const auto j = static_cast<std::size_t>(bin);
      bins.left[j] = std::max(bins.left[j], proj.lateral);
      bins.right[j] = std::min(bins.right[j], proj.lateral);
    }
  }
}

SweptEnvelope finish(const RoadPath& road, const Bins& bins) {
  SweptEnvelope env;
  env.delta_s = road.delta_s();
  const auto n = road.size();
  env.s.resize(n);
  env.left.assign(n, kNaN);
  env.right.assign(n, kNaN);
  bool any = false;
  double max_left = -std::numeric_limits<double>::infinity();
  double max_right = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    env.s[j] = road.s(j);
    if (bins.left[j] < bins.right[j]) continue;
    env.left[j] = bins.left[j];
    env.right[j] = bins.right[j];
    max_left = std::max(max_left, bins.left[j]);
    max_right = std::max(max_right, -bins.right[j]);
    any = true;
  }
  if (any) {
    env.max_left_width = max_left;
    env.max_right_width = max_right;
    env.imbalance = std::abs(max_left - max_right);
  }
  return env;
}

void check_inputs(const Trajectory& trajectory, const VehicleParams& params, double spacing) {
  if (!(spacing > 0.0)) throw ValidationError("envelope: outline spacing must be > 0");
  if (trajectory.poses.size() != trajectory.states.size() || trajectory.s.size() != trajectory.states.size())
    throw ValidationError("envelope: trajectory has no poses attached");
  if (trajectory.kind != kind_of(params)) throw ValidationError("envelope: trajectory and vehicle kinds differ");
}

}  // namespace

double BodyOutline::area() const {
  double a = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = corners[i];
    const auto& q = corners[(i + 1) % 4];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

void BodyOutline::validate() const {
  if (!(area() > 0.0)) throw ValidationError("outline must be counter-clockwise with nonzero area");
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = corners[i];
    const auto& b = corners[(i + 1) % 4];
    const auto& c = corners[(i + 2) % 4];
    const double dot = (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y);
    if (std::abs(dot) > 1e-9) throw ValidationError("outline is not a rectangle", i);
  }
}

BodyOutline tractor_outline(const BusParams& params) {
  return rectangle(params.L1r, params.L1 + params.L1f, 0.5 * params.W);
}

BodyOutline trailer_outline(const TractorTrailerParams& params) {
  return rectangle(params.L2r, params.L2, 0.5 * params.W_trailer);
}

SweptEnvelope swept_envelope(const RoadGeometry& geometry, const Trajectory& trajectory,
                             const VehicleParams& params, double spacing) {
  check_inputs(trajectory, params, spacing);
  const auto parts = bodies(params, spacing);
  const auto n = geometry.road().size();
  const auto steps = static_cast<std::ptrdiff_t>(trajectory.states.size());
  Bins total(n);
  std::exception_ptr failure;
#pragma omp parallel
  {
    Bins local(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < steps; ++i) {
      try {
        sweep_state(geometry, trajectory, params, parts, static_cast<std::size_t>(i), local);
      } catch (...) {
#pragma omp critical(envelope_failure)
        if (!failure) failure = std::current_exception();
      }
    }
#pragma omp critical(envelope_merge)
    total.merge(local);
  }
  if (failure) std::rethrow_exception(failure);
  return finish(geometry.road(), total);
}

SweptEnvelope swept_envelope_serial(const RoadGeometry& geometry, const Trajectory& trajectory,
                                    const VehicleParams& params, double spacing) {
  check_inputs(trajectory, params, spacing);
  const auto parts = bodies(params, spacing);
  Bins total(geometry.road().size());
  for (std::size_t i = 0; i < trajectory.states.size(); ++i)
    sweep_state(geometry, trajectory, params, parts, i, total);
  return finish(geometry.road(), total);
}

EnvelopeReport envelope_report(const SweptEnvelope& envelope, const RoadPath& road, const VehicleParams& params,
                               double margin_m) {
  EnvelopeReport r;
  r.max_left_width = envelope.max_left_width;
  r.max_right_width = envelope.max_right_width;
  r.imbalance = envelope.imbalance;
  r.margin_m = margin_m;

  std::optional<std::size_t> first, last;
  for (std::size_t j = 0; j < envelope.s.size(); ++j) {
    if (!envelope.covered(j)) continue;
    if (!first) first = j;
    last = j;
  }
  if (!first) return r;
  r.interior_start = envelope.s[*first] + margin_m;
  r.interior_end = envelope.s[*last] - margin_m;
  double ml = -std::numeric_limits<double>::infinity();
  double mr = -std::numeric_limits<double>::infinity();
  double kmin = std::numeric_limits<double>::infinity();
  double kmax = -std::numeric_limits<double>::infinity();
  for (std::size_t j = *first; j <= *last; ++j) {
    if (!envelope.covered(j) || envelope.s[j] < r.interior_start - 1e-9 || envelope.s[j] > r.interior_end + 1e-9)
      continue;
    r.has_interior = true;
    ml = std::max(ml, envelope.left[j]);
    mr = std::max(mr, -envelope.right[j]);
    kmin = std::min(kmin, road[j].kappa_gamma);
    kmax = std::max(kmax, road[j].kappa_gamma);
  }
  if (!r.has_interior) return r;
  r.interior_max_left = ml;
  r.interior_max_right = mr;
  r.interior_imbalance = std::abs(ml - mr);

  if (kmax - kmin <= 1e-12 * std::max(1.0, std::abs(kmax))) {
    const double kappa = kmax;
    if (std::abs(kappa) < kStraightCurvature) {
      r.expected_left = r.expected_right = 0.5 * tractor_of(params).W;
    } else {
      try {
        const auto sol = optimal_K(1.0 / kappa, params);
        const double inner = std::abs(sol.R_road) - std::abs(sol.R_left);
        const double outer = std::abs(sol.R_right) - std::abs(sol.R_road);
        r.expected_left = kappa > 0.0 ? inner : outer;
        r.expected_right = kappa > 0.0 ? outer : inner;
      } catch (const Error&) {
        // Geometry the vehicle cannot balance on: no expected width.
      }
    }
  }
  return r;
}

}  // namespace hdvplan
