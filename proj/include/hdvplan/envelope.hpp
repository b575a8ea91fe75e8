#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "hdvplan/road.hpp"
#include "hdvplan/vehicle.hpp"

namespace hdvplan {

/// Rectangle in body frame (x forward from the reference axle, y left),
/// corners counter-clockwise.
struct BodyOutline {
  std::array<Point2, 4> corners;

  double area() const;
  /// Throws ValidationError unless the corners form a CCW rectangle of
  /// nonzero area.
  void validate() const;
};

/// Bus or tractor body around the rear axle: -L1r .. L1 + L1f, +-W/2.
BodyOutline tractor_outline(const BusParams& params);
/// Trailer body around the trailer axle: -L2r .. L2 (the hitch), +-W_trailer/2.
BodyOutline trailer_outline(const TractorTrailerParams& params);

inline constexpr double kDefaultOutlineSpacing = 0.05;

/// Per road-sample lateral extent of the swept body. Bin j collects edge
/// samples projecting within delta_s/2 of s_j.
struct SweptEnvelope {
  double delta_s = 0.0;
  std::vector<double> s;
  std::vector<double> left;    // max signed lateral, NaN when uncovered
  std::vector<double> right;   // min signed lateral, NaN when uncovered
  double max_left_width = 0.0;
  double max_right_width = 0.0;
  double imbalance = 0.0;

  bool covered(std::size_t j) const { return left[j] == left[j]; }
};

/// Places the outline(s) at every trajectory state and bins projected edge
/// samples. Parallel over states; identical to the serial version.
SweptEnvelope swept_envelope(const RoadGeometry& geometry, const Trajectory& trajectory,
                             const VehicleParams& params, double spacing = kDefaultOutlineSpacing);
SweptEnvelope swept_envelope_serial(const RoadGeometry& geometry, const Trajectory& trajectory,
                                    const VehicleParams& params, double spacing = kDefaultOutlineSpacing);

struct EnvelopeReport {
  double max_left_width = 0.0;
  double max_right_width = 0.0;
  double imbalance = 0.0;
  double margin_m = 0.0;
  double interior_start = 0.0;
  double interior_end = 0.0;
  bool has_interior = false;
  double interior_max_left = 0.0;
  double interior_max_right = 0.0;
  double interior_imbalance = 0.0;
  /// Set when the road curvature is constant over the interior: W/2 on a
  /// straight, the balanced swept widths on an arc.
  std::optional<double> expected_left;
  std::optional<double> expected_right;
};

inline constexpr double kDefaultTransientMargin = 20.0;

EnvelopeReport envelope_report(const SweptEnvelope& envelope, const RoadPath& road, const VehicleParams& params,
                               double margin_m = kDefaultTransientMargin);

}  // namespace hdvplan
