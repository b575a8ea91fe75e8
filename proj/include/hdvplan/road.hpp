#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace hdvplan {

inline constexpr double kDefaultHalfWidth = 1.75;

struct RoadSample {
  double s = 0.0;
  double kappa_gamma = 0.0;  // signed, positive = left turn
  double w_left = kDefaultHalfWidth;
  double w_right = kDefaultHalfWidth;
};

struct GlobalPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // (-pi, pi]
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

double normalize_angle(double a);

/// Lane centre sampled on a uniform arc-length grid s_i = i * delta_s.
class RoadPath {
 public:
  /// Validates every invariant and snaps sample arc lengths to the exact grid.
  /// Throws ValidationError naming the offending index.
  RoadPath(std::vector<RoadSample> samples, double delta_s, GlobalPose anchor = {},
           double kappa_bound = 1.0);

  const std::vector<RoadSample>& samples() const { return samples_; }
  const RoadSample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  /// N = sample count - 1.
  std::size_t segments() const { return samples_.size() - 1; }
  double delta_s() const { return delta_s_; }
  double length() const { return delta_s_ * static_cast<double>(segments()); }
  double s(std::size_t i) const { return delta_s_ * static_cast<double>(i); }
  const GlobalPose& anchor() const { return anchor_; }
  double max_half_width() const { return max_half_width_; }

  /// Piecewise-linear curvature, exact at grid points. Throws OutOfRange
  /// outside [0, s_N].
  double curvature_at(double s) const;

  /// Same road re-sampled on a new grid by curvature/width interpolation.
  RoadPath resampled(double delta_s) const;

 private:
  std::vector<RoadSample> samples_;
  double delta_s_;
  GlobalPose anchor_;
  double max_half_width_ = 0.0;
};

enum class RoadFormat { csv, json };

/// Parses a road file. Throws ParseError on malformed input and
/// ValidationError when a RoadPath invariant is violated.
RoadPath load_road(std::istream& in, RoadFormat format);
RoadPath load_road_file(const std::string& path);
void write_road(std::ostream& out, const RoadPath& road, RoadFormat format);

/// Global geometry of a road, reconstructed from curvature by midpoint-rule
/// integration. Beyond either end the path continues along its end tangent,
/// so trailing axles and overhangs past the grid still project.
class RoadGeometry {
 public:
  RoadGeometry(RoadPath road, int substeps = 10);

  const RoadPath& road() const { return road_; }
  int substeps() const { return substeps_; }

  double heading(double s) const;
  Point2 position(double s) const;
  GlobalPose pose(double s) const;
  /// Unit left normal at s.
  Point2 normal(double s) const;
  /// Point offset laterally from the centre line (positive = left).
  Point2 offset_point(double s, double lateral) const;

  /// One pose per road sample; pose 0 equals the anchor.
  std::vector<GlobalPose> sample_poses() const;

 private:
  RoadPath road_;
  int substeps_;
  double h_;
  std::vector<double> sample_heading_;
  std::vector<Point2> dense_;
};

std::shared_ptr<const RoadGeometry> reconstruct_global(const RoadPath& road, int substeps = 10);

struct Projection {
  double s = 0.0;
  double lateral = 0.0;  // signed, positive = left of the tangent
};

/// Orthogonal foot point of `p` on the path, found by safeguarded Newton
/// iteration started at `hint_s` (each step limited to 2 * delta_s).
/// Throws ProjectionDiverged if no foot point is found or the point is
/// further than the widest lane half-width + 50 m from the path.
Projection project_point(const RoadGeometry& geometry, Point2 p, double hint_s);

}  // namespace hdvplan
