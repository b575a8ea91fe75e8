#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "hdvplan/road.hpp"
#include "hdvplan/vehicle.hpp"

namespace fixtures {

inline hdvplan::BusParams bus() {
  hdvplan::BusParams p;
  p.L1 = 4.0;
  p.L1f = 1.0;
  p.L1r = 1.5;
  p.W = 2.5;
  p.kappa_max = 0.2;
  p.kappa_rate_max = 0.1;
  return p;
}

inline hdvplan::TractorTrailerParams tractor_trailer() {
  hdvplan::TractorTrailerParams p;
  p.tractor.L1 = 3.8;
  p.tractor.L1f = 1.4;
  p.tractor.L1r = 1.0;
  p.tractor.W = 2.5;
  p.tractor.kappa_max = 0.2;
  p.tractor.kappa_rate_max = 0.1;
  p.L2 = 7.0;
  p.L2r = 1.5;
  p.M1 = -0.3;
  p.W_trailer = 2.5;
  return p;
}

/// Curvature profile of straight / clothoid / arc pieces on a uniform grid.
struct Piece {
  double length;
  double kappa_end;  // linear ramp from the previous curvature to this value
};

inline hdvplan::RoadPath road_from_pieces(const std::vector<Piece>& pieces, double ds, double half_width = 3.5,
                                          double kappa0 = 0.0) {
  std::vector<hdvplan::RoadSample> samples;
  double k = kappa0;
  samples.push_back({0.0, k, half_width, half_width});
  std::size_t i = 0;
  for (const auto& p : pieces) {
    const auto n = static_cast<std::size_t>(std::llround(p.length / ds));
    const double k0 = k;
    for (std::size_t j = 1; j <= n; ++j) {
      ++i;
      k = k0 + (p.kappa_end - k0) * static_cast<double>(j) / static_cast<double>(n);
      samples.push_back({static_cast<double>(i) * ds, k, half_width, half_width});
    }
  }
  return hdvplan::RoadPath(std::move(samples), ds);
}

inline hdvplan::RoadPath ring(double R, double length, double ds, double half_width = 3.5) {
  return road_from_pieces({{length, 1.0 / R}}, ds, half_width, 1.0 / R);
}

inline hdvplan::RoadPath straight(double length, double ds, double half_width = 3.5) {
  return road_from_pieces({{length, 0.0}}, ds, half_width);
}

}  // namespace fixtures
