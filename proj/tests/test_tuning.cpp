#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "hdvplan/errors.hpp"
#include "hdvplan/tuning.hpp"
#include "tuning_oracle.hpp"

using namespace hdvplan;
using doctest::Approx;

TEST_CASE("bus radius on the fixture vehicle") {
  const auto p = fixtures::bus();
  const double R1 = bus_optimal_radius(8.0, p);
  CHECK(R1 == Approx(271.0 / 37.0).epsilon(1e-14));
  CHECK(std::abs(R1 - *oracle::bus_radius(8.0, p)) < 1e-9);
}

TEST_CASE("bus radius special cases") {
  auto p = fixtures::bus();
  p.L1 = 1e-9;
  p.L1f = 0.0;
  CHECK(bus_optimal_radius(10.0, p) == Approx(10.0).epsilon(1e-12));
  p = fixtures::bus();
  p.W = 1e-12;
  const double L = p.L1 + p.L1f;
  CHECK(bus_optimal_radius(10.0, p) == Approx(10.0 - L * L / 40.0).epsilon(1e-10));
}

TEST_CASE("bus solution fields") {
  const auto p = fixtures::bus();
  const auto sol = bus_optimal_K(8.0, p);
  const double R1 = 271.0 / 37.0;
  const double front = std::hypot(p.L1, R1);
  CHECK(sol.e_y == Approx(8.0 - R1));
  CHECK(sol.e_y_aux == Approx(8.0 - front));
  CHECK(sol.K == Approx((front - 8.0) / (8.0 - R1)));
  CHECK(sol.e_y == Approx(0.6757).epsilon(1e-4));
  CHECK(sol.K * sol.e_y + sol.e_y_aux == Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(sol.R_left) < 8.0);
  CHECK(std::abs(sol.R_right) > 8.0);
  CHECK(std::abs((sol.R_road - sol.R_left) - (sol.R_right - sol.R_road)) < 1e-9);
}

TEST_CASE("right turns mirror left turns") {
  for (const VehicleParams& p : {VehicleParams{fixtures::bus()}, VehicleParams{fixtures::tractor_trailer()}}) {
    const auto l = optimal_K(12.0, p);
    const auto r = optimal_K(-12.0, p);
    CHECK(r.K == Approx(l.K));
    CHECK(r.e_y == Approx(-l.e_y));
    CHECK(r.e_y_aux == Approx(-l.e_y_aux));
    CHECK(std::abs(r.R1) == Approx(std::abs(l.R1)));
    if (l.beta1) CHECK(*r.beta1 == Approx(-*l.beta1));
  }
}

TEST_CASE("defining identity over random draws") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> R(6.0, 60.0), W(1.8, 2.6), L1(2.5, 6.0), L1f(0.5, 2.5);
  int feasible = 0;
  for (int k = 0; k < 100; ++k) {
    auto p = fixtures::bus();
    p.W = W(rng);
    p.L1 = L1(rng);
    p.L1f = L1f(rng);
    p.kappa_max = 0.25;
    try {
      const auto sol = bus_optimal_K(R(rng), p);
      ++feasible;
      CHECK(sol.K > 0.0);
      CHECK(std::abs(sol.K * sol.e_y + sol.e_y_aux) < 1e-12);
    } catch (const GeometryInfeasible&) {
    }
  }
  CHECK(feasible > 50);
}

TEST_CASE("infeasible radii") {
  const auto bus = fixtures::bus();
  CHECK_THROWS_AS(bus_optimal_radius(1.0, bus), GeometryInfeasible);
  CHECK_THROWS_AS(bus_optimal_radius(5.2, bus), GeometryInfeasible);  // below 1/kappa_max
  CHECK_THROWS_AS(tt_optimal_radius(3.0, fixtures::tractor_trailer()), GeometryInfeasible);
}

TEST_CASE("tractor-trailer radius matches the scan oracle") {
  const auto p = fixtures::tractor_trailer();
  const double R1 = tt_optimal_radius(12.0, p);
  const auto ref = oracle::tt_radius(12.0, p);
  REQUIRE(ref.has_value());
  CHECK(std::abs(R1 - *ref) < 1e-8);
  CHECK(std::abs(tt_balance_rhs(R1, p) - 24.0) < 1e-10);
  const auto sol = tt_optimal_K(12.0, p);
  CHECK(std::abs((sol.R_road - sol.R_left) - (sol.R_right - sol.R_road)) < 1e-8);
  CHECK(sol.e_y < 0.0);
  CHECK(sol.e_y_aux > 0.0);
  const double R2 = std::sqrt(R1 * R1 + p.M1 * p.M1 - p.L2 * p.L2);
  CHECK(*sol.R2 == Approx(R2));
  CHECK(*sol.beta1 == Approx(std::atan(p.M1 / R1) + std::atan(p.L2 / R2)));
  // K = -e_y_aux / e_y
  CHECK(sol.K == Approx((12.0 - R2) / (R1 - 12.0)));
  CHECK(std::abs(sol.K * sol.e_y + sol.e_y_aux) < 1e-12);
}

TEST_CASE("tractor-trailer collapse to a point vehicle") {
  auto p = fixtures::tractor_trailer();
  p.M1 = -0.5;
  p.L2 = 0.5;
  p.tractor.L1 = 1e-9;
  p.tractor.L1f = 0.0;
  p.tractor.W = 1e-9;
  CHECK(tt_optimal_radius(10.0, p) == Approx(10.0).epsilon(1e-8));

  // K is 0/0 for a vanishing trailer; short trailers are refused.
  p = fixtures::tractor_trailer();
  p.M1 = 0.0;
  p.L2 = 1e-4;
  CHECK_THROWS_AS(tt_optimal_K(10.0, p), GeometryInfeasible);
}

TEST_CASE("balance right-hand side is increasing") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> R1(7.5, 40.0);
  const auto p = fixtures::tractor_trailer();
  for (int k = 0; k < 100; ++k) {
    const double r = R1(rng);
    CHECK(tt_balance_rhs(r + 1.0, p) > tt_balance_rhs(r, p));
  }
}

TEST_CASE("large radii approach the straight road") {
  for (const VehicleParams& p : {VehicleParams{fixtures::bus()}, VehicleParams{fixtures::tractor_trailer()}}) {
    const auto sol = optimal_K(1e6, p);
    CHECK(std::abs(sol.e_y) < 1e-4);
    CHECK(std::abs(sol.e_y_aux) < 1e-4);
    if (sol.beta1) CHECK(std::abs(*sol.beta1) < 1e-4);
    CHECK(std::isfinite(sol.K));
    CHECK(sol.K > 0.0);
  }
}

TEST_CASE("K schedule") {
  const VehicleParams bus = fixtures::bus();
  const auto s = k_schedule(fixtures::straight(50.0, 0.5), bus);
  CHECK(s.values.size() == 101);
  for (double k : s.values) CHECK(k == kDefaultK);

  const auto ring = k_schedule(fixtures::ring(15.0, 50.0, 0.5), bus);
  const double K15 = optimal_K(15.0, bus).K;
  for (double k : ring.values) CHECK(k == K15);

  const auto road = fixtures::road_from_pieces({{10.0, 0.0}, {20.0, 1.0 / 12.0}, {30.0, 1.0 / 12.0}, {20.0, 0.0}}, 0.5);
  const auto sched = k_schedule(road, VehicleParams{fixtures::tractor_trailer()});
  // Entry clothoid: samples 21..60, skipping those below the straight threshold.
  int direction = 0;
  for (std::size_t i = 22; i < 60; ++i) {
    if (std::abs(road[i - 1].kappa_gamma) < kStraightCurvature) continue;
    const double d = sched.values[i] - sched.values[i - 1];
    const int sign = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (direction == 0) direction = sign;
    CHECK(sign == direction);
  }
  CHECK(direction != 0);

  const auto tight = fixtures::road_from_pieces({{10.0, 0.0}, {10.0, 0.4}}, 0.5);
  try {
    k_schedule(tight, bus);
    FAIL("expected GeometryInfeasible");
  } catch (const GeometryInfeasible& e) {
    CHECK(e.index().has_value());
  }
}
