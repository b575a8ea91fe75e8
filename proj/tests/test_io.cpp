#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "hdvplan/errors.hpp"
#include "hdvplan/io.hpp"
#include "json.hpp"

using namespace hdvplan;
using doctest::Approx;
using nlohmann::json;

namespace {

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

}  // namespace

TEST_CASE("trajectory csv round trip") {
  const RoadGeometry g(fixtures::ring(15.0, 60.0, 0.5, 5.0));
  for (const VehicleParams& p : {VehicleParams{fixtures::bus()}, VehicleParams{fixtures::tractor_trailer()}}) {
    const std::vector<double> u(40, 0.06);
    const auto traj = simulate(g, 30, {0.1, 0.02, 0.05, 0.0}, u, p);
    std::stringstream ss;
    write_trajectory_csv(ss, traj);
    const auto text = ss.str();
    CHECK(first_line(text) == "s,e_y,e_psi,beta1,e_y_aux,kappa,x,y,heading");
    const auto back = read_trajectory_csv(ss);
    CHECK(back.kind == kind_of(p));
    REQUIRE(back.states.size() == traj.states.size());
    CHECK(back.kappa.size() == traj.kappa.size());
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
      CHECK(back.states[i] == traj.states[i]);
      CHECK(back.s[i] == traj.s[i]);
      CHECK(back.poses[i].x == traj.poses[i].x);
    }
    if (kind_of(p) == VehicleKind::bus) CHECK(text.find("\n15,0.1,0.02,,") != std::string::npos);
  }
}

TEST_CASE("bad trajectory csv") {
  std::istringstream in("s,e_y\n0,0\n");
  CHECK_THROWS_AS(read_trajectory_csv(in), ParseError);
  std::istringstream in2("s,e_y,e_psi,beta1,e_y_aux,kappa,x,y,heading\n0,x,0,,0,0,0,0,0\n");
  CHECK_THROWS_AS(read_trajectory_csv(in2), ParseError);
}

TEST_CASE("vehicle json") {
  const auto bus = parse_vehicle_json(R"({"kind":"bus","L1":4,"L1f":1,"L1r":1.5,"W":2.5,"kappa_max":0.2,"kappa_rate_max":0.1})");
  CHECK(kind_of(bus) == VehicleKind::bus);
  CHECK(tractor_of(bus).L1 == 4.0);
  const auto again = parse_vehicle_json(vehicle_json(bus));
  CHECK(tractor_of(again).W == 2.5);

  const auto tt = parse_vehicle_json(
      R"({"kind":"tractor_trailer","L1":3.8,"L1f":1.4,"L1r":1,"W":2.4,"kappa_max":0.2,"kappa_rate_max":0.1,"L2":7,"L2r":1.5,"M1":-0.3})");
  REQUIRE(kind_of(tt) == VehicleKind::tractor_trailer);
  CHECK(std::get<TractorTrailerParams>(tt).W_trailer == 2.4);

  CHECK_THROWS_AS(parse_vehicle_json(R"({"kind":"bus","L1":4,"L1f":1,"L1r":1.5,"W":2.5,"kappa_max":0.2,"kappa_rate_max":0.1,"L2":3})"), ParseError);
  CHECK_THROWS_AS(parse_vehicle_json(R"({"kind":"car"})"), ParseError);
  CHECK_THROWS_AS(parse_vehicle_json(R"({"kind":"bus","L1":4})"), ParseError);
  CHECK_THROWS_AS(parse_vehicle_json("{"), ParseError);
  CHECK_THROWS_AS(parse_vehicle_json(R"({"kind":"bus","L1":-4,"L1f":1,"L1r":1.5,"W":2.5,"kappa_max":0.2,"kappa_rate_max":0.1})"),
                  ValidationError);
}

TEST_CASE("geometric solution json") {
  const auto doc = json::parse(geometric_solution_json(optimal_K(12.0, VehicleParams{fixtures::tractor_trailer()})));
  for (const char* key : {"kind", "R_road", "R1", "R2", "R_left", "R_right", "e_y", "e_y_aux", "beta1", "K"})
    CHECK(doc.contains(key));
  CHECK(doc["kind"] == "tractor_trailer");
  const auto bus = json::parse(geometric_solution_json(optimal_K(8.0, VehicleParams{fixtures::bus()})));
  CHECK(bus["R1"].get<double>() == Approx(271.0 / 37.0));
  CHECK(bus["R2"].is_null());
}

TEST_CASE("k schedule and envelope csv") {
  const auto road = fixtures::road_from_pieces({{5.0, 0.0}, {5.0, 0.05}}, 0.5);
  const VehicleParams bus = fixtures::bus();
  std::stringstream ss;
  write_k_schedule_csv(ss, road, k_schedule(road, bus));
  CHECK(first_line(ss.str()) == "s,kappa,K");
  int rows = 0;
  for (std::string line; std::getline(ss, line);) ++rows;
  CHECK(rows == 1 + static_cast<int>(road.size()));

  const RoadGeometry g(fixtures::straight(60.0, 0.5));
  const auto traj = simulate(g, 20, {}, std::vector<double>(20, 0.0), bus);
  const auto env = swept_envelope(g, traj, bus);
  std::stringstream es;
  write_envelope_csv(es, env);
  CHECK(first_line(es.str()) == "s,left,right");
  CHECK(es.str().find("nan") == std::string::npos);

  const auto report = json::parse(envelope_report_json(envelope_report(env, g.road(), bus, 2.0)));
  for (const char* key : {"max_left_width", "max_right_width", "imbalance", "margin_m", "interior"})
    CHECK(report.contains(key));
}

TEST_CASE("stats json separates timing") {
  const auto geometry = reconstruct_global(fixtures::straight(120.0, 0.5));
  PlanConfig config;
  config.horizon_m = 50.0;
  const auto r = receding_horizon_run(geometry, {}, VehicleParams{fixtures::bus()}, config);
  const auto stats = drive_stats_json(r, config);
  CHECK(stats.find("solve_s") == std::string::npos);
  CHECK(stats.find("time") == std::string::npos);
  const auto doc = json::parse(stats);
  CHECK(doc["mode"] == "sqp");
  CHECK(doc["windows"] == r.windows.size());
  CHECK(doc["per_window"].size() == r.windows.size());
  CHECK(doc["config"]["horizon_m"] == 50.0);

  const auto timing = json::parse(timing_json(r, config));
  CHECK(timing["mean_solve_s"].get<double>() == Approx(r.mean_solve_s()));
  CHECK(timing["max_solve_s"].get<double>() == Approx(r.max_solve_s()));
  CHECK(timing["solve_s"].size() == r.windows.size());

  config.mode = PlanMode::rti;
  const auto rti = json::parse(drive_stats_json(receding_horizon_run(geometry, {}, VehicleParams{fixtures::bus()}, config), config));
  CHECK(rti["mode"] == "rti");
  CHECK(rti["qp_solves_per_window"] == 1.0);
}

TEST_CASE("svg output") {
  const RoadGeometry g(fixtures::ring(15.0, 60.0, 0.5, 5.0));
  const VehicleParams bus = fixtures::bus();
  const auto traj = simulate(g, 10, {}, std::vector<double>(60, 1.0 / 15.0), bus);
  const auto env = swept_envelope(g, traj, bus);
  std::stringstream ss;
  write_svg(ss, g, &traj, &env);
  const auto svg = ss.str();
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
}
