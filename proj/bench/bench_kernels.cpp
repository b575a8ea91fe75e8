// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "hdvplan/envelope.hpp"
#include "hdvplan/planner.hpp"

using namespace hdvplan;

namespace {

struct DriveCase {
  std::shared_ptr<const RoadGeometry> geometry;
  VehicleParams params;
  Trajectory trajectory;
};

const DriveCase& drive_case(VehicleKind kind) {
  static const auto make = [](VehicleKind k) {
    DriveCase c;
    c.geometry = reconstruct_global(fixtures::ring(20.0, 300.0, 0.5, 5.0));
    c.params = k == VehicleKind::bus ? VehicleParams{fixtures::bus()} : VehicleParams{fixtures::tractor_trailer()};
    PlanConfig config;
    c.trajectory = receding_horizon_run(c.geometry, {}, c.params, config).trajectory;
    return c;
  };
  static const DriveCase bus = make(VehicleKind::bus);
  static const DriveCase tt = make(VehicleKind::tractor_trailer);
  return kind == VehicleKind::bus ? bus : tt;
}

template <bool Parallel>
void BM_Envelope(benchmark::State& state) {
  const auto& c = drive_case(static_cast<VehicleKind>(state.range(0)));
  for (auto _ : state) {
    auto env = Parallel ? swept_envelope(*c.geometry, c.trajectory, c.params)
                        : swept_envelope_serial(*c.geometry, c.trajectory, c.params);
    benchmark::DoNotOptimize(env.imbalance);
  }
}

struct HorizonCase {
  PlanProblem problem;
  std::vector<VehicleState> states;
  std::vector<double> kappa;
};

const HorizonCase& horizon_case(VehicleKind kind) {
  static const auto make = [](VehicleKind k) {
    HorizonCase h;
    const auto geometry = reconstruct_global(fixtures::ring(20.0, 150.0, 0.5, 5.0));
    const VehicleParams params =
        k == VehicleKind::bus ? VehicleParams{fixtures::bus()} : VehicleParams{fixtures::tractor_trailer()};
    const auto schedule = k_schedule(geometry->road(), params);
    h.problem = make_problem(geometry, 20, 200, {}, 0.05, schedule, params);
    h.kappa.assign(200, 0.05);
    h.states = simulate(*geometry, 20, {}, h.kappa, params).states;
    return h;
  };
  static const HorizonCase bus = make(VehicleKind::bus);
  static const HorizonCase tt = make(VehicleKind::tractor_trailer);
  return kind == VehicleKind::bus ? bus : tt;
}

template <bool Parallel>
void BM_Linearize(benchmark::State& state) {
  const auto& h = horizon_case(static_cast<VehicleKind>(state.range(0)));
  for (auto _ : state) {
    auto lin = Parallel ? linearize_horizon(h.problem, h.states, h.kappa)
                        : linearize_horizon_serial(h.problem, h.states, h.kappa);
    benchmark::DoNotOptimize(lin.aux.back().base);
  }
}

}  // namespace

BENCHMARK(BM_Envelope<true>)->Name("envelope/parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Envelope<false>)->Name("envelope/serial")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Linearize<true>)->Name("linearize/parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Linearize<false>)->Name("linearize/serial")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
