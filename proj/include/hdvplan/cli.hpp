#pragma once

#include <optional>
#include <string>

#include "hdvplan/planner.hpp"
#include "hdvplan/vehicle.hpp"

namespace hdvplan::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,         // I/O, parse, validation
  kInfeasibleGeometry = 2,
  kNoConvergence = 3,      // results still written
  kSolverError = 4,        // model domain, projection or QP infeasibility
};

struct ExperimentConfig {
  std::string road_path;
  std::optional<VehicleParams> vehicle;
  PlanConfig plan;
  bool delta_s_set = false;  // otherwise the road's own spacing is used
  std::string output_dir = "out";
  VehicleState start;
  std::optional<double> kappa_start;
  double start_s = 0.0;
  double outline_spacing = 0.05;
  double margin_m = 20.0;
  bool svg = false;
  bool timing = false;
  std::optional<double> radius;
  std::optional<double> curvature;
  std::string trajectory_path;
};

/// Reads a JSON experiment file. Relative paths inside it resolve against
/// the file's directory. Throws ParseError / ValidationError.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = "");

int cmd_tune(const ExperimentConfig& config);
int cmd_plan(const ExperimentConfig& config);
int cmd_drive(const ExperimentConfig& config);
int cmd_envelope(const ExperimentConfig& config);
int cmd_compare(const ExperimentConfig& config);

/// Maps the exception in flight to an exit code and logs it.
int report_exception();

int main(int argc, char** argv);

}  // namespace hdvplan::cli
