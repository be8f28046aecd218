#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mpflow/mpp.hpp"
#include "mpflow/om.hpp"
#include "scenario.hpp"

namespace mpflow::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNonConvergence = 3,
  kExitEllipticity = 4,
};

struct RunOptions {
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false;
  std::ostream* log = nullptr;  // progress and status lines; nullptr for std::cerr
};

struct Tasks {
  bool deterministic = false;
  bool mpp_forward = false;
  bool mpp_bvp = false;
  bool ensemble = false;
  bool figure = false;
};

struct RunReport {
  int exit_code = kExitOk;
  std::vector<Path> deterministic;
  std::vector<PointResult> forward;
  std::vector<PointResult> bvp;
  std::vector<std::string> artifacts;  // file names written under RunOptions::out
};

/// Runs the requested tasks and writes their artifacts once everything has
/// been computed.  Per-landmark solver failures are recorded in the
/// artifacts and reflected in the exit code (ellipticity wins over
/// nonconvergence).
RunReport execute(const Scenario& scenario, const Tasks& tasks, const RunOptions& options);

/// The tasks enabled by the scenario's [outputs] table.
Tasks scenario_tasks(const Scenario& scenario);

/// The deterministic (zero-noise) flow by RK4 on the solver grid.
std::vector<Path> deterministic_flow(const Scenario& scenario);

/// Writes the drift file named in [epdiff]; OptU when sigma fields are given.
RunReport epdiff_drift(const Scenario& scenario, const RunOptions& options);

/// Re-renders figure.svg from the CSV files already in the output directory.
RunReport plot(const Scenario& scenario, const RunOptions& options);

/// Functional value of every trajectory in a path CSV.
std::vector<double> om_eval(const Scenario& scenario, const std::filesystem::path& csv, Quadrature rule);

/// Entry point shared by the executable and the tests.
int main_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mpflow::cli
