#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mpflow/fields.hpp"
#include "toml.hpp"

namespace mpflow::cli {

struct SolverSettings {
  int steps = 200;
  double tolerance = 1e-9;
  int max_iter = 50;
  int threads = 1;
  double ellipticity_floor = 1e-6;
  double blowup_radius = 1e6;
};

struct EnsembleSettings {
  int samples = 0;  // 0 disables the ensemble
  int steps = 200;
  int raw = 0;      // samples whose trajectories go to ensemble.csv
};

struct OutputSettings {
  bool deterministic = true;
  bool mpp_forward = true;
  bool mpp_bvp = true;
  bool ensemble = true;
  bool figure = true;
};

struct EpdiffSettings {
  int n = 256;
  double alpha = 1.0;
  int steps = 200;
  int snapshot_every = 1;
  std::string output = "drift.json";
  Eigen::VectorXd u0;
  std::vector<Eigen::VectorXd> sigmas;
};

struct Scenario {
  std::string name;
  int dimension = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  SolverSettings solver;
  std::vector<VectorFieldSpec> noise;
  std::vector<Eigen::VectorXd> noise_centers;  // kernel centers, for plotting
  std::optional<VectorFieldSpec> drift;
  std::vector<Eigen::VectorXd> landmarks;
  std::optional<std::vector<Eigen::VectorXd>> bvp_targets;  // default: deterministic endpoints
  EnsembleSettings ensemble;
  OutputSettings outputs;
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> plot_bounds;
  std::optional<EpdiffSettings> epdiff;
  std::filesystem::path base_dir;

  NoiseModel noise_model() const;
  const VectorFieldSpec& drift_field() const;  // ConfigError when absent

  /// ConfigError naming `section` when the scenario lacks what `command` needs.
  void require(const std::string& section, const std::string& command) const;
};

/// Relative file references resolve against `base_dir`.
Scenario parse_scenario(const nlohmann::json& config, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& file);

}  // namespace mpflow::cli
