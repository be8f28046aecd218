#pragma once

// Three-panel figure: drift at t = 0 with noise centers, forward most
// probable paths, and boundary-value most probable paths.  Deterministic
// trajectories (red) are defined once and referenced from the two path
// panels; most probable paths are blue, noise centers green.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mpflow/fields.hpp"
#include "mpflow/om.hpp"

namespace mpflow::cli {

/// Path lists are indexed by landmark; an empty path (failed solve) is skipped.
struct FigureData {
  std::string title;
  int dimension = 2;
  std::vector<Path> deterministic;
  std::vector<Path> forward;
  std::vector<Path> bvp;
  std::vector<Eigen::VectorXd> centers;
  const VectorFieldSpec* drift = nullptr;  // arrows at t = 0 (2D only)
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> bounds;
};

/// In 1D the panels plot x against t; in 3D the first two coordinates.
std::string render_figure(const FigureData& data);

}  // namespace mpflow::cli
