#pragma once

// Onsager-Machlup integrand and functional along discretized paths, and a
// direct variational minimizer used to cross-check the path ODE.
//
//   H(t, x, v) = 1/2 (v - z)^T g (v - z) + f

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mpflow/fields.hpp"

namespace mpflow {

/// Discretized curve t_k -> x_k.  `points` holds one node per row.
/// `velocities` is optional (same shape) and only filled by integrators
/// that know the exact derivative.
struct Path {
  std::vector<double> times;
  Eigen::MatrixXd points;
  Eigen::MatrixXd velocities;

  int dimension() const { return static_cast<int>(points.cols()); }
  int nodes() const { return static_cast<int>(points.rows()); }
  double horizon() const { return times.back() - times.front(); }
  Eigen::VectorXd point(int k) const { return points.row(k).transpose(); }

  /// Throws InvalidArgument unless there are at least 3 nodes, times
  /// increase strictly and all points are finite.
  void validate() const;

  static Path straight_line(const Eigen::VectorXd& from, const Eigen::VectorXd& to, double T, int intervals);
};

enum class Quadrature {
  /// Trapezoidal rule on nodal H with centered-difference velocities
  /// (one-sided second order at the endpoints).
  Trapezoid,
  /// Segment midpoints with forward-difference segment velocities.
  Midpoint,
};

double om_integrand(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& v);

double om_integral(const NoiseModel& noise, const VectorFieldSpec& drift, const Path& path,
                   Quadrature rule = Quadrature::Trapezoid);

/// Gradient of the discretized functional with respect to every node
/// (rows match path.points; endpoint rows included).
Eigen::MatrixXd om_gradient(const NoiseModel& noise, const VectorFieldSpec& drift, const Path& path,
                            Quadrature rule = Quadrature::Trapezoid);

struct DirectMinimizeOptions {
  double gradient_tolerance = 1e-8;  // max-norm over interior nodes
  int max_iterations = 10000;
  int lbfgs_memory = 20;
  bool require_convergence = true;  // throw NonConvergence when the cap is hit
};

struct DirectMinimizeResult {
  Path path;
  double om_value = 0.0;       // minimized (midpoint) functional
  double gradient_norm = 0.0;  // final max-norm
  int iterations = 0;
  bool converged = false;
};

/// Minimizes the midpoint-discretized functional over the interior nodes of
/// a uniform N-interval grid on [0, T] with the endpoints pinned.  `init`
/// defaults to the straight line and must have matching endpoints.
DirectMinimizeResult direct_minimize(const NoiseModel& noise, const VectorFieldSpec& drift,
                                     const Eigen::VectorXd& x0, const Eigen::VectorXd& xT, double T, int N,
                                     const std::optional<Path>& init = std::nullopt,
                                     const DirectMinimizeOptions& options = {});

}  // namespace mpflow
