#pragma once

// Most probable paths: the Euler-Lagrange system of the Onsager-Machlup
// functional, written in (x, a) with a = dx/dt - z(t, x):
//
//   dx/dt = a + z
//   da/dt = -Gamma(dx/dt, a) - (d/dt g)(a, .)^# - (nabla z)^* a + grad f
//
// where ^# raises an index with g* and (nabla z)^* is the g-adjoint of the
// covariant derivative of z.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mpflow/errors.hpp"
#include "mpflow/fields.hpp"
#include "mpflow/om.hpp"

namespace mpflow {

struct MppState {
  Eigen::VectorXd x;
  Eigen::VectorXd a;
};

struct MppDerivative {
  Eigen::VectorXd dx;
  Eigen::VectorXd da;
};

MppDerivative curve_rhs(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const MppState& state);

struct IntegrateOptions {
  double blowup_radius = 1e6;  // BlowUp once |x| exceeds this
};

/// Classic RK4 with N uniform steps on [0, T], starting from velocity v0
/// (so a_0 = v0 - z(0, x0)).  The returned path carries the exact
/// velocities a + z at the nodes.
Path integrate_mpp(const NoiseModel& noise, const VectorFieldSpec& drift, const Eigen::VectorXd& x0,
                   const Eigen::VectorXd& v0, double T, int N, const IntegrateOptions& options = {});

struct ShootingProblem {
  Eigen::VectorXd x0;
  Eigen::VectorXd xT;
  double T = 1.0;
  double tolerance = 1e-9;  // on |x(T) - xT|
  int max_iter = 50;
  std::optional<Eigen::VectorXd> initial_velocity;  // default (xT - x0) / T

  void validate() const;
};

struct ShootingResult {
  Eigen::VectorXd v0;
  Path path;
  double residual = 0.0;
  int iterations = 0;
};

/// Thrown by shoot() when the iteration cap is hit; carries the best iterate.
class ShootingFailure : public NonConvergence {
 public:
  ShootingFailure(const std::string& what, ShootingResult best)
      : NonConvergence(what, best.residual, best.iterations), best_(std::move(best)) {}
  const ShootingResult& best() const { return best_; }

 private:
  ShootingResult best_;
};

/// Damped Newton on the endpoint map v0 -> x(T; v0) with a forward-difference
/// Jacobian, falling back to Levenberg-Marquardt steps when Newton stalls.
ShootingResult shoot(const NoiseModel& noise, const VectorFieldSpec& drift, const ShootingProblem& problem, int N,
                     const IntegrateOptions& options = {});

enum class PointStatus { Ok, NonConvergence, EllipticityViolation, BlowUp, Failed };

const char* to_string(PointStatus status);

struct PointResult {
  PointStatus status = PointStatus::Ok;
  std::string message;
  Path path;              // empty when no trajectory could be produced
  Eigen::VectorXd v0;
  double residual = 0.0;  // endpoint residual (shooting only)
  int iterations = 0;
  double om_value = 0.0;  // trapezoidal functional along path
};

struct MppFlowOptions {
  int threads = 1;
  double tolerance = 1e-9;
  int max_iter = 50;
  /// Forward mode only: initial a per point (default zero, i.e. v0 = z(0, x0)).
  std::vector<Eigen::VectorXd> initial_a;
  IntegrateOptions integrate;
};

/// Most probable trajectories of a set of points.  Without targets each
/// point is integrated forward; with targets each point is shot to its
/// target.  Points are independent, so a failure only marks that entry.
std::vector<PointResult> mpp_flow(const NoiseModel& noise, const VectorFieldSpec& drift,
                                  const std::vector<Eigen::VectorXd>& points,
                                  const std::optional<std::vector<Eigen::VectorXd>>& targets, double T, int N,
                                  const MppFlowOptions& options = {});

}  // namespace mpflow
