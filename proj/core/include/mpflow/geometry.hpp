#pragma once

// Riemannian geometry induced by the noise fields.
//
// The cometric is g* = sum_j sigma_j sigma_j^T and g is its inverse.  The
// generator (1/2) sum_j sigma_j^2 + u of the Stratonovich flow is split as
// (1/2) Laplace-Beltrami + z, and the Onsager-Machlup potential is
//
//   f = (1/2) div_g z - S / 12 + (1/4) tr_g (d/dt g).
//
// Every function checks uniform ellipticity at (t, x) and throws
// EllipticityViolation if the smallest eigenvalue of g* is below the noise
// model's floor.  An eigenvalue within 10x of the floor emits a
// WarningKind::NearSingularCometric warning instead.

#include <Eigen/Core>

#include "mpflow/fields.hpp"
#include "mpflow/tensor.hpp"

namespace mpflow {

/// All geometric quantities at one (t, x).  Index conventions:
///   christoffel(k, i, j) = Gamma^k_ij
///   z_jacobian(i, j)     = d_i z^j
///   z_covariant(i, j)    = (nabla_i z)^j = d_i z^j + Gamma^j_ik z^k
///   grad_f               = g* (d f), the index-raised gradient
struct GeometryJet {
  Eigen::MatrixXd cometric;
  Eigen::MatrixXd metric;
  double det_metric = 0.0;
  Tensor3 christoffel;
  double scalar_curvature = 0.0;
  Eigen::MatrixXd metric_dt;
  Eigen::MatrixXd cometric_dt;
  Eigen::VectorXd z;
  Eigen::MatrixXd z_jacobian;
  Eigen::MatrixXd z_covariant;
  double f = 0.0;
  Eigen::VectorXd grad_f;
};

struct MetricDerivatives {
  Eigen::MatrixXd metric;
  Tensor3 d_metric;   // (k, i, j) = d_k g_ij
  Tensor4 d2_metric;  // (l, k, i, j) = d_l d_k g_ij
  Eigen::MatrixXd metric_dt;
};

struct DriftCorrection {
  Eigen::VectorXd z;
  Eigen::MatrixXd jacobian;   // (i, j) = d_i z^j
  Eigen::MatrixXd covariant;  // (i, j) = (nabla_i z)^j
};

struct OmPotential {
  double f = 0.0;
  Eigen::VectorXd df;      // partial derivatives d_i f
  Eigen::VectorXd grad_f;  // g* df
};

/// phi(y) = c + b.y + (1/2) y^T A y, with A symmetric.
struct QuadraticTestFunction {
  double c = 0.0;
  Eigen::VectorXd b;
  Eigen::MatrixXd A;

  double value(const Eigen::VectorXd& y) const { return c + b.dot(y) + 0.5 * y.dot(A * y); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& y) const { return b + A * y; }
};

Eigen::MatrixXd cometric(const NoiseModel& noise, double t, const Eigen::VectorXd& x);

/// g = (g*)^{-1} with spatial derivatives from the inversion identity
/// dg = -g (dg*) g and its derivative; metric_dt = -g (d/dt g*) g.
MetricDerivatives metric_and_derivatives(const NoiseModel& noise, double t, const Eigen::VectorXd& x);

Tensor3 christoffel(const NoiseModel& noise, double t, const Eigen::VectorXd& x);

double scalar_curvature(const NoiseModel& noise, double t, const Eigen::VectorXd& x);

/// z^j = u^j + 1/2 sum_r sigma_r^i d_i sigma_r^j - 1/2 (d_i g*^{ij} + 1/2 g*^{ij} d_i log det g).
DriftCorrection drift_z(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                        const Eigen::VectorXd& x);

/// ((1/2) sum_j sigma_j^2 + u) phi at x, computed directly from the noise-field jets.
double generator_apply(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                       const Eigen::VectorXd& x, const QuadraticTestFunction& phi);

/// Laplace-Beltrami operator of g applied to phi at x.
double laplace_beltrami_apply(const NoiseModel& noise, double t, const Eigen::VectorXd& x,
                              const QuadraticTestFunction& phi);

OmPotential om_potential(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                         const Eigen::VectorXd& x);

GeometryJet geometry_jet(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                         const Eigen::VectorXd& x);

}  // namespace mpflow
