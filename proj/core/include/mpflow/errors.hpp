#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace mpflow {

/// Base of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition (dimension mismatch, non-finite input, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The cometric's smallest eigenvalue dropped below the noise model's floor.
class EllipticityViolation : public Error {
 public:
  EllipticityViolation(double t, Eigen::VectorXd x, double min_eigenvalue, double floor);

  double time() const { return t_; }
  const Eigen::VectorXd& point() const { return x_; }
  double min_eigenvalue() const { return min_eig_; }

 private:
  double t_;
  Eigen::VectorXd x_;
  double min_eig_;
};

/// An iterative solver hit its iteration cap.  `residual` is the last
/// convergence measure (endpoint residual, gradient max-norm, ...).
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// A trajectory left the configured bounding radius or became non-finite.
class BlowUp : public Error {
 public:
  BlowUp(const std::string& what, double t) : Error(what), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

}  // namespace mpflow
