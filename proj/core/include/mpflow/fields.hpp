#pragma once

// Parametric vector fields on open subsets of R^d (d = 1, 2, 3) with exact
// spatial jets up to third order and a first time derivative.

#include <memory>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "mpflow/spline.hpp"
#include "mpflow/tensor.hpp"

namespace mpflow {

inline constexpr int kMaxDimension = 3;

/// Smooth scalar schedule s(t) used to make a field time dependent.
class Schedule {
 public:
  struct Polynomial {
    std::vector<double> coefficients;  // c0 + c1 t + c2 t^2 + ...
  };
  struct Sine {
    double offset = 1.0;
    double amplitude = 0.0;
    double frequency = 1.0;
    double phase = 0.0;
  };

  Schedule() : rule_(Polynomial{{1.0}}) {}
  Schedule(Polynomial p) : rule_(std::move(p)) {}  // NOLINT
  Schedule(Sine s) : rule_(s) {}                   // NOLINT

  double value(double t) const;
  double derivative(double t) const;

  const std::variant<Polynomial, Sine>& rule() const { return rule_; }

 private:
  std::variant<Polynomial, Sine> rule_;
};

class VectorFieldSpec;

namespace field {

struct Constant {
  Eigen::VectorXd value;
};

/// amplitude * exp(-|x - center|^2 / (2 width^2))
struct GaussianKernel {
  Eigen::VectorXd center;
  Eigen::VectorXd amplitude;
  double width = 1.0;
};

/// exp(-beta |x|^2) e_axis; d fields of this kind give the conformal metric e^{2 beta |x|^2} I.
struct ConformalAxis {
  int dimension = 2;
  int axis = 0;
  double beta = 0.0;
};

/// sum_i exp(-|x - q_i|^2 / (2 width^2)) p_i
struct KernelMomentum {
  std::vector<Eigen::VectorXd> points;
  std::vector<Eigen::VectorXd> momenta;
  double width = 1.0;
};

struct Sum {
  std::vector<VectorFieldSpec> terms;
};

/// offset + A x
struct Linear {
  Eigen::MatrixXd A;
  Eigen::VectorXd offset;
};

/// (c0 + sum_k (s_k sin(k x_axis) + c_k cos(k x_axis))) * direction, k = 1, 2, ...
struct Fourier {
  int axis = 0;
  Eigen::VectorXd direction;
  double offset = 0.0;
  std::vector<double> sine;
  std::vector<double> cosine;
};

/// schedule(t) * field(t, x)
struct TimeScaled {
  std::shared_ptr<const VectorFieldSpec> field;
  Schedule schedule;
};

/// Grid-sampled scalar field on the periodic line, interpolated by a space-time spline.
struct PeriodicSpline {
  std::shared_ptr<const SpaceTimeSpline> spline;
};

}  // namespace field

class VectorFieldSpec {
 public:
  using Variant = std::variant<field::Constant, field::GaussianKernel, field::ConformalAxis,
                               field::KernelMomentum, field::Linear, field::Fourier, field::Sum,
                               field::TimeScaled, field::PeriodicSpline>;

  /// Validates parameters; throws InvalidArgument on inconsistent dimensions,
  /// non-positive widths or non-finite parameters.
  explicit VectorFieldSpec(Variant v);

  static VectorFieldSpec zero(int dimension);
  static VectorFieldSpec constant(Eigen::VectorXd value);
  static VectorFieldSpec gaussian(Eigen::VectorXd center, Eigen::VectorXd amplitude, double width);
  static VectorFieldSpec conformal_axis(int dimension, int axis, double beta);
  static VectorFieldSpec kernel_momentum(std::vector<Eigen::VectorXd> points,
                                         std::vector<Eigen::VectorXd> momenta, double width);
  static VectorFieldSpec linear(Eigen::MatrixXd A, Eigen::VectorXd offset);
  static VectorFieldSpec fourier(int axis, Eigen::VectorXd direction, double offset, std::vector<double> sine,
                                 std::vector<double> cosine);
  static VectorFieldSpec sum(std::vector<VectorFieldSpec> terms);
  static VectorFieldSpec time_scaled(VectorFieldSpec field, Schedule schedule);
  static VectorFieldSpec periodic_spline(std::shared_ptr<const SpaceTimeSpline> spline);

  int dimension() const { return dim_; }
  const Variant& variant() const { return v_; }

 private:
  Variant v_;
  int dim_ = 0;
};

/// Spatial jet of a vector field at (t, x).
///   jacobian(i, j)        = d_i v^j
///   hessians[j](i, k)     = d_i d_k v^j
///   third[j](i, k, l)     = d_i d_k d_l v^j
///   time_derivative       = d_t v
///   time_jacobian(i, j)   = d_i d_t v^j
/// Members above `order` are left empty.
struct Jet {
  int order = 0;
  Eigen::VectorXd value;
  Eigen::MatrixXd jacobian;
  std::vector<Eigen::MatrixXd> hessians;
  std::vector<Tensor3> third;
  Eigen::VectorXd time_derivative;
  Eigen::MatrixXd time_jacobian;
};

/// Exact jet of order 0..3.  Derivatives come from analytic first
/// derivatives plus nested forward-mode differentiation, never from
/// finite differences.  Throws InvalidArgument for order > 3, a
/// dimension mismatch or non-finite input.
Jet eval_jet(const VectorFieldSpec& field, double t, const Eigen::VectorXd& x, int order);

/// Value only (fast path).
Eigen::VectorXd eval_value(const VectorFieldSpec& field, double t, const Eigen::VectorXd& x);

/// The J noise fields sigma_j plus the uniform-ellipticity floor for sum_j sigma_j sigma_j^T.
struct NoiseModel {
  NoiseModel(std::vector<VectorFieldSpec> sigmas, double ellipticity_floor);

  std::vector<VectorFieldSpec> sigmas;
  double ellipticity_floor;

  int dimension() const { return sigmas.front().dimension(); }
};

}  // namespace mpflow
