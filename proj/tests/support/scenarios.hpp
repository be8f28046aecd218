#pragma once

// Noise/drift configurations shared by the unit and acceptance tests.

#include <cmath>
#include <string>
#include <vector>

#include "mpflow/fields.hpp"

namespace scenario {

using mpflow::NoiseModel;
using mpflow::VectorFieldSpec;

struct Scenario {
  std::string name;
  NoiseModel noise;
  VectorFieldSpec drift;
};

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Eigen::VectorXd unit(int d, int k, double scale = 1.0) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  e[k] = scale;
  return e;
}

/// sigma_j = e_j
inline NoiseModel flat_noise(int d) {
  std::vector<VectorFieldSpec> s;
  for (int k = 0; k < d; ++k) s.push_back(VectorFieldSpec::constant(unit(d, k)));
  return NoiseModel(s, 1e-3);
}

/// sigma_k = exp(-beta |x|^2) e_k, metric exp(2 beta |x|^2) I
inline NoiseModel conformal_noise(int d, double beta) {
  std::vector<VectorFieldSpec> s;
  for (int k = 0; k < d; ++k) s.push_back(VectorFieldSpec::conformal_axis(d, k, beta));
  return NoiseModel(s, 1e-6);
}

/// Constant floor fields sqrt(eps) e_j plus three Gaussian kernels, one of
/// them modulated in time so that dg/dt is nonzero.
inline NoiseModel kernel_noise(int d, double eps = 0.05) {
  std::vector<VectorFieldSpec> s;
  for (int k = 0; k < d; ++k) s.push_back(VectorFieldSpec::constant(unit(d, k, std::sqrt(eps))));
  auto c = [&](double a, double b, double e) {
    Eigen::VectorXd v(d);
    const double src[3] = {a, b, e};
    for (int i = 0; i < d; ++i) v[i] = src[i];
    return v;
  };
  s.push_back(VectorFieldSpec::gaussian(c(0.3, -0.2, 0.1), c(0.5, 0.2, -0.1), 0.7));
  s.push_back(VectorFieldSpec::gaussian(c(-0.4, 0.5, -0.3), c(-0.1, 0.4, 0.3), 0.6));
  s.push_back(VectorFieldSpec::time_scaled(VectorFieldSpec::gaussian(c(0.1, 0.6, 0.4), c(0.3, -0.3, 0.2), 0.8),
                                           mpflow::Schedule::Sine{1.0, 0.3, 2.0, 0.1}));
  return NoiseModel(s, 1e-3);
}

inline VectorFieldSpec kernel_drift(int d) {
  auto c = [&](double a, double b, double e) {
    Eigen::VectorXd v(d);
    const double src[3] = {a, b, e};
    for (int i = 0; i < d; ++i) v[i] = src[i];
    return v;
  };
  return VectorFieldSpec::kernel_momentum({c(0.5, -0.5, 0.0), c(-0.5, -0.5, 0.2)}, {c(0.1, 0.6, 0.0), c(-0.2, 0.5, 0.1)},
                                          0.5);
}

/// Single Gaussian kernel at the origin on a constant floor.
inline NoiseModel single_kernel_noise(double amplitude = 0.3, double width = 0.5, double floor_amp = 0.3) {
  std::vector<VectorFieldSpec> s;
  for (int k = 0; k < 2; ++k) s.push_back(VectorFieldSpec::constant(unit(2, k, floor_amp)));
  for (int k = 0; k < 2; ++k) s.push_back(VectorFieldSpec::gaussian(vec({0.0, 0.0}), unit(2, k, amplitude), width));
  return NoiseModel(s, 1e-3);
}

inline Scenario flat(int d) { return {"flat", flat_noise(d), VectorFieldSpec::zero(d)}; }
inline Scenario conformal(int d, double beta) { return {"conformal", conformal_noise(d, beta), VectorFieldSpec::zero(d)}; }
inline Scenario kernels(int d) { return {"kernels", kernel_noise(d), kernel_drift(d)}; }

}  // namespace scenario
