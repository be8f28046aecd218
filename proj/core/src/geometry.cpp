#include "mpflow/geometry.hpp"

#include <cmath>
#include <sstream>

#include "mpflow/detail/geometry_eval.hpp"
#include "mpflow/diagnostics.hpp"
#include "mpflow/errors.hpp"

namespace mpflow {

namespace detail {

void report_ellipticity(double min_eig, double floor, double t, const double* x, int d) {
  Eigen::VectorXd point = Eigen::Map<const Eigen::VectorXd>(x, d);
  if (!(min_eig >= floor)) throw EllipticityViolation(t, point, min_eig, floor);
  std::ostringstream msg;
  msg << "cometric eigenvalue " << min_eig << " within 10x of floor " << floor << " at t=" << t;
  emit_warning(WarningKind::NearSingularCometric, msg.str());
}

}  // namespace detail

namespace {

using detail::Full;
using detail::Mat;
using detail::Vec;

void check_inputs(const NoiseModel& noise, const VectorFieldSpec* drift, double t, const Eigen::VectorXd& x) {
  const int d = noise.dimension();
  if (x.size() != d) throw InvalidArgument("point dimension does not match noise model");
  if (drift && drift->dimension() != d) throw InvalidArgument("drift dimension does not match noise model");
  if (!x.allFinite() || !std::isfinite(t)) throw InvalidArgument("non-finite evaluation point");
}

template <int D>
Eigen::MatrixXd to_eigen(const Mat<double, D>& m) {
  Eigen::MatrixXd r(D, D);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) r(i, j) = m[i][j];
  return r;
}

template <int D>
Eigen::VectorXd to_eigen(const Vec<double, D>& v) {
  Eigen::VectorXd r(D);
  for (int i = 0; i < D; ++i) r[i] = v[i];
  return r;
}

template <int D>
Tensor3 to_tensor(const detail::Mats<double, D>& m) {
  Tensor3 r(D);
  for (int k = 0; k < D; ++k)
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) r(k, i, j) = m[k][i][j];
  return r;
}

template <int D>
Full<double, D> full_values(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                            const Vec<double, D>& x) {
  return detail::full_checked<D>(noise, drift, t, x);
}

}  // namespace

Eigen::MatrixXd cometric(const NoiseModel& noise, double t, const Eigen::VectorXd& x) {
  check_inputs(noise, nullptr, t, x);
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto xa = detail::to_array<D>(x);
    Mat<double, D> G = detail::zero_mat<double, D>();
    for (const auto& s : noise.sigmas) {
      const auto j = detail::eval_jet0<double, D>(s, t, xa);
      for (int a = 0; a < D; ++a)
        for (int b = a; b < D; ++b) G[a][b] += j.value[a] * j.value[b];
    }
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < a; ++b) G[a][b] = G[b][a];
    detail::check_ellipticity<D>(G, noise.ellipticity_floor, t, xa);
    return to_eigen<D>(G);
  });
}

MetricDerivatives metric_and_derivatives(const NoiseModel& noise, double t, const Eigen::VectorXd& x) {
  check_inputs(noise, nullptr, t, x);
  const auto zero = VectorFieldSpec::zero(noise.dimension());
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto full = full_values<D>(noise, zero, t, detail::to_array<D>(x));
    MetricDerivatives out;
    out.metric = to_eigen<D>(full.b.metric);
    out.d_metric = to_tensor<D>(full.b.d_metric);
    out.d2_metric = Tensor4(D);
    for (int l = 0; l < D; ++l)
      for (int k = 0; k < D; ++k)
        for (int i = 0; i < D; ++i)
          for (int j = 0; j < D; ++j) out.d2_metric(l, k, i, j) = full.d2_metric[l][k][i][j];
    out.metric_dt = to_eigen<D>(full.b.metric_dt);
    return out;
  });
}

Tensor3 christoffel(const NoiseModel& noise, double t, const Eigen::VectorXd& x) {
  check_inputs(noise, nullptr, t, x);
  const auto zero = VectorFieldSpec::zero(noise.dimension());
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto xa = detail::to_array<D>(x);
    const auto b = detail::base<double, D>(noise, zero, t, xa);
    detail::check_ellipticity<D>(b.cometric, noise.ellipticity_floor, t, xa);
    return to_tensor<D>(b.christoffel);
  });
}

double scalar_curvature(const NoiseModel& noise, double t, const Eigen::VectorXd& x) {
  check_inputs(noise, nullptr, t, x);
  const auto zero = VectorFieldSpec::zero(noise.dimension());
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    return full_values<D>(noise, zero, t, detail::to_array<D>(x)).scalar_curvature;
  });
}

DriftCorrection drift_z(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                        const Eigen::VectorXd& x) {
  check_inputs(noise, &drift, t, x);
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto full = full_values<D>(noise, drift, t, detail::to_array<D>(x));
    return DriftCorrection{to_eigen<D>(full.b.z), to_eigen<D>(full.z_jacobian), to_eigen<D>(full.z_covariant)};
  });
}

double generator_apply(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const Eigen::VectorXd& x,
                       const QuadraticTestFunction& phi) {
  check_inputs(noise, &drift, t, x);
  const Eigen::VectorXd grad = phi.gradient(x);
  // sigma^2 phi = sigma^i sigma^k A_ik + sigma^i (d_i sigma^k) d_k phi
  double second_order = 0.0;
  for (const auto& s : noise.sigmas) {
    const Jet jet = eval_jet(s, t, x, 1);
    second_order += jet.value.dot(phi.A * jet.value);
    second_order += (jet.jacobian.transpose() * jet.value).dot(grad);
  }
  const Eigen::VectorXd u = eval_value(drift, t, x);
  return 0.5 * second_order + u.dot(grad);
}

double laplace_beltrami_apply(const NoiseModel& noise, double t, const Eigen::VectorXd& x,
                              const QuadraticTestFunction& phi) {
  check_inputs(noise, nullptr, t, x);
  const auto zero = VectorFieldSpec::zero(noise.dimension());
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto xa = detail::to_array<D>(x);
    const auto b = detail::base<double, D>(noise, zero, t, xa);
    detail::check_ellipticity<D>(b.cometric, noise.ellipticity_floor, t, xa);
    const Eigen::VectorXd grad = phi.gradient(x);
    // (1/sqrt|g|) d_i (sqrt|g| G^{ij} d_j phi), with d log|g| from Jacobi's
    // formula in the metric form tr(G dg).
    double out = 0.0;
    for (int i = 0; i < D; ++i) {
      double dlog = 0.0;
      for (int a = 0; a < D; ++a)
        for (int c = 0; c < D; ++c) dlog += b.cometric[a][c] * b.d_metric[i][c][a];
      for (int j = 0; j < D; ++j)
        out += b.cometric[i][j] * phi.A(i, j) + (b.d_cometric[i][i][j] + 0.5 * b.cometric[i][j] * dlog) * grad[j];
    }
    return out;
  });
}

OmPotential om_potential(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const Eigen::VectorXd& x) {
  check_inputs(noise, &drift, t, x);
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto full = detail::full_with_gradient<D>(noise, drift, t, detail::to_array<D>(x));
    OmPotential out;
    out.f = full.f.v;
    out.df.resize(D);
    for (int i = 0; i < D; ++i) out.df[i] = full.f.d[i];
    Eigen::MatrixXd G(D, D);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) G(i, j) = full.b.cometric[i][j].v;
    out.grad_f = G * out.df;
    return out;
  });
}

GeometryJet geometry_jet(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const Eigen::VectorXd& x) {
  check_inputs(noise, &drift, t, x);
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto fd = detail::full_with_gradient<D>(noise, drift, t, detail::to_array<D>(x));
    GeometryJet g;
    g.cometric.resize(D, D);
    g.metric.resize(D, D);
    g.metric_dt.resize(D, D);
    g.cometric_dt.resize(D, D);
    g.z_jacobian.resize(D, D);
    g.z_covariant.resize(D, D);
    g.z.resize(D);
    g.christoffel = Tensor3(D);
    for (int i = 0; i < D; ++i) {
      g.z[i] = fd.b.z[i].v;
      for (int j = 0; j < D; ++j) {
        g.cometric(i, j) = fd.b.cometric[i][j].v;
        g.metric(i, j) = fd.b.metric[i][j].v;
        g.metric_dt(i, j) = fd.b.metric_dt[i][j].v;
        g.cometric_dt(i, j) = fd.b.cometric_dt[i][j].v;
        g.z_jacobian(i, j) = fd.z_jacobian[i][j].v;
        g.z_covariant(i, j) = fd.z_covariant[i][j].v;
        for (int k = 0; k < D; ++k) g.christoffel(i, j, k) = fd.b.christoffel[i][j][k].v;
      }
    }
    g.det_metric = 1.0 / fd.b.det_cometric.v;
    g.scalar_curvature = fd.scalar_curvature.v;
    g.f = fd.f.v;
    Eigen::VectorXd df(D);
    for (int i = 0; i < D; ++i) df[i] = fd.f.d[i];
    g.grad_f = g.cometric * df;
    return g;
  });
}

}  // namespace mpflow
