#pragma once

// Templated assembly of the noise-induced geometry.
//
// base<T, D>  needs first jets of the noise fields and yields g*, g, dg*, dg,
//             Christoffel symbols, d log det g, z and the time derivatives.
// full<T, D>  evaluates base on Dual<T, D> to pick up one more spatial
//             derivative and assembles S, div_g z, f and the covariant
//             derivative of z.
// Calling full<Dual<double, D>, D> gives the spatial gradient of f, which is
// where third derivatives of the noise fields enter.

#include <array>

#include "mpflow/detail/field_eval.hpp"
#include "mpflow/fields.hpp"

namespace mpflow::detail {

template <class T, int D>
using Mats = std::array<Mat<T, D>, D>;

template <class T, int D>
Mats<T, D> zero_mats() {
  Mats<T, D> m;
  for (auto& a : m) a = zero_mat<T, D>();
  return m;
}

template <class T, int D>
T determinant(const Mat<T, D>& a) {
  if constexpr (D == 1) {
    return a[0][0];
  } else if constexpr (D == 2) {
    return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  } else {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  }
}

/// Cofactor inverse of a symmetric matrix; the result is symmetrized.
template <class T, int D>
Mat<T, D> inverse_symmetric(const Mat<T, D>& a, const T& det) {
  Mat<T, D> r;
  const T inv = T(1.0) / det;
  if constexpr (D == 1) {
    r[0][0] = inv;
  } else if constexpr (D == 2) {
    r[0][0] = a[1][1] * inv;
    r[1][1] = a[0][0] * inv;
    r[0][1] = -(a[0][1] * inv);
    r[1][0] = r[0][1];
  } else {
    r[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) * inv;
    r[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * inv;
    r[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * inv;
    r[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * inv;
    r[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * inv;
    r[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * inv;
    r[1][0] = r[0][1];
    r[2][0] = r[0][2];
    r[2][1] = r[1][2];
  }
  return r;
}

/// c = a * b * a for symmetric a (used for dg = -g dG g and gdot = -g Gdot g).
template <class T, int D>
Mat<T, D> sandwich(const Mat<T, D>& a, const Mat<T, D>& b) {
  Mat<T, D> tmp = zero_mat<T, D>();
  for (int i = 0; i < D; ++i)
    for (int k = 0; k < D; ++k)
      for (int j = 0; j < D; ++j) tmp[i][j] += a[i][k] * b[k][j];
  Mat<T, D> out = zero_mat<T, D>();
  for (int i = 0; i < D; ++i)
    for (int j = i; j < D; ++j) {
      T acc(0.0);
      for (int k = 0; k < D; ++k) acc += tmp[i][k] * a[k][j];
      out[i][j] = acc;
      out[j][i] = acc;
    }
  return out;
}

template <class T, int D>
struct Base {
  Mat<T, D> cometric = zero_mat<T, D>();     // G^{ij}
  Mat<T, D> metric = zero_mat<T, D>();       // g_ij
  T det_cometric = T(0.0);
  Mats<T, D> d_cometric = zero_mats<T, D>();  // [k][i][j] = d_k G^{ij}
  Mats<T, D> d_metric = zero_mats<T, D>();    // [k][i][j] = d_k g_ij
  Vec<T, D> d_logdet_metric = zero_vec<T, D>();
  Mats<T, D> christoffel = zero_mats<T, D>();  // [k][i][j] = Gamma^k_ij
  Vec<T, D> z = zero_vec<T, D>();
  Mat<T, D> cometric_dt = zero_mat<T, D>();
  Mat<T, D> metric_dt = zero_mat<T, D>();
};

template <class T, int D>
Base<T, D> base(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const Vec<T, D>& x) {
  Base<T, D> b;
  Vec<T, D> transport = zero_vec<T, D>();  // sum_r sigma_r^i d_i sigma_r^j
  for (const auto& field : noise.sigmas) {
    const Jet1<T, D> s = eval_jet1<T, D>(field, t, x);
    for (int i = 0; i < D; ++i)
      for (int j = i; j < D; ++j) {
        b.cometric[i][j] += s.value[i] * s.value[j];
        b.cometric_dt[i][j] += s.dt[i] * s.value[j] + s.value[i] * s.dt[j];
        for (int k = 0; k < D; ++k) b.d_cometric[k][i][j] += s.jac[k][i] * s.value[j] + s.value[i] * s.jac[k][j];
      }
    for (int j = 0; j < D; ++j)
      for (int i = 0; i < D; ++i) transport[j] += s.value[i] * s.jac[i][j];
  }
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < i; ++j) {
      b.cometric[i][j] = b.cometric[j][i];
      b.cometric_dt[i][j] = b.cometric_dt[j][i];
      for (int k = 0; k < D; ++k) b.d_cometric[k][i][j] = b.d_cometric[k][j][i];
    }

  b.det_cometric = determinant<T, D>(b.cometric);
  b.metric = inverse_symmetric<T, D>(b.cometric, b.det_cometric);
  for (int k = 0; k < D; ++k) {
    Mat<T, D> dg = sandwich<T, D>(b.metric, b.d_cometric[k]);
    T tr(0.0);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) {
        dg[i][j] = -dg[i][j];
        tr += b.metric[i][j] * b.d_cometric[k][j][i];
      }
    b.d_metric[k] = dg;
    b.d_logdet_metric[k] = -tr;  // Jacobi: d log det g = -tr(g dG)
  }
  b.metric_dt = sandwich<T, D>(b.metric, b.cometric_dt);
  for (auto& row : b.metric_dt)
    for (auto& e : row) e = -e;

  for (int k = 0; k < D; ++k)
    for (int i = 0; i < D; ++i)
      for (int j = i; j < D; ++j) {
        T acc(0.0);
        for (int r = 0; r < D; ++r)
          acc += b.cometric[k][r] * (b.d_metric[j][r][i] + b.d_metric[i][r][j] - b.d_metric[r][i][j]);
        b.christoffel[k][i][j] = 0.5 * acc;
        b.christoffel[k][j][i] = b.christoffel[k][i][j];
      }

  const Jet1<T, D> u = eval_jet0<T, D>(drift, t, x);
  for (int j = 0; j < D; ++j) {
    T corr(0.0);
    for (int i = 0; i < D; ++i) corr += b.d_cometric[i][i][j] + 0.5 * b.cometric[i][j] * b.d_logdet_metric[i];
    b.z[j] = u.value[j] + 0.5 * transport[j] - 0.5 * corr;
  }
  return b;
}

template <class T, int D>
struct Full {
  Base<T, D> b;
  std::array<Mats<T, D>, D> d_christoffel;  // [m][k][i][j] = d_m Gamma^k_ij
  std::array<Mats<T, D>, D> d2_metric;      // [m][k][i][j] = d_m d_k g_ij
  Mat<T, D> z_jacobian = zero_mat<T, D>();  // [i][j] = d_i z^j
  Mat<T, D> z_covariant = zero_mat<T, D>(); // [i][j] = d_i z^j + Gamma^j_ik z^k
  T scalar_curvature = T(0.0);
  T div_z = T(0.0);
  T trace_metric_dt = T(0.0);
  T f = T(0.0);
};

template <class T, int D>
Mats<T, D> values_of(const Mats<Dual<T, D>, D>& a) {
  Mats<T, D> r;
  for (int k = 0; k < D; ++k)
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) r[k][i][j] = a[k][i][j].v;
  return r;
}
template <class T, int D>
Mat<T, D> values_of(const Mat<Dual<T, D>, D>& a) {
  Mat<T, D> r;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) r[i][j] = a[i][j].v;
  return r;
}
template <class T, int D>
Vec<T, D> values_of(const Vec<Dual<T, D>, D>& a) {
  Vec<T, D> r;
  for (int i = 0; i < D; ++i) r[i] = a[i].v;
  return r;
}

template <class T, int D>
Full<T, D> full(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const Vec<T, D>& x) {
  const Base<Dual<T, D>, D> bd = base<Dual<T, D>, D>(noise, drift, t, seed<T, D>(x));

  Full<T, D> out;
  Base<T, D>& b = out.b;
  b.cometric = values_of<T, D>(bd.cometric);
  b.metric = values_of<T, D>(bd.metric);
  b.det_cometric = bd.det_cometric.v;
  b.d_cometric = values_of<T, D>(bd.d_cometric);
  b.d_metric = values_of<T, D>(bd.d_metric);
  b.d_logdet_metric = values_of<T, D>(bd.d_logdet_metric);
  b.christoffel = values_of<T, D>(bd.christoffel);
  b.z = values_of<T, D>(bd.z);
  b.cometric_dt = values_of<T, D>(bd.cometric_dt);
  b.metric_dt = values_of<T, D>(bd.metric_dt);

  for (int m = 0; m < D; ++m)
    for (int k = 0; k < D; ++k)
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
          out.d_christoffel[m][k][i][j] = bd.christoffel[k][i][j].d[m];
          out.d2_metric[m][k][i][j] = bd.d_metric[k][i][j].d[m];
        }
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) out.z_jacobian[i][j] = bd.z[j].d[i];

  const auto& G = b.cometric;
  const auto& Gam = b.christoffel;
  const auto& dGam = out.d_christoffel;
  T s(0.0);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      T ricci(0.0);
      for (int k = 0; k < D; ++k) {
        ricci += dGam[k][k][i][j] - dGam[j][k][i][k];
        for (int l = 0; l < D; ++l) ricci += Gam[l][i][j] * Gam[k][k][l] - Gam[l][i][k] * Gam[k][j][l];
      }
      s += G[i][j] * ricci;
    }
  out.scalar_curvature = s;

  T div(0.0);
  for (int i = 0; i < D; ++i) div += out.z_jacobian[i][i] + 0.5 * b.z[i] * b.d_logdet_metric[i];
  out.div_z = div;

  T tr(0.0);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) tr += G[i][j] * b.metric_dt[i][j];
  out.trace_metric_dt = tr;

  out.f = 0.5 * out.div_z - out.scalar_curvature / 12.0 + 0.25 * out.trace_metric_dt;

  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      T acc = out.z_jacobian[i][j];
      for (int k = 0; k < D; ++k) acc += Gam[j][i][k] * b.z[k];
      out.z_covariant[i][j] = acc;
    }
  return out;
}

}  // namespace mpflow::detail

#include <cmath>

#include <Eigen/Eigenvalues>

namespace mpflow::detail {

template <int D>
double min_eigenvalue(const Mat<double, D>& G) {
  if constexpr (D == 1) {
    return G[0][0];
  } else if constexpr (D == 2) {
    const double half_tr = 0.5 * (G[0][0] + G[1][1]);
    const double half_diff = 0.5 * (G[0][0] - G[1][1]);
    return half_tr - std::sqrt(half_diff * half_diff + G[0][1] * G[1][0]);
  } else {
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = G[i][j];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.computeDirect(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
  }
}

/// Throws EllipticityViolation below the floor, warns within 10x of it.
void report_ellipticity(double min_eig, double floor, double t, const double* x, int d);

template <int D>
void check_ellipticity(const Mat<double, D>& G, double floor, double t, const Vec<double, D>& x) {
  const double lo = min_eigenvalue<D>(G);
  if (!(lo >= 10.0 * floor)) report_ellipticity(lo, floor, t, x.data(), D);
}

}  // namespace mpflow::detail

namespace mpflow::detail {

/// Geometry values at x, ellipticity-checked.
template <int D>
Full<double, D> full_checked(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                             const Vec<double, D>& x) {
  auto out = full<double, D>(noise, drift, t, x);
  check_ellipticity<D>(out.b.cometric, noise.ellipticity_floor, t, x);
  return out;
}

/// Geometry with one more spatial derivative: real parts are the values and
/// the partials (e.g. of f) are spatial gradients.  Ellipticity-checked.
template <int D>
Full<Dual<double, D>, D> full_with_gradient(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                                            const Vec<double, D>& x) {
  auto out = full<Dual<double, D>, D>(noise, drift, t, seed<double, D>(x));
  Mat<double, D> G;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) G[i][j] = out.b.cometric[i][j].v;
  check_ellipticity<D>(G, noise.ellipticity_floor, t, x);
  return out;
}

}  // namespace mpflow::detail
