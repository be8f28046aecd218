#pragma once

// Templated field evaluation shared by the fields, geometry and sde modules.
// T is double or a (nested) Dual; D is the compile-time dimension.

#include <algorithm>
#include <array>
#include <type_traits>
#include <utility>

#include "mpflow/dual.hpp"
#include "mpflow/errors.hpp"
#include "mpflow/fields.hpp"

namespace mpflow::detail {

template <class T, int D>
using Vec = std::array<T, D>;
template <class T, int D>
using Mat = std::array<std::array<T, D>, D>;

template <class T, int D>
Vec<T, D> zero_vec() {
  Vec<T, D> v;
  v.fill(T(0.0));
  return v;
}
template <class T, int D>
Mat<T, D> zero_mat() {
  Mat<T, D> m;
  for (auto& row : m) row.fill(T(0.0));
  return m;
}

/// Value, jacobian (jac[i][j] = d_i v^j) and time derivative.
template <class T, int D>
struct Jet1 {
  Vec<T, D> value = zero_vec<T, D>();
  Mat<T, D> jac = zero_mat<T, D>();
  Vec<T, D> dt = zero_vec<T, D>();
};

template <class F>
decltype(auto) with_dimension(int d, F&& f) {
  switch (d) {
    case 1:
      return f(std::integral_constant<int, 1>{});
    case 2:
      return f(std::integral_constant<int, 2>{});
    case 3:
      return f(std::integral_constant<int, 3>{});
    default:
      throw InvalidArgument("dimension must be 1, 2 or 3");
  }
}

// Accumulates w * field and, for the time derivative, w * d_t field + w_dot * field.
template <class T, int D, bool WithJacobian>
void accumulate(const VectorFieldSpec& spec, double t, const Vec<T, D>& x, double w, double w_dot,
                Jet1<T, D>& out);

template <class T, int D, bool WithJacobian>
void accumulate_gaussian(const double* center, const double* amplitude, double width, const Vec<T, D>& x,
                         double w, double w_dot, Jet1<T, D>& out) {
  using std::exp;
  const double inv_w2 = 1.0 / (width * width);
  Vec<T, D> y;
  T r2(0.0);
  for (int i = 0; i < D; ++i) {
    y[i] = x[i] - center[i];
    r2 += y[i] * y[i];
  }
  const T k = exp(-0.5 * inv_w2 * r2);
  for (int j = 0; j < D; ++j) {
    if (amplitude[j] == 0.0) continue;
    const T kj = amplitude[j] * k;
    out.value[j] += w * kj;
    if (w_dot != 0.0) out.dt[j] += w_dot * kj;
    if constexpr (WithJacobian) {
      const T g = (-w * inv_w2) * kj;
      for (int i = 0; i < D; ++i) out.jac[i][j] += g * y[i];
    }
  }
}

template <class T, int D, bool WithJacobian>
void accumulate(const VectorFieldSpec& spec, double t, const Vec<T, D>& x, double w, double w_dot,
                Jet1<T, D>& out) {
  using std::exp;
  const auto& v = spec.variant();
  if (const auto* c = std::get_if<field::Constant>(&v)) {
    for (int j = 0; j < D; ++j) {
      out.value[j] += w * c->value[j];
      out.dt[j] += w_dot * c->value[j];
    }
  } else if (const auto* g = std::get_if<field::GaussianKernel>(&v)) {
    accumulate_gaussian<T, D, WithJacobian>(g->center.data(), g->amplitude.data(), g->width, x, w, w_dot,
                                            out);
  } else if (const auto* ca = std::get_if<field::ConformalAxis>(&v)) {
    T r2(0.0);
    for (int i = 0; i < D; ++i) r2 += x[i] * x[i];
    const T k = exp(-ca->beta * r2);
    out.value[ca->axis] += w * k;
    if (w_dot != 0.0) out.dt[ca->axis] += w_dot * k;
    if constexpr (WithJacobian) {
      const T gk = (-2.0 * ca->beta * w) * k;
      for (int i = 0; i < D; ++i) out.jac[i][ca->axis] += gk * x[i];
    }
  } else if (const auto* km = std::get_if<field::KernelMomentum>(&v)) {
    for (std::size_t p = 0; p < km->points.size(); ++p)
      accumulate_gaussian<T, D, WithJacobian>(km->points[p].data(), km->momenta[p].data(), km->width, x, w,
                                              w_dot, out);
  } else if (const auto* l = std::get_if<field::Linear>(&v)) {
    for (int j = 0; j < D; ++j) {
      T acc(l->offset[j]);
      for (int i = 0; i < D; ++i) acc += l->A(j, i) * x[i];
      out.value[j] += w * acc;
      if (w_dot != 0.0) out.dt[j] += w_dot * acc;
      if constexpr (WithJacobian)
        for (int i = 0; i < D; ++i) out.jac[i][j] += w * l->A(j, i);
    }
  } else if (const auto* f = std::get_if<field::Fourier>(&v)) {
    using std::cos;
    using std::sin;
    const T& xa = x[f->axis];
    T s(f->offset), ds(0.0);
    for (std::size_t k = 0; k < std::max(f->sine.size(), f->cosine.size()); ++k) {
      const double kk = static_cast<double>(k + 1);
      const T sk = sin(kk * xa), ck = cos(kk * xa);
      if (k < f->sine.size()) {
        s += f->sine[k] * sk;
        ds += (kk * f->sine[k]) * ck;
      }
      if (k < f->cosine.size()) {
        s += f->cosine[k] * ck;
        ds -= (kk * f->cosine[k]) * sk;
      }
    }
    for (int j = 0; j < D; ++j) {
      if (f->direction[j] == 0.0) continue;
      out.value[j] += (w * f->direction[j]) * s;
      if (w_dot != 0.0) out.dt[j] += (w_dot * f->direction[j]) * s;
      if constexpr (WithJacobian) out.jac[f->axis][j] += (w * f->direction[j]) * ds;
    }
  } else if (const auto* s = std::get_if<field::Sum>(&v)) {
    for (const auto& term : s->terms) accumulate<T, D, WithJacobian>(term, t, x, w, w_dot, out);
  } else if (const auto* ts = std::get_if<field::TimeScaled>(&v)) {
    const double s_val = ts->schedule.value(t);
    const double s_dot = ts->schedule.derivative(t);
    accumulate<T, D, WithJacobian>(*ts->field, t, x, w * s_val, w_dot * s_val + w * s_dot, out);
  } else if (const auto* sp = std::get_if<field::PeriodicSpline>(&v)) {
    if constexpr (D == 1) {
      if constexpr (WithJacobian) {
        // d/dx through one extra dual layer over the spline's cubic pieces.
        const auto [val, vdt] = sp->spline->value_and_dt(t, make_variable<T, 1>(x[0], 0));
        out.value[0] += w * val.v;
        out.dt[0] += w * vdt.v + w_dot * val.v;
        out.jac[0][0] += w * val.d[0];
      } else {
        const auto [val, vdt] = sp->spline->value_and_dt(t, x[0]);
        out.value[0] += w * val;
        out.dt[0] += w * vdt + w_dot * val;
      }
    } else {
      throw InvalidArgument("periodic spline fields are one-dimensional");
    }
  }
}

template <class T, int D>
Jet1<T, D> eval_jet1(const VectorFieldSpec& spec, double t, const Vec<T, D>& x) {
  Jet1<T, D> out;
  accumulate<T, D, true>(spec, t, x, 1.0, 0.0, out);
  return out;
}

/// Value and time derivative only.
template <class T, int D>
Jet1<T, D> eval_jet0(const VectorFieldSpec& spec, double t, const Vec<T, D>& x) {
  Jet1<T, D> out;
  accumulate<T, D, false>(spec, t, x, 1.0, 0.0, out);
  return out;
}

template <int D>
Vec<double, D> to_array(const Eigen::VectorXd& x) {
  Vec<double, D> a;
  for (int i = 0; i < D; ++i) a[i] = x[i];
  return a;
}

/// Seeds x as D independent variables of a Dual<T, D>.
template <class T, int D>
Vec<Dual<T, D>, D> seed(const Vec<T, D>& x) {
  Vec<Dual<T, D>, D> out;
  for (int i = 0; i < D; ++i) out[i] = make_variable<T, D>(x[i], i);
  return out;
}

}  // namespace mpflow::detail
