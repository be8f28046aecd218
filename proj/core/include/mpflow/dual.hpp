#pragma once

// Forward-mode dual numbers with a fixed number of partials.
//
// Dual<T, N> carries a value and N directional derivatives.  Nesting
// (Dual<Dual<double, N>, N>) yields second derivatives, and so on; the
// geometry code relies on this to differentiate assembled expressions that
// already contain analytic first derivatives of the noise fields.

#include <array>
#include <cmath>
#include <type_traits>

namespace mpflow {

template <class T, int N>
struct Dual {
  T v{};
  std::array<T, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double x) : v(x) {}  // NOLINT: implicit promotion of constants
  constexpr Dual(const T& value, const std::array<T, N>& partials) : v(value), d(partials) {}

  template <class U = T, std::enable_if_t<!std::is_same_v<U, double>, int> = 0>
  constexpr explicit Dual(const T& value) : v(value) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator*=(double s) {
    v *= s;
    for (int i = 0; i < N; ++i) d[i] *= s;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const T inv = T(1.0) / o.v;
    v *= inv;
    for (int i = 0; i < N; ++i) d[i] = (d[i] - v * o.d[i]) * inv;
    return *this;
  }
};

template <class T>
struct is_dual : std::false_type {};
template <class T, int N>
struct is_dual<Dual<T, N>> : std::true_type {};

/// Innermost real value of a (possibly nested) dual number.
inline double real(double x) { return x; }
template <class T, int N>
double real(const Dual<T, N>& x) {
  return real(x.v);
}

template <class T, int N>
Dual<T, N> operator-(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = -a.v;
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}
template <class T, int N>
Dual<T, N> operator+(Dual<T, N> a, const Dual<T, N>& b) {
  return a += b;
}
template <class T, int N>
Dual<T, N> operator-(Dual<T, N> a, const Dual<T, N>& b) {
  return a -= b;
}
template <class T, int N>
Dual<T, N> operator*(Dual<T, N> a, const Dual<T, N>& b) {
  return a *= b;
}
template <class T, int N>
Dual<T, N> operator/(Dual<T, N> a, const Dual<T, N>& b) {
  return a /= b;
}

template <class T, int N>
Dual<T, N> operator+(Dual<T, N> a, double b) {
  a.v += b;
  return a;
}
template <class T, int N>
Dual<T, N> operator+(double b, Dual<T, N> a) {
  a.v += b;
  return a;
}
template <class T, int N>
Dual<T, N> operator-(Dual<T, N> a, double b) {
  a.v -= b;
  return a;
}
template <class T, int N>
Dual<T, N> operator-(double b, const Dual<T, N>& a) {
  Dual<T, N> r = -a;
  r.v += b;
  return r;
}
template <class T, int N>
Dual<T, N> operator*(Dual<T, N> a, double s) {
  return a *= s;
}
template <class T, int N>
Dual<T, N> operator*(double s, Dual<T, N> a) {
  return a *= s;
}
template <class T, int N>
Dual<T, N> operator/(Dual<T, N> a, double s) {
  return a *= (1.0 / s);
}
template <class T, int N>
Dual<T, N> operator/(double s, const Dual<T, N>& a) {
  return Dual<T, N>(s) / a;
}

template <class T, int N>
bool operator<(const Dual<T, N>& a, const Dual<T, N>& b) {
  return real(a) < real(b);
}
template <class T, int N>
bool operator>(const Dual<T, N>& a, const Dual<T, N>& b) {
  return real(a) > real(b);
}

// Chain rule helper: f(a) given f(a.v) and f'(a.v).
template <class T, int N>
Dual<T, N> chain(const Dual<T, N>& a, const T& fv, const T& dfv) {
  Dual<T, N> r;
  r.v = fv;
  for (int i = 0; i < N; ++i) r.d[i] = dfv * a.d[i];
  return r;
}

template <class T, int N>
Dual<T, N> exp(const Dual<T, N>& a) {
  using std::exp;
  const T e = exp(a.v);
  return chain(a, e, e);
}
template <class T, int N>
Dual<T, N> log(const Dual<T, N>& a) {
  using std::log;
  return chain(a, log(a.v), T(1.0) / a.v);
}
template <class T, int N>
Dual<T, N> sqrt(const Dual<T, N>& a) {
  using std::sqrt;
  const T s = sqrt(a.v);
  return chain(a, s, T(0.5) / s);
}
template <class T, int N>
Dual<T, N> sin(const Dual<T, N>& a) {
  using std::cos;
  using std::sin;
  return chain(a, sin(a.v), cos(a.v));
}
template <class T, int N>
Dual<T, N> cos(const Dual<T, N>& a) {
  using std::cos;
  using std::sin;
  return chain(a, cos(a.v), -sin(a.v));
}

/// Independent variable number `k` of an N-dimensional seed.
template <class T, int N>
Dual<T, N> make_variable(const T& value, int k) {
  Dual<T, N> r;
  r.v = value;
  r.d[k] = T(1.0);
  return r;
}

}  // namespace mpflow
