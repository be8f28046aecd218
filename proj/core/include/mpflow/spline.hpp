#pragma once

// Tensor-product spline on [t_0, t_K] x [0, period): periodic cubic in space,
// natural cubic in time.  Used to hand grid-sampled 1D drifts to the
// path solvers with exact jets of the interpolant.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "mpflow/dual.hpp"

namespace mpflow {

/// Second derivatives of the periodic cubic spline through uniformly spaced `y`.
std::vector<double> periodic_spline_moments(const std::vector<double>& y, double spacing);

/// Second derivatives of the natural cubic spline through (t_k, y_k).
std::vector<double> natural_spline_moments(const std::vector<double>& t, const std::vector<double>& y);

class SpaceTimeSpline {
 public:
  /// `samples[k][j]` is the value at time `times[k]` and x_j = j * period / n.
  SpaceTimeSpline(std::vector<double> times, std::vector<std::vector<double>> samples,
                  double period = 2.0 * std::numbers::pi);

  int grid_size() const { return n_; }
  double period() const { return period_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<std::vector<double>>& samples() const { return y_; }

  /// Value and time derivative at (t, x).  Times outside the sampled range
  /// are clamped (time derivative zero there).
  template <class T>
  std::pair<T, T> value_and_dt(double t, const T& x) const;

 private:
  struct NodeInTime {
    double y, y_t, m, m_t;  // value and x-moment, each with its time derivative
  };
  NodeInTime node_at(double t, int j) const;

  int n_ = 0;
  double period_ = 0.0;
  double h_ = 0.0;
  std::vector<double> times_;
  std::vector<std::vector<double>> y_;    // [k][j]
  std::vector<std::vector<double>> m_;    // x-moments [k][j]
  std::vector<std::vector<double>> ytt_;  // time moments of y, [j][k]
  std::vector<std::vector<double>> mtt_;  // time moments of m, [j][k]
};

template <class T>
std::pair<T, T> SpaceTimeSpline::value_and_dt(double t, const T& x) const {
  const double xr = real(x);
  const double wraps = std::floor(xr / period_);
  const T xl = x - wraps * period_;
  int j = static_cast<int>(std::floor((xr - wraps * period_) / h_));
  if (j < 0) j = 0;
  if (j >= n_) j = n_ - 1;
  const int j1 = (j + 1) % n_;
  const NodeInTime a = node_at(t, j);
  const NodeInTime b = node_at(t, j1);

  const T s = (xl - j * h_) / h_;
  const T A = 1.0 - s;
  const T& B = s;
  const double c = h_ * h_ / 6.0;
  const T wa = (A * A * A - A) * c;
  const T wb = (B * B * B - B) * c;
  T value = A * a.y + B * b.y + wa * a.m + wb * b.m;
  T dt = A * a.y_t + B * b.y_t + wa * a.m_t + wb * b.m_t;
  return {value, dt};
}

}  // namespace mpflow
