#include "mpflow/spline.hpp"

#include <algorithm>

#include "mpflow/errors.hpp"

namespace mpflow {

std::vector<double> periodic_spline_moments(const std::vector<double>& y, double spacing) {
  const int n = static_cast<int>(y.size());
  if (n < 3) throw InvalidArgument("periodic spline needs at least 3 nodes");
  // Cyclic tridiagonal system (1, 4, 1) M = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2,
  // solved with Sherman-Morrison on top of the Thomas algorithm.
  std::vector<double> rhs(n);
  for (int i = 0; i < n; ++i) {
    const double ym = y[(i + n - 1) % n];
    const double yp = y[(i + 1) % n];
    rhs[i] = 6.0 * (yp - 2.0 * y[i] + ym) / (spacing * spacing);
  }
  const double alpha = 1.0, beta = 1.0;  // corner entries
  const double gamma = -4.0;
  std::vector<double> diag(n, 4.0);
  diag[0] -= gamma;
  diag[n - 1] -= alpha * beta / gamma;

  auto thomas = [&](std::vector<double> r) {
    std::vector<double> c(n), dd(n);
    c[0] = 1.0 / diag[0];
    dd[0] = r[0] / diag[0];
    for (int i = 1; i < n; ++i) {
      const double m = diag[i] - c[i - 1];
      c[i] = 1.0 / m;
      dd[i] = (r[i] - dd[i - 1]) / m;
    }
    std::vector<double> x(n);
    x[n - 1] = dd[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = dd[i] - c[i] * x[i + 1];
    return x;
  };

  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  const std::vector<double> xs = thomas(rhs);
  const std::vector<double> zs = thomas(u);
  const double fact = (xs[0] + beta * xs[n - 1] / gamma) / (1.0 + zs[0] + beta * zs[n - 1] / gamma);
  std::vector<double> m(n);
  for (int i = 0; i < n; ++i) m[i] = xs[i] - fact * zs[i];
  return m;
}

std::vector<double> natural_spline_moments(const std::vector<double>& t, const std::vector<double>& y) {
  const int n = static_cast<int>(t.size());
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  std::vector<double> c(n, 0.0), d(n, 0.0);
  for (int i = 1; i < n - 1; ++i) {
    const double h0 = t[i] - t[i - 1];
    const double h1 = t[i + 1] - t[i];
    const double a = h0 / 6.0, b = (h0 + h1) / 3.0, cc = h1 / 6.0;
    const double r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    const double denom = b - a * c[i - 1];
    c[i] = cc / denom;
    d[i] = (r - a * d[i - 1]) / denom;
  }
  for (int i = n - 2; i >= 1; --i) m[i] = d[i] - c[i] * m[i + 1];
  return m;
}

SpaceTimeSpline::SpaceTimeSpline(std::vector<double> times, std::vector<std::vector<double>> samples,
                                 double period)
    : period_(period), times_(std::move(times)), y_(std::move(samples)) {
  if (times_.empty() || times_.size() != y_.size())
    throw InvalidArgument("spline: need one sample row per time");
  if (!(period_ > 0.0)) throw InvalidArgument("spline: period must be positive");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1])) throw InvalidArgument("spline: times must increase strictly");
  n_ = static_cast<int>(y_.front().size());
  for (const auto& row : y_)
    if (static_cast<int>(row.size()) != n_) throw InvalidArgument("spline: ragged samples");
  h_ = period_ / n_;

  const std::size_t K = times_.size();
  m_.resize(K);
  for (std::size_t k = 0; k < K; ++k) m_[k] = periodic_spline_moments(y_[k], h_);

  ytt_.assign(n_, {});
  mtt_.assign(n_, {});
  std::vector<double> col(K);
  for (int j = 0; j < n_; ++j) {
    for (std::size_t k = 0; k < K; ++k) col[k] = y_[k][j];
    ytt_[j] = natural_spline_moments(times_, col);
    for (std::size_t k = 0; k < K; ++k) col[k] = m_[k][j];
    mtt_[j] = natural_spline_moments(times_, col);
  }
}

SpaceTimeSpline::NodeInTime SpaceTimeSpline::node_at(double t, int j) const {
  const std::size_t K = times_.size();
  if (K == 1) return {y_[0][j], 0.0, m_[0][j], 0.0};
  if (t <= times_.front()) return {y_[0][j], 0.0, m_[0][j], 0.0};
  if (t >= times_.back()) return {y_[K - 1][j], 0.0, m_[K - 1][j], 0.0};

  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double dt = times_[k + 1] - times_[k];
  const double a = (times_[k + 1] - t) / dt;
  const double b = 1.0 - a;
  const double c = dt * dt / 6.0;

  auto interp = [&](double v0, double v1, double s0, double s1, double& value, double& deriv) {
    value = a * v0 + b * v1 + ((a * a * a - a) * s0 + (b * b * b - b) * s1) * c;
    deriv = (v1 - v0) / dt - (3.0 * a * a - 1.0) / 6.0 * dt * s0 + (3.0 * b * b - 1.0) / 6.0 * dt * s1;
  };
  NodeInTime out{};
  interp(y_[k][j], y_[k + 1][j], ytt_[j][k], ytt_[j][k + 1], out.y, out.y_t);
  interp(m_[k][j], m_[k + 1][j], mtt_[j][k], mtt_[j][k + 1], out.m, out.m_t);
  return out;
}

}  // namespace mpflow
