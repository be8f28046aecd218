#pragma once

// Pseudo-spectral solvers on the periodic grid x_j = 2 pi j / n with the
// Helmholtz inertia operator L = 1 - alpha^2 d^2/dx^2.
//
//   EPDiff:  dm/dt = -(u m_x + 2 u_x m),                 m = L u
//   OptU:    dm/dt = -(u m_x + 2 u_x m) - 1/2 L (Box u),  Box v = sum_j s_j (s_j v')' - s_j s_j' v'
//
// Quadratic products are de-aliased with the 2/3 rule.  The Box term grows
// mode k like exp(k^2 s^2 t / 2), so OptU is only usable on short horizons
// or coarse grids.

#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "mpflow/fields.hpp"

namespace mpflow {

/// FFT helper for one grid size.  Not thread-safe: use one instance per thread.
class SpectralGrid {
 public:
  explicit SpectralGrid(int n);  // n a power of two, at least 8
  ~SpectralGrid();
  SpectralGrid(SpectralGrid&&) noexcept;
  SpectralGrid& operator=(SpectralGrid&&) noexcept;

  int size() const { return n_; }
  double spacing() const;
  Eigen::VectorXd nodes() const;

  /// Coefficients c_k, k = 0..n/2, with v_j = (1/n) sum_k c_k e^{i k x_j} over the full spectrum.
  std::vector<std::complex<double>> forward(const Eigen::VectorXd& v) const;
  Eigen::VectorXd inverse(const std::vector<std::complex<double>>& c) const;

  Eigen::VectorXd derivative(const Eigen::VectorXd& v, int order = 1) const;
  /// Zeroes every mode with |k| > n/3.
  Eigen::VectorXd dealias(const Eigen::VectorXd& v) const;
  Eigen::VectorXd helmholtz_apply(double alpha, const Eigen::VectorXd& v) const;
  Eigen::VectorXd helmholtz_invert(double alpha, const Eigen::VectorXd& m) const;

  /// Share of sum_k (1 + alpha^2 k^2)|c_k|^2 carried by the top third of the
  /// modes kept by the 2/3 rule.
  double high_mode_energy_fraction(double alpha, const Eigen::VectorXd& u) const;

 private:
  struct Plans;
  int n_;
  std::unique_ptr<Plans> plans_;
};

/// Velocity u, momentum m = L u and grid-sampled noise fields.
struct GridState {
  double alpha = 1.0;
  Eigen::VectorXd u;
  Eigen::VectorXd m;
  std::vector<Eigen::VectorXd> sigma_fields;

  int size() const { return static_cast<int>(u.size()); }
  void validate() const;

  static GridState from_velocity(Eigen::VectorXd u, double alpha, std::vector<Eigen::VectorXd> sigmas = {});
  static GridState from_momentum(Eigen::VectorXd m, double alpha, std::vector<Eigen::VectorXd> sigmas = {});
};

Eigen::VectorXd helmholtz_apply(const GridState& state, const Eigen::VectorXd& v);
Eigen::VectorXd helmholtz_invert(const GridState& state, const Eigen::VectorXd& m);

/// Flat-connection primitives in 1D: covariant derivative v w', Lie bracket
/// u v' - v u' and Hessian v (w z')' - (v w') z'.
Eigen::VectorXd covariant_derivative(const SpectralGrid& grid, const Eigen::VectorXd& v, const Eigen::VectorXd& w);
Eigen::VectorXd lie_bracket(const SpectralGrid& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v);
Eigen::VectorXd hessian(const SpectralGrid& grid, const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& z);

/// dm/dt of EPDiff at the state's momentum.  Emits WarningKind::Underresolved
/// when high_mode_energy_fraction exceeds 1e-3.
Eigen::VectorXd epdiff_rhs(const GridState& state);
Eigen::VectorXd epdiff_rhs(const SpectralGrid& grid, const GridState& state);

/// Sum over the noise fields of the Hessian along (s_j, s_j), applied to v.
Eigen::VectorXd box_apply(const GridState& state, const Eigen::VectorXd& v);
Eigen::VectorXd box_apply(const SpectralGrid& grid, const GridState& state, const Eigen::VectorXd& v);

/// Integral over the period of u L u (trapezoid, spectrally exact for band-limited u).
double x_energy(const GridState& state);
/// Same quantity from the Fourier coefficients.
double x_energy_spectral(const GridState& state);

/// Time-sampled drift on the grid.  u_hat is the evolved (Ito) drift; u is
/// the Stratonovich drift u_hat - 1/2 sum_j s_j s_j' that the path solvers take.
struct DriftSnapshots {
  double alpha = 1.0;
  int n = 0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> u_hat;
  std::vector<Eigen::VectorXd> u;

  /// Spline adapters (periodic cubic in x, natural cubic in t).
  VectorFieldSpec stratonovich_field() const;
  VectorFieldSpec ito_field() const;
};

/// Classic RK4 in momentum, `steps` uniform steps on [0, T], a snapshot every
/// `snapshot_every` steps (the final time is always included).
DriftSnapshots epdiff_integrate(const GridState& initial, double T, int steps, int snapshot_every = 1);
DriftSnapshots optu_integrate(const GridState& initial, double T, int steps, int snapshot_every = 1);

}  // namespace mpflow
