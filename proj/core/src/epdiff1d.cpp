#include "mpflow/epdiff1d.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include <fftw3.h>

#include "mpflow/diagnostics.hpp"
#include "mpflow/errors.hpp"
#include "mpflow/spline.hpp"

namespace mpflow {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr double kUnderresolvedFraction = 1e-3;

}  // namespace

struct SpectralGrid::Plans {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;

  explicit Plans(int n) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    r2c = fftw_plan_dft_r2c_1d(n, real, spec, FFTW_ESTIMATE);
    c2r = fftw_plan_dft_c2r_1d(n, spec, real, FFTW_ESTIMATE);
  }
  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(r2c);
    fftw_destroy_plan(c2r);
    fftw_free(real);
    fftw_free(spec);
  }
};

SpectralGrid::SpectralGrid(int n) : n_(n) {
  if (n < 8 || (n & (n - 1)) != 0) throw InvalidArgument("spectral grid size must be a power of two >= 8");
  plans_ = std::make_unique<Plans>(n);
}

SpectralGrid::~SpectralGrid() = default;
SpectralGrid::SpectralGrid(SpectralGrid&&) noexcept = default;
SpectralGrid& SpectralGrid::operator=(SpectralGrid&&) noexcept = default;

double SpectralGrid::spacing() const { return 2.0 * std::numbers::pi / n_; }

Eigen::VectorXd SpectralGrid::nodes() const {
  Eigen::VectorXd x(n_);
  for (int j = 0; j < n_; ++j) x[j] = j * spacing();
  return x;
}

std::vector<std::complex<double>> SpectralGrid::forward(const Eigen::VectorXd& v) const {
  if (v.size() != n_) throw InvalidArgument("spectral grid: sample count mismatch");
  for (int j = 0; j < n_; ++j) plans_->real[j] = v[j];
  fftw_execute(plans_->r2c);
  std::vector<std::complex<double>> c(n_ / 2 + 1);
  for (int k = 0; k <= n_ / 2; ++k) c[k] = {plans_->spec[k][0], plans_->spec[k][1]};
  return c;
}

Eigen::VectorXd SpectralGrid::inverse(const std::vector<std::complex<double>>& c) const {
  for (int k = 0; k <= n_ / 2; ++k) {
    plans_->spec[k][0] = c[k].real();
    plans_->spec[k][1] = c[k].imag();
  }
  fftw_execute(plans_->c2r);
  Eigen::VectorXd v(n_);
  for (int j = 0; j < n_; ++j) v[j] = plans_->real[j] / n_;
  return v;
}

Eigen::VectorXd SpectralGrid::derivative(const Eigen::VectorXd& v, int order) const {
  auto c = forward(v);
  const std::complex<double> I(0.0, 1.0);
  for (int k = 0; k <= n_ / 2; ++k) {
    // The Nyquist mode has no well-defined odd derivative on a real grid.
    if (k == n_ / 2 && order % 2 == 1) {
      c[k] = 0.0;
      continue;
    }
    c[k] *= std::pow(I * static_cast<double>(k), order);
  }
  return inverse(c);
}

Eigen::VectorXd SpectralGrid::dealias(const Eigen::VectorXd& v) const {
  auto c = forward(v);
  for (int k = 0; k <= n_ / 2; ++k)
    if (3 * k > n_) c[k] = 0.0;
  return inverse(c);
}

Eigen::VectorXd SpectralGrid::helmholtz_apply(double alpha, const Eigen::VectorXd& v) const {
  auto c = forward(v);
  for (int k = 0; k <= n_ / 2; ++k) c[k] *= 1.0 + alpha * alpha * k * k;
  return inverse(c);
}

Eigen::VectorXd SpectralGrid::helmholtz_invert(double alpha, const Eigen::VectorXd& m) const {
  auto c = forward(m);
  for (int k = 0; k <= n_ / 2; ++k) c[k] /= 1.0 + alpha * alpha * k * k;
  return inverse(c);
}

double SpectralGrid::high_mode_energy_fraction(double alpha, const Eigen::VectorXd& u) const {
  const auto c = forward(u);
  const int kept = n_ / 3;
  double total = 0.0, high = 0.0;
  for (int k = 0; k <= n_ / 2; ++k) {
    const double w = (k == 0 || k == n_ / 2) ? 1.0 : 2.0;
    const double e = w * (1.0 + alpha * alpha * k * k) * std::norm(c[k]);
    total += e;
    if (3 * k > 2 * kept) high += e;
  }
  return total > 0.0 ? high / total : 0.0;
}

void GridState::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("grid state: alpha must be finite and >= 0");
  if (u.size() != m.size()) throw InvalidArgument("grid state: u and m sizes differ");
  if (!u.allFinite() || !m.allFinite()) throw InvalidArgument("grid state: non-finite samples");
  for (const auto& s : sigma_fields) {
    if (s.size() != u.size()) throw InvalidArgument("grid state: noise field size mismatch");
    if (!s.allFinite()) throw InvalidArgument("grid state: non-finite noise field");
  }
  const Eigen::VectorXd lu = SpectralGrid(size()).helmholtz_apply(alpha, u);
  if ((lu - m).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw InvalidArgument("grid state: m differs from L u");
}

GridState GridState::from_velocity(Eigen::VectorXd u, double alpha, std::vector<Eigen::VectorXd> sigmas) {
  GridState s;
  s.alpha = alpha;
  const SpectralGrid grid(static_cast<int>(u.size()));
  s.m = grid.helmholtz_apply(alpha, u);
  s.u = std::move(u);
  s.sigma_fields = std::move(sigmas);
  s.validate();
  return s;
}

GridState GridState::from_momentum(Eigen::VectorXd m, double alpha, std::vector<Eigen::VectorXd> sigmas) {
  GridState s;
  s.alpha = alpha;
  const SpectralGrid grid(static_cast<int>(m.size()));
  s.u = grid.helmholtz_invert(alpha, m);
  s.m = std::move(m);
  s.sigma_fields = std::move(sigmas);
  s.validate();
  return s;
}

Eigen::VectorXd helmholtz_apply(const GridState& state, const Eigen::VectorXd& v) {
  return SpectralGrid(static_cast<int>(v.size())).helmholtz_apply(state.alpha, v);
}

Eigen::VectorXd helmholtz_invert(const GridState& state, const Eigen::VectorXd& m) {
  return SpectralGrid(static_cast<int>(m.size())).helmholtz_invert(state.alpha, m);
}

Eigen::VectorXd covariant_derivative(const SpectralGrid& grid, const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  return v.cwiseProduct(grid.derivative(w));
}

Eigen::VectorXd lie_bracket(const SpectralGrid& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return u.cwiseProduct(grid.derivative(v)) - v.cwiseProduct(grid.derivative(u));
}

Eigen::VectorXd hessian(const SpectralGrid& grid, const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& z) {
  return covariant_derivative(grid, v, covariant_derivative(grid, w, z)) -
         covariant_derivative(grid, covariant_derivative(grid, v, w), z);
}

namespace {

Eigen::VectorXd momentum_rhs(const SpectralGrid& grid, double alpha, const Eigen::VectorXd& m,
                             const std::vector<Eigen::VectorXd>* sigmas) {
  const Eigen::VectorXd u = grid.helmholtz_invert(alpha, m);
  const Eigen::VectorXd up = grid.dealias(u);
  const Eigen::VectorXd ux = grid.dealias(grid.derivative(u));
  const Eigen::VectorXd mp = grid.dealias(m);
  const Eigen::VectorXd mx = grid.dealias(grid.derivative(m));
  Eigen::VectorXd dm = -grid.dealias(up.cwiseProduct(mx) + 2.0 * ux.cwiseProduct(mp));
  if (sigmas && !sigmas->empty()) {
    Eigen::VectorXd box = Eigen::VectorXd::Zero(u.size());
    for (const auto& s : *sigmas) box += hessian(grid, s, s, u);
    dm -= 0.5 * grid.dealias(grid.helmholtz_apply(alpha, box));
  }
  return dm;
}

void warn_if_underresolved(const SpectralGrid& grid, double alpha, const Eigen::VectorXd& u, double t) {
  const double frac = grid.high_mode_energy_fraction(alpha, u);
  if (frac > kUnderresolvedFraction) {
    std::ostringstream msg;
    msg << "top-third spectral energy fraction " << frac << " at t=" << t << " (n=" << grid.size() << ")";
    emit_warning(WarningKind::Underresolved, msg.str());
  }
}

DriftSnapshots integrate(const GridState& initial, double T, int steps, int every, bool with_box) {
  initial.validate();
  if (!(T > 0.0) || steps < 1 || every < 1) throw InvalidArgument("integrate: need T > 0, steps >= 1, every >= 1");
  const SpectralGrid grid(initial.size());
  const std::vector<Eigen::VectorXd>* sigmas = with_box ? &initial.sigma_fields : nullptr;

  Eigen::VectorXd correction = Eigen::VectorXd::Zero(initial.size());
  for (const auto& s : initial.sigma_fields) correction += 0.5 * s.cwiseProduct(grid.derivative(s));

  DriftSnapshots out;
  out.alpha = initial.alpha;
  out.n = initial.size();
  bool warned = false;
  auto snapshot = [&](double t, const Eigen::VectorXd& m) {
    Eigen::VectorXd u = grid.helmholtz_invert(initial.alpha, m);
    if (!warned && grid.high_mode_energy_fraction(initial.alpha, u) > kUnderresolvedFraction) {
      warn_if_underresolved(grid, initial.alpha, u, t);
      warned = true;
    }
    out.times.push_back(t);
    out.u.push_back(u - correction);
    out.u_hat.push_back(std::move(u));
  };

  const double h = T / steps;
  Eigen::VectorXd m = initial.m;
  snapshot(0.0, m);
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd k1 = momentum_rhs(grid, initial.alpha, m, sigmas);
    const Eigen::VectorXd k2 = momentum_rhs(grid, initial.alpha, m + 0.5 * h * k1, sigmas);
    const Eigen::VectorXd k3 = momentum_rhs(grid, initial.alpha, m + 0.5 * h * k2, sigmas);
    const Eigen::VectorXd k4 = momentum_rhs(grid, initial.alpha, m + h * k3, sigmas);
    m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = (k + 1) * h;
    if (!m.allFinite() || m.cwiseAbs().maxCoeff() > 1e12) {
      std::ostringstream msg;
      msg << "momentum blew up at t=" << t;
      throw BlowUp(msg.str(), t);
    }
    if ((k + 1) % every == 0 || k + 1 == steps) snapshot(t, m);
  }
  return out;
}

VectorFieldSpec spline_field(const std::vector<double>& times, const std::vector<Eigen::VectorXd>& u) {
  std::vector<std::vector<double>> samples;
  for (const auto& v : u) samples.emplace_back(v.data(), v.data() + v.size());
  return VectorFieldSpec::periodic_spline(std::make_shared<const SpaceTimeSpline>(times, std::move(samples)));
}

}  // namespace

Eigen::VectorXd epdiff_rhs(const SpectralGrid& grid, const GridState& state) {
  state.validate();
  const Eigen::VectorXd dm = momentum_rhs(grid, state.alpha, state.m, nullptr);
  warn_if_underresolved(grid, state.alpha, grid.helmholtz_invert(state.alpha, state.m), 0.0);
  return dm;
}

Eigen::VectorXd epdiff_rhs(const GridState& state) { return epdiff_rhs(SpectralGrid(state.size()), state); }

Eigen::VectorXd box_apply(const SpectralGrid& grid, const GridState& state, const Eigen::VectorXd& v) {
  state.validate();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (const auto& s : state.sigma_fields) out += hessian(grid, s, s, v);
  return out;
}

Eigen::VectorXd box_apply(const GridState& state, const Eigen::VectorXd& v) {
  return box_apply(SpectralGrid(static_cast<int>(v.size())), state, v);
}

double x_energy(const GridState& state) {
  state.validate();
  return 2.0 * std::numbers::pi / state.size() * state.u.dot(state.m);
}

double x_energy_spectral(const GridState& state) {
  state.validate();
  const int n = state.size();
  const auto c = SpectralGrid(n).forward(state.u);
  double acc = 0.0;
  for (int k = 0; k <= n / 2; ++k) {
    const double w = (k == 0 || k == n / 2) ? 1.0 : 2.0;
    acc += w * (1.0 + state.alpha * state.alpha * k * k) * std::norm(c[k]);
  }
  return 2.0 * std::numbers::pi * acc / (static_cast<double>(n) * n);
}

VectorFieldSpec DriftSnapshots::stratonovich_field() const { return spline_field(times, u); }
VectorFieldSpec DriftSnapshots::ito_field() const { return spline_field(times, u_hat); }

DriftSnapshots epdiff_integrate(const GridState& initial, double T, int steps, int snapshot_every) {
  return integrate(initial, T, steps, snapshot_every, false);
}

DriftSnapshots optu_integrate(const GridState& initial, double T, int steps, int snapshot_every) {
  return integrate(initial, T, steps, snapshot_every, true);
}

}  // namespace mpflow
