#include "mpflow/mpp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "mpflow/detail/geometry_eval.hpp"
#include "mpflow/detail/parallel.hpp"
#include "mpflow/geometry.hpp"

namespace mpflow {

namespace {

using detail::Vec;

template <int D>
struct State {
  Vec<double, D> x;
  Vec<double, D> a;
};

template <int D>
State<D> rhs(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const State<D>& s) {
  const auto F = detail::full_with_gradient<D>(noise, drift, t, s.x);
  const auto& b = F.b;
  State<D> out;
  for (int k = 0; k < D; ++k) out.x[k] = s.a[k] + b.z[k].v;

  // g(a, .) and the g-lowered a contracted with nabla z.
  Vec<double, D> a_low{};
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) a_low[j] += s.a[i] * b.metric[i][j].v;
  Vec<double, D> gdot_a{}, adj{};
  for (int j = 0; j < D; ++j)
    for (int i = 0; i < D; ++i) gdot_a[j] += b.metric_dt[j][i].v * s.a[i];
  for (int m = 0; m < D; ++m)
    for (int j = 0; j < D; ++j) adj[m] += a_low[j] * F.z_covariant[m][j].v;

  for (int k = 0; k < D; ++k) {
    double acc = 0.0;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) acc -= b.christoffel[k][i][j].v * out.x[i] * s.a[j];
    for (int j = 0; j < D; ++j) acc += b.cometric[k][j].v * (F.f.d[j] - gdot_a[j] - adj[j]);
    out.a[k] = acc;
  }
  return out;
}

template <int D>
State<D> axpy(const State<D>& s, double h, const State<D>& k) {
  State<D> r;
  for (int i = 0; i < D; ++i) {
    r.x[i] = s.x[i] + h * k.x[i];
    r.a[i] = s.a[i] + h * k.a[i];
  }
  return r;
}

template <int D>
Path integrate(const NoiseModel& noise, const VectorFieldSpec& drift, const Vec<double, D>& x0,
               const Vec<double, D>& v0, double T, int N, const IntegrateOptions& options) {
  const double h = T / N;
  Path p;
  p.times.resize(N + 1);
  p.points.resize(N + 1, D);
  p.velocities.resize(N + 1, D);

  const auto z0 = detail::full_checked<D>(noise, drift, 0.0, x0).b.z;
  State<D> s;
  s.x = x0;
  for (int i = 0; i < D; ++i) s.a[i] = v0[i] - z0[i];

  for (int n = 0; n <= N; ++n) {
    const double t = n * h;
    // k1 doubles as the exact velocity at the node.
    const State<D> k1 = rhs<D>(noise, drift, t, s);
    p.times[n] = t;
    for (int i = 0; i < D; ++i) {
      p.points(n, i) = s.x[i];
      p.velocities(n, i) = k1.x[i];
    }
    if (n == N) break;
    const State<D> k2 = rhs<D>(noise, drift, t + 0.5 * h, axpy<D>(s, 0.5 * h, k1));
    const State<D> k3 = rhs<D>(noise, drift, t + 0.5 * h, axpy<D>(s, 0.5 * h, k2));
    const State<D> k4 = rhs<D>(noise, drift, t + h, axpy<D>(s, h, k3));
    double norm2 = 0.0;
    bool finite = true;
    for (int i = 0; i < D; ++i) {
      s.x[i] += h / 6.0 * (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]);
      s.a[i] += h / 6.0 * (k1.a[i] + 2.0 * k2.a[i] + 2.0 * k3.a[i] + k4.a[i]);
      norm2 += s.x[i] * s.x[i];
      finite = finite && std::isfinite(s.x[i]) && std::isfinite(s.a[i]);
    }
    if (!finite || std::sqrt(norm2) > options.blowup_radius) {
      std::ostringstream msg;
      msg << "integrate_mpp: trajectory left radius " << options.blowup_radius << " at t=" << t + h;
      throw BlowUp(msg.str(), t + h);
    }
  }
  return p;
}

void check_dims(const NoiseModel& noise, const VectorFieldSpec& drift, const Eigen::VectorXd& a,
                const Eigen::VectorXd& b) {
  const int d = noise.dimension();
  if (drift.dimension() != d || a.size() != d || b.size() != d)
    throw InvalidArgument("mpp: dimension mismatch");
  if (!a.allFinite() || !b.allFinite()) throw InvalidArgument("mpp: non-finite input");
}

Eigen::VectorXd endpoint(const Path& p) { return p.point(p.nodes() - 1); }

}  // namespace

MppDerivative curve_rhs(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const MppState& state) {
  check_dims(noise, drift, state.x, state.a);
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const State<D> s{detail::to_array<D>(state.x), detail::to_array<D>(state.a)};
    const State<D> r = rhs<D>(noise, drift, t, s);
    MppDerivative out{Eigen::VectorXd(D), Eigen::VectorXd(D)};
    for (int i = 0; i < D; ++i) {
      out.dx[i] = r.x[i];
      out.da[i] = r.a[i];
    }
    return out;
  });
}

Path integrate_mpp(const NoiseModel& noise, const VectorFieldSpec& drift, const Eigen::VectorXd& x0,
                   const Eigen::VectorXd& v0, double T, int N, const IntegrateOptions& options) {
  check_dims(noise, drift, x0, v0);
  if (!(T > 0.0) || N < 1) throw InvalidArgument("integrate_mpp: need T > 0 and N >= 1");
  return detail::with_dimension(noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    return integrate<D>(noise, drift, detail::to_array<D>(x0), detail::to_array<D>(v0), T, N, options);
  });
}

void ShootingProblem::validate() const {
  if (!(T > 0.0)) throw InvalidArgument("shooting: T must be positive");
  if (x0.size() != xT.size()) throw InvalidArgument("shooting: endpoint dimension mismatch");
  if (!(tolerance > 0.0) || max_iter < 1) throw InvalidArgument("shooting: bad tolerance or max_iter");
  if (initial_velocity && initial_velocity->size() != x0.size())
    throw InvalidArgument("shooting: initial velocity dimension mismatch");
}

ShootingResult shoot(const NoiseModel& noise, const VectorFieldSpec& drift, const ShootingProblem& problem, int N,
                     const IntegrateOptions& options) {
  problem.validate();
  check_dims(noise, drift, problem.x0, problem.xT);
  const int d = static_cast<int>(problem.x0.size());

  ShootingResult cur;
  cur.v0 = problem.initial_velocity ? *problem.initial_velocity : Eigen::VectorXd((problem.xT - problem.x0) / problem.T);
  cur.path = integrate_mpp(noise, drift, problem.x0, cur.v0, problem.T, N, options);
  Eigen::VectorXd r = endpoint(cur.path) - problem.xT;
  cur.residual = r.norm();

  // Residual of a trial velocity; +inf when the trajectory breaks down.
  auto trial = [&](const Eigen::VectorXd& v, Path& path, Eigen::VectorXd& res) {
    try {
      path = integrate_mpp(noise, drift, problem.x0, v, problem.T, N, options);
    } catch (const EllipticityViolation&) {
      return std::numeric_limits<double>::infinity();
    } catch (const BlowUp&) {
      return std::numeric_limits<double>::infinity();
    }
    res = endpoint(path) - problem.xT;
    return res.norm();
  };

  bool levenberg = false;
  double mu = 1e-3;
  while (cur.residual > problem.tolerance && cur.iterations < problem.max_iter) {
    ++cur.iterations;
    Eigen::MatrixXd J(d, d);
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd v = cur.v0;
      const double step = 1e-6 * std::max(1.0, std::abs(v[i]));
      v[i] += step;
      Path path;
      Eigen::VectorXd res;
      if (!std::isfinite(trial(v, path, res))) {
        v[i] = cur.v0[i] - step;
        if (!std::isfinite(trial(v, path, res)))
          throw ShootingFailure("shoot: endpoint map undefined near current iterate", cur);
        J.col(i) = (r - res) / step;
      } else {
        J.col(i) = (res - r) / step;
      }
    }

    bool improved = false;
    Path path;
    Eigen::VectorXd res;
    if (!levenberg) {
      const Eigen::VectorXd delta = J.colPivHouseholderQr().solve(-r);
      double lambda = 1.0;
      for (int k = 0; k < 12 && delta.allFinite(); ++k, lambda *= 0.5) {
        const Eigen::VectorXd v = cur.v0 + lambda * delta;
        const double norm = trial(v, path, res);
        if (norm < cur.residual) {
          levenberg = norm > 0.99 * cur.residual;
          cur.v0 = v;
          improved = true;
          break;
        }
      }
      if (!improved) levenberg = true;
    } else {
      const Eigen::MatrixXd JtJ = J.transpose() * J;
      const Eigen::VectorXd g = J.transpose() * r;
      for (int k = 0; k < 20; ++k) {
        Eigen::MatrixXd A = JtJ;
        A.diagonal().array() += mu * (1.0 + JtJ.diagonal().array());
        const Eigen::VectorXd v = cur.v0 + A.ldlt().solve(-g);
        const double norm = trial(v, path, res);
        if (norm < cur.residual) {
          mu = std::max(mu / 3.0, 1e-12);
          // Return to plain Newton once progress is healthy again.
          levenberg = norm > 0.5 * cur.residual;
          cur.v0 = v;
          improved = true;
          break;
        }
        mu *= 4.0;
      }
    }
    if (!improved) break;
    cur.path = std::move(path);
    r = res;
    cur.residual = r.norm();
  }

  if (cur.residual > problem.tolerance) {
    std::ostringstream msg;
    msg << "shoot: endpoint residual " << cur.residual << " after " << cur.iterations << " iterations";
    throw ShootingFailure(msg.str(), cur);
  }
  return cur;
}

const char* to_string(PointStatus status) {
  switch (status) {
    case PointStatus::Ok: return "ok";
    case PointStatus::NonConvergence: return "non_convergence";
    case PointStatus::EllipticityViolation: return "ellipticity_violation";
    case PointStatus::BlowUp: return "blow_up";
    case PointStatus::Failed: return "failed";
  }
  return "unknown";
}

std::vector<PointResult> mpp_flow(const NoiseModel& noise, const VectorFieldSpec& drift,
                                  const std::vector<Eigen::VectorXd>& points,
                                  const std::optional<std::vector<Eigen::VectorXd>>& targets, double T, int N,
                                  const MppFlowOptions& options) {
  if (targets && targets->size() != points.size())
    throw InvalidArgument("mpp_flow: targets and points differ in number");
  if (!options.initial_a.empty() && options.initial_a.size() != points.size())
    throw InvalidArgument("mpp_flow: initial_a and points differ in number");
  for (const auto& p : points)
    if (!p.allFinite() || p.size() != noise.dimension()) throw InvalidArgument("mpp_flow: bad point");

  std::vector<PointResult> out(points.size());
  detail::parallel_for(static_cast<int>(points.size()), options.threads, [&](int i) {
    PointResult& r = out[i];
    try {
      if (targets) {
        ShootingProblem prob;
        prob.x0 = points[i];
        prob.xT = (*targets)[i];
        prob.T = T;
        prob.tolerance = options.tolerance;
        prob.max_iter = options.max_iter;
        ShootingResult s = shoot(noise, drift, prob, N, options.integrate);
        r.v0 = s.v0;
        r.path = std::move(s.path);
        r.residual = s.residual;
        r.iterations = s.iterations;
      } else {
        Eigen::VectorXd v0 = drift_z(noise, drift, 0.0, points[i]).z;
        if (!options.initial_a.empty()) v0 += options.initial_a[i];
        r.v0 = v0;
        r.path = integrate_mpp(noise, drift, points[i], v0, T, N, options.integrate);
      }
      r.om_value = om_integral(noise, drift, r.path);
    } catch (const ShootingFailure& e) {
      r.status = PointStatus::NonConvergence;
      r.message = e.what();
      r.v0 = e.best().v0;
      r.path = e.best().path;
      r.residual = e.best().residual;
      r.iterations = e.best().iterations;
    } catch (const EllipticityViolation& e) {
      r.status = PointStatus::EllipticityViolation;
      r.message = e.what();
    } catch (const BlowUp& e) {
      r.status = PointStatus::BlowUp;
      r.message = e.what();
    } catch (const Error& e) {
      r.status = PointStatus::Failed;
      r.message = e.what();
    }
  });
  return out;
}

}  // namespace mpflow
