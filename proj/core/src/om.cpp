#include "mpflow/om.hpp"

#include <array>
#include <cmath>
#include <string>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <ceres/ceres.h>

#include "mpflow/detail/geometry_eval.hpp"
#include "mpflow/errors.hpp"

namespace mpflow {

void Path::validate() const {
  if (nodes() < 3) throw InvalidArgument("path: need at least 3 nodes");
  if (static_cast<int>(times.size()) != nodes()) throw InvalidArgument("path: times/points size mismatch");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw InvalidArgument("path: times must increase strictly");
  if (!points.allFinite()) throw InvalidArgument("path: non-finite point");
  if (velocities.size() != 0 && (velocities.rows() != points.rows() || velocities.cols() != points.cols()))
    throw InvalidArgument("path: velocity shape mismatch");
}

Path Path::straight_line(const Eigen::VectorXd& from, const Eigen::VectorXd& to, double T, int intervals) {
  if (intervals < 2) throw InvalidArgument("path: need at least 2 intervals");
  if (from.size() != to.size()) throw InvalidArgument("path: endpoint dimension mismatch");
  Path p;
  p.times.resize(intervals + 1);
  p.points.resize(intervals + 1, from.size());
  p.velocities.resize(intervals + 1, from.size());
  const Eigen::VectorXd v = (to - from) / T;
  for (int k = 0; k <= intervals; ++k) {
    const double s = static_cast<double>(k) / intervals;
    p.times[k] = s * T;
    p.points.row(k) = ((1.0 - s) * from + s * to).transpose();
    p.velocities.row(k) = v.transpose();
  }
  p.points.row(intervals) = to.transpose();
  return p;
}

namespace {

using detail::Vec;

template <int D>
Vec<double, D> row(const Eigen::MatrixXd& m, int k) {
  Vec<double, D> a;
  for (int i = 0; i < D; ++i) a[i] = m(k, i);
  return a;
}

template <int D>
double integrand(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const Vec<double, D>& x,
                 const Vec<double, D>& v) {
  const auto F = detail::full_checked<D>(noise, drift, t, x);
  Vec<double, D> a;
  for (int i = 0; i < D; ++i) a[i] = v[i] - F.b.z[i];
  double kinetic = 0.0;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) kinetic += a[i] * F.b.metric[i][j] * a[j];
  return 0.5 * kinetic + F.f;
}

template <int D>
struct IntegrandGradient {
  double H = 0.0;
  Vec<double, D> dx{};
  Vec<double, D> dv{};
};

template <int D>
IntegrandGradient<D> integrand_gradient(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                                        const Vec<double, D>& x, const Vec<double, D>& v) {
  using DD = Dual<double, D>;
  const auto F = detail::full_with_gradient<D>(noise, drift, t, x);
  Vec<DD, D> a;
  for (int i = 0; i < D; ++i) a[i] = DD(v[i]) - F.b.z[i];
  DD H(0.0);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) H += a[i] * F.b.metric[i][j] * a[j];
  H = 0.5 * H + F.f;

  IntegrandGradient<D> out;
  out.H = H.v;
  for (int i = 0; i < D; ++i) {
    out.dx[i] = H.d[i];
    double acc = 0.0;
    for (int j = 0; j < D; ++j) acc += F.b.metric[i][j].v * a[j].v;
    out.dv[i] = acc;
  }
  return out;
}

// Derivative at t_at of the quadratic through (ta, tb, tc): weights for each node.
std::array<double, 3> derivative_weights(double ta, double tb, double tc, double at) {
  return {((at - tb) + (at - tc)) / ((ta - tb) * (ta - tc)), ((at - ta) + (at - tc)) / ((tb - ta) * (tb - tc)),
          ((at - ta) + (at - tb)) / ((tc - ta) * (tc - tb))};
}

struct Stencil {
  int first;
  std::array<double, 3> w;
};

Stencil velocity_stencil(const std::vector<double>& t, int k) {
  const int last = static_cast<int>(t.size()) - 1;
  const int first = k == 0 ? 0 : (k == last ? last - 2 : k - 1);
  return {first, derivative_weights(t[first], t[first + 1], t[first + 2], t[k])};
}

template <int D>
Vec<double, D> stencil_velocity(const Path& p, const Stencil& s) {
  Vec<double, D> v{};
  for (int m = 0; m < 3; ++m)
    for (int i = 0; i < D; ++i) v[i] += s.w[m] * p.points(s.first + m, i);
  return v;
}

double trapezoid_weight(const std::vector<double>& t, int k) {
  const int last = static_cast<int>(t.size()) - 1;
  if (k == 0) return 0.5 * (t[1] - t[0]);
  if (k == last) return 0.5 * (t[last] - t[last - 1]);
  return 0.5 * (t[k + 1] - t[k - 1]);
}

template <int D>
double integral(const NoiseModel& noise, const VectorFieldSpec& drift, const Path& p, Quadrature rule) {
  double acc = 0.0;
  const int n = p.nodes();
  if (rule == Quadrature::Trapezoid) {
    for (int k = 0; k < n; ++k) {
      const auto v = stencil_velocity<D>(p, velocity_stencil(p.times, k));
      acc += trapezoid_weight(p.times, k) * integrand<D>(noise, drift, p.times[k], row<D>(p.points, k), v);
    }
  } else {
    for (int k = 0; k + 1 < n; ++k) {
      const double h = p.times[k + 1] - p.times[k];
      Vec<double, D> m, v;
      for (int i = 0; i < D; ++i) {
        m[i] = 0.5 * (p.points(k, i) + p.points(k + 1, i));
        v[i] = (p.points(k + 1, i) - p.points(k, i)) / h;
      }
      acc += h * integrand<D>(noise, drift, p.times[k] + 0.5 * h, m, v);
    }
  }
  return acc;
}

template <int D>
double integral_and_gradient(const NoiseModel& noise, const VectorFieldSpec& drift, const Path& p, Quadrature rule,
                             Eigen::MatrixXd& grad) {
  const int n = p.nodes();
  grad.setZero(n, D);
  double acc = 0.0;
  if (rule == Quadrature::Trapezoid) {
    for (int k = 0; k < n; ++k) {
      const Stencil s = velocity_stencil(p.times, k);
      const double w = trapezoid_weight(p.times, k);
      const auto hg =
          integrand_gradient<D>(noise, drift, p.times[k], row<D>(p.points, k), stencil_velocity<D>(p, s));
      acc += w * hg.H;
      for (int i = 0; i < D; ++i) {
        grad(k, i) += w * hg.dx[i];
        for (int m = 0; m < 3; ++m) grad(s.first + m, i) += w * s.w[m] * hg.dv[i];
      }
    }
  } else {
    for (int k = 0; k + 1 < n; ++k) {
      const double h = p.times[k + 1] - p.times[k];
      Vec<double, D> m, v;
      for (int i = 0; i < D; ++i) {
        m[i] = 0.5 * (p.points(k, i) + p.points(k + 1, i));
        v[i] = (p.points(k + 1, i) - p.points(k, i)) / h;
      }
      const auto hg = integrand_gradient<D>(noise, drift, p.times[k] + 0.5 * h, m, v);
      acc += h * hg.H;
      for (int i = 0; i < D; ++i) {
        grad(k, i) += 0.5 * h * hg.dx[i] - hg.dv[i];
        grad(k + 1, i) += 0.5 * h * hg.dx[i] + hg.dv[i];
      }
    }
  }
  return acc;
}

void check_path(const NoiseModel& noise, const VectorFieldSpec& drift, const Path& path) {
  path.validate();
  if (path.dimension() != noise.dimension() || drift.dimension() != noise.dimension())
    throw InvalidArgument("path, drift and noise model dimensions differ");
}

class MidpointObjective final : public ceres::FirstOrderFunction {
 public:
  MidpointObjective(const NoiseModel& noise, const VectorFieldSpec& drift, Path frame)
      : noise_(noise), drift_(drift), frame_(std::move(frame)) {}

  int NumParameters() const override {
    return static_cast<int>((frame_.nodes() - 2) * frame_.dimension());
  }

  bool Evaluate(const double* params, double* cost, double* gradient) const override {
    Path p = frame_;
    unpack(params, p);
    try {
      if (gradient) {
        Eigen::MatrixXd g;
        *cost = detail::with_dimension(p.dimension(), [&](auto dc) {
          return integral_and_gradient<decltype(dc)::value>(noise_, drift_, p, Quadrature::Midpoint, g);
        });
        const int d = p.dimension();
        for (int k = 1; k + 1 < p.nodes(); ++k)
          for (int i = 0; i < d; ++i) gradient[(k - 1) * d + i] = g(k, i);
      } else {
        *cost = om_integral(noise_, drift_, p, Quadrature::Midpoint);
      }
    } catch (const EllipticityViolation&) {
      return false;  // line search backs off
    }
    return std::isfinite(*cost);
  }

  void unpack(const double* params, Path& p) const {
    const int d = p.dimension();
    for (int k = 1; k + 1 < p.nodes(); ++k)
      for (int i = 0; i < d; ++i) p.points(k, i) = params[(k - 1) * d + i];
  }

 private:
  const NoiseModel& noise_;
  const VectorFieldSpec& drift_;
  Path frame_;
};

}  // namespace

double om_integrand(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& v) {
  const int d = noise.dimension();
  if (x.size() != d || v.size() != d || drift.dimension() != d)
    throw InvalidArgument("om_integrand: dimension mismatch");
  return detail::with_dimension(d, [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    return integrand<D>(noise, drift, t, detail::to_array<D>(x), detail::to_array<D>(v));
  });
}

double om_integral(const NoiseModel& noise, const VectorFieldSpec& drift, const Path& path, Quadrature rule) {
  check_path(noise, drift, path);
  return detail::with_dimension(path.dimension(), [&](auto dc) {
    return integral<decltype(dc)::value>(noise, drift, path, rule);
  });
}

Eigen::MatrixXd om_gradient(const NoiseModel& noise, const VectorFieldSpec& drift, const Path& path,
                            Quadrature rule) {
  check_path(noise, drift, path);
  Eigen::MatrixXd g;
  detail::with_dimension(path.dimension(), [&](auto dc) {
    return integral_and_gradient<decltype(dc)::value>(noise, drift, path, rule, g);
  });
  return g;
}

static Eigen::VectorXd interior_gradient(const NoiseModel& noise, const VectorFieldSpec& drift, const Path& p) {
  const Eigen::MatrixXd g = om_gradient(noise, drift, p, Quadrature::Midpoint);
  const int d = p.dimension(), n = p.nodes() - 2;
  Eigen::VectorXd out(n * d);
  for (int k = 0; k < n; ++k) out.segment(k * d, d) = g.row(k + 1).transpose();
  return out;
}

// Newton iterations on the interior gradient.  The midpoint gradient at node k
// only involves nodes k-1..k+1, so the Hessian is block tridiagonal and three
// colours of simultaneous central differences recover it exactly up to FD error.
// L-BFGS stalls once function decreases drop below roundoff; this does not.
static void newton_polish(const NoiseModel& noise, const VectorFieldSpec& drift, Path& path, double tolerance,
                   int max_steps) {
  const int d = path.dimension(), n = path.nodes() - 2, size = n * d;
  Eigen::VectorXd g = interior_gradient(noise, drift, path);
  double value = om_integral(noise, drift, path, Quadrature::Midpoint);
  for (int step = 0; step < max_steps && g.cwiseAbs().maxCoeff() >= tolerance; ++step) {
    std::vector<Eigen::Triplet<double>> entries;
    for (int colour = 0; colour < 3; ++colour)
      for (int i = 0; i < d; ++i) {
        Path plus = path, minus = path;
        std::vector<double> steps(n, 0.0);
        for (int k = colour; k < n; k += 3) {
          steps[k] = 1e-6 * std::max(1.0, std::abs(path.points(k + 1, i)));
          plus.points(k + 1, i) += steps[k];
          minus.points(k + 1, i) -= steps[k];
        }
        const Eigen::VectorXd diff = interior_gradient(noise, drift, plus) - interior_gradient(noise, drift, minus);
        for (int k = colour; k < n; k += 3)
          for (int r = std::max(0, k - 1); r <= std::min(n - 1, k + 1); ++r)
            for (int j = 0; j < d; ++j)
              entries.emplace_back(r * d + j, k * d + i, diff[r * d + j] / (2.0 * steps[k]));
      }
    Eigen::SparseMatrix<double> H(size, size);
    H.setFromTriplets(entries.begin(), entries.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(H);
    if (lu.info() != Eigen::Success) return;
    const Eigen::VectorXd delta = lu.solve(-g);
    if (lu.info() != Eigen::Success || !delta.allFinite()) return;

    bool improved = false;
    for (double scale = 1.0; scale > 1e-3; scale *= 0.5) {
      Path trial = path;
      for (int k = 0; k < n; ++k) trial.points.row(k + 1) += scale * delta.segment(k * d, d).transpose();
      Eigen::VectorXd gt;
      double vt = 0.0;
      try {
        gt = interior_gradient(noise, drift, trial);
        vt = om_integral(noise, drift, trial, Quadrature::Midpoint);
      } catch (const EllipticityViolation&) {
        continue;
      }
      if (gt.cwiseAbs().maxCoeff() < g.cwiseAbs().maxCoeff() && vt <= value + 1e-12 * std::abs(value)) {
        path = std::move(trial);
        g = std::move(gt);
        value = vt;
        improved = true;
        break;
      }
    }
    if (!improved) return;
  }
}

DirectMinimizeResult direct_minimize(const NoiseModel& noise, const VectorFieldSpec& drift,
                                     const Eigen::VectorXd& x0, const Eigen::VectorXd& xT, double T, int N,
                                     const std::optional<Path>& init, const DirectMinimizeOptions& options) {
  if (!(T > 0.0)) throw InvalidArgument("direct_minimize: horizon must be positive");
  Path start = init ? *init : Path::straight_line(x0, xT, T, N);
  check_path(noise, drift, start);
  if (start.nodes() != N + 1) throw InvalidArgument("direct_minimize: init must have N+1 nodes");
  if ((start.point(0) - x0).norm() > 0.0 || (start.point(N) - xT).norm() > 0.0)
    throw InvalidArgument("direct_minimize: init endpoints must match x0 and xT");
  start.velocities.resize(0, 0);

  const int d = start.dimension();
  std::vector<double> params(static_cast<std::size_t>((N - 1) * d));
  for (int k = 1; k < N; ++k)
    for (int i = 0; i < d; ++i) params[(k - 1) * d + i] = start.points(k, i);

  auto* objective = new MidpointObjective(noise, drift, start);
  ceres::GradientProblem problem(objective);  // takes ownership
  ceres::GradientProblemSolver::Options opts;
  opts.line_search_direction_type = ceres::LBFGS;
  opts.max_lbfgs_rank = options.lbfgs_memory;
  opts.max_num_iterations = options.max_iterations;
  opts.gradient_tolerance = options.gradient_tolerance;
  opts.function_tolerance = 0.0;
  opts.parameter_tolerance = 0.0;
  opts.logging_type = ceres::SILENT;
  opts.minimizer_progress_to_stdout = false;
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(opts, problem, params.data(), &summary);

  DirectMinimizeResult out;
  out.path = start;
  objective->unpack(params.data(), out.path);
  if (summary.termination_type != ceres::NO_CONVERGENCE)
    newton_polish(noise, drift, out.path, options.gradient_tolerance, 20);
  Eigen::MatrixXd g = om_gradient(noise, drift, out.path, Quadrature::Midpoint);
  out.gradient_norm = g.middleRows(1, N - 1).cwiseAbs().maxCoeff();
  out.om_value = om_integral(noise, drift, out.path, Quadrature::Midpoint);
  out.iterations = static_cast<int>(summary.iterations.size());
  out.converged = out.gradient_norm < options.gradient_tolerance;
  if (!out.converged && options.require_convergence)
    throw NonConvergence("direct_minimize: gradient max-norm " + std::to_string(out.gradient_norm) +
                             " after " + std::to_string(out.iterations) + " iterations (" +
                             summary.message + ")",
                         out.gradient_norm, out.iterations);
  return out;
}

}  // namespace mpflow
