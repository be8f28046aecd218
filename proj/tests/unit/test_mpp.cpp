#include <cmath>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "mpflow/errors.hpp"
#include "mpflow/geometry.hpp"
#include "mpflow/mpp.hpp"
#include "mpflow/om.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace mpflow;
using scenario::vec;

namespace {

double sup_distance(const Path& a, const Path& b) { return (a.points - b.points).cwiseAbs().maxCoeff(); }

/// The Euler-Lagrange right-hand side assembled from the finite-difference
/// oracles (Christoffels, dg/dt, z) and a 4th-order FD gradient of f.
Eigen::VectorXd oracle_da(const NoiseModel& noise, const VectorFieldSpec& u, double t, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& a) {
  const int d = static_cast<int>(x.size());
  const Eigen::MatrixXd G = oracle::cometric(noise, t, x);
  const Eigen::MatrixXd g = G.inverse();
  const auto gamma = oracle::christoffel(noise, t, x);
  const Eigen::MatrixXd gdot = oracle::metric_dt(noise, t, x);
  const Eigen::VectorXd z = oracle::drift_z(noise, u, t, x);
  Eigen::MatrixXd dz(d, d);  // (m, j) = d_m z^j
  for (int j = 0; j < d; ++j) {
    const auto zj = [&](const Eigen::VectorXd& y) { return oracle::drift_z(noise, u, t, y)[j]; };
    dz.row(j) = oracle::fd_gradient(zj, x, 1e-3).transpose();
  }
  dz.transposeInPlace();
  const auto f = [&](const Eigen::VectorXd& y) { return om_potential(noise, u, t, y).f; };
  const Eigen::VectorXd df = oracle::fd_gradient(f, x, 1e-4);

  const Eigen::VectorXd v = a + z;
  Eigen::VectorXd cov_term = Eigen::VectorXd::Zero(d), adj = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) cov_term[k] += gamma(k, i, j) * v[i] * a[j];
  const Eigen::VectorXd ga = g * a;
  for (int m = 0; m < d; ++m)
    for (int j = 0; j < d; ++j) {
      double nz = dz(m, j);
      for (int r = 0; r < d; ++r) nz += gamma(j, m, r) * z[r];
      adj[m] += ga[j] * nz;
    }
  return -cov_term + G * (df - gdot * a - adj);
}

}  // namespace

// ---- curve_rhs ---------------------------------------------------------------

TEST(CurveRhs, FlatFreeParticle) {
  const auto sc = scenario::flat(3);
  const MppState s{vec({0.1, 0.2, 0.3}), vec({1.0, -2.0, 0.5})};
  const auto r = curve_rhs(sc.noise, sc.drift, 0.0, s);
  EXPECT_EQ(r.dx, s.a);
  EXPECT_LT(r.da.norm(), 1e-15);
}

TEST(CurveRhs, FlatConstantDrift) {
  const auto u = VectorFieldSpec::constant(vec({0.7, -0.3}));
  const MppState s{vec({0.1, 0.2}), vec({1.0, -2.0})};
  const auto r = curve_rhs(scenario::flat_noise(2), u, 0.3, s);
  EXPECT_LT((r.dx - (s.a + vec({0.7, -0.3}))).norm(), 1e-15);
  EXPECT_LT(r.da.norm(), 1e-15);
}

TEST(CurveRhs, FlatLinearDrift) {
  Eigen::MatrixXd A(2, 2);
  A << 0.3, -1.2, 0.7, 0.5;
  const auto u = VectorFieldSpec::linear(A, vec({0.0, 0.0}));
  const MppState s{vec({0.4, -0.9}), vec({1.0, 2.0})};
  const auto r = curve_rhs(scenario::flat_noise(2), u, 0.0, s);
  EXPECT_LT((r.dx - (s.a + A * s.x)).norm(), 1e-14);
  EXPECT_LT((r.da + A.transpose() * s.a).norm(), 1e-14);
}

TEST(CurveRhs, MatchesFiniteDifferenceAssembly) {
  for (const auto& sc : {scenario::kernels(2), scenario::conformal(2, 0.3), scenario::kernels(3),
                         scenario::kernels(1)}) {
    const int d = sc.noise.dimension();
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 4; ++trial) {
      const Eigen::VectorXd x = oracle::random_point(rng, d, 0.9);
      const Eigen::VectorXd a = oracle::random_point(rng, d, 1.0);
      const double t = 0.15 + 0.2 * trial;
      const auto r = curve_rhs(sc.noise, sc.drift, t, {x, a});
      const Eigen::VectorXd expect = oracle_da(sc.noise, sc.drift, t, x, a);
      for (int k = 0; k < d; ++k)
        EXPECT_TRUE(oracle::close(r.da[k], expect[k], 1e-5, 1e-7)) << sc.name << " " << r.da[k] << " vs " << expect[k];
      EXPECT_LT((r.dx - a - oracle::drift_z(sc.noise, sc.drift, t, x)).norm(), 1e-6);
    }
  }
}

// ---- integrate_mpp -------------------------------------------------------------

TEST(IntegrateMpp, FlatEndpointExact) {
  const auto sc = scenario::flat(2);
  const Eigen::VectorXd x0 = vec({0.3, -0.2}), p = vec({1.1, 0.4});
  const Path path = integrate_mpp(sc.noise, sc.drift, x0, p / 2.0, 2.0, 10);
  EXPECT_EQ(path.nodes(), 11);
  EXPECT_NEAR(path.times.back(), 2.0, 1e-15);
  EXPECT_LT((path.point(10) - (x0 + p)).norm(), 1e-14);
  for (int k = 0; k <= 10; ++k) EXPECT_LT((path.velocities.row(k).transpose() - p / 2.0).norm(), 1e-14);
}

TEST(IntegrateMpp, LinearDriftMatchesMatrixExponential) {
  // x' = a + A x, a' = -A^T a has a closed-form solution through the block matrix exponential.
  Eigen::MatrixXd A(2, 2);
  A << 0.2, -0.5, 0.4, -0.1;
  const auto u = VectorFieldSpec::linear(A, vec({0.0, 0.0}));
  const Eigen::VectorXd x0 = vec({0.5, 0.2}), v0 = vec({0.3, -0.4});
  const Path path = integrate_mpp(scenario::flat_noise(2), u, x0, v0, 1.0, 400);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(4, 4);
  M.topLeftCorner(2, 2) = A;
  M.topRightCorner(2, 2) = Eigen::MatrixXd::Identity(2, 2);
  M.bottomRightCorner(2, 2) = -A.transpose();
  Eigen::VectorXd y(4);
  y << x0, v0 - A * x0;
  // Taylor series of exp(M) y; M is small so 30 terms are exact to roundoff.
  Eigen::VectorXd term = y, sum = y;
  for (int n = 1; n < 30; ++n) {
    term = M * term / n;
    sum += term;
  }
  EXPECT_LT((path.point(400) - sum.head(2)).norm(), 1e-11);
}

TEST(IntegrateMpp, FourthOrderConvergence) {
  for (const auto& sc : {scenario::kernels(2), scenario::conformal(2, 0.3)}) {
    const Eigen::VectorXd x0 = vec({-0.4, 0.3}), v0 = vec({0.8, -0.5});
    const Eigen::VectorXd ref = integrate_mpp(sc.noise, sc.drift, x0, v0, 1.0, 1280).point(1280);
    auto err = [&](int N) { return (integrate_mpp(sc.noise, sc.drift, x0, v0, 1.0, N).point(N) - ref).norm(); };
    const double e1 = err(20), e2 = err(40), e3 = err(80);
    EXPECT_GT(e1 / e2, 13.0) << sc.name;
    EXPECT_LT(e1 / e2, 19.0) << sc.name;
    EXPECT_GT(e2 / e3, 13.0) << sc.name;
    EXPECT_LT(e2 / e3, 19.0) << sc.name;
  }
}

TEST(IntegrateMpp, DiscreteCriticality) {
  for (const auto& sc : {scenario::flat(2), scenario::conformal(2, 0.3), scenario::kernels(2),
                         scenario::Scenario{"single", scenario::single_kernel_noise(), VectorFieldSpec::zero(2)}}) {
    const Path path = integrate_mpp(sc.noise, sc.drift, vec({-0.5, 0.1}), vec({0.9, 0.3}), 1.0, 200);
    const Eigen::MatrixXd Gm = om_gradient(sc.noise, sc.drift, path, Quadrature::Midpoint);
    EXPECT_LE(Gm.middleRows(1, 199).cwiseAbs().maxCoeff(), 1e-3) << sc.name;
    // Nodes coupled to the one-sided endpoint stencils are excluded for the trapezoid rule.
    const Eigen::MatrixXd Gt = om_gradient(sc.noise, sc.drift, path);
    EXPECT_LE(Gt.middleRows(3, 195).cwiseAbs().maxCoeff(), 1e-3) << sc.name;
  }
}

TEST(IntegrateMpp, TrapezoidEndpointStencilIsNotVariational) {
  // At the exact flat minimizer the trapezoid gradient at node 1 is v/2.
  const auto sc = scenario::flat(2);
  const Path path = integrate_mpp(sc.noise, sc.drift, vec({0.0, 0.0}), vec({0.9, 0.0}), 1.0, 200);
  EXPECT_NEAR(om_gradient(sc.noise, sc.drift, path)(1, 0), 0.45, 1e-12);
  EXPECT_LT(om_gradient(sc.noise, sc.drift, path, Quadrature::Midpoint).cwiseAbs().middleRows(1, 199).maxCoeff(),
            1e-12);
}

TEST(IntegrateMpp, BlowUpAndEllipticityAreReported) {
  const auto sc = scenario::flat(2);
  IntegrateOptions opts;
  opts.blowup_radius = 2.0;
  try {
    integrate_mpp(sc.noise, sc.drift, vec({0.0, 0.0}), vec({5.0, 0.0}), 1.0, 100, opts);
    FAIL();
  } catch (const BlowUp& e) {
    EXPECT_GT(e.time(), 0.3);
    EXPECT_LT(e.time(), 0.5);
  }
  const auto conf = scenario::conformal(2, 1.0);
  EXPECT_THROW(integrate_mpp(conf.noise, conf.drift, vec({2.0, 0.0}), vec({20.0, 0.0}), 1.0, 100),
               EllipticityViolation);
}

// ---- shooting ----------------------------------------------------------------------

TEST(Shoot, FlatIsOneNewtonStep) {
  const auto sc = scenario::flat(2);
  ShootingProblem prob{vec({0.1, 0.2}), vec({1.3, -0.8}), 2.0};
  const auto r = shoot(sc.noise, sc.drift, prob, 50);
  EXPECT_LE(r.iterations, 1);
  EXPECT_LT(r.residual, 1e-12);
  EXPECT_LT((r.v0 - (prob.xT - prob.x0) / 2.0).norm(), 1e-12);
}

TEST(Shoot, AgreesWithDirectMinimization) {
  for (const auto& sc : {scenario::flat(2), scenario::conformal(2, 0.3), scenario::kernels(2),
                         scenario::Scenario{"single", scenario::single_kernel_noise(), VectorFieldSpec::zero(2)}}) {
    const Eigen::VectorXd x0 = vec({-0.7, -0.5}), xT = vec({0.6, 0.4});
    const int N = 100;
    const auto s = shoot(sc.noise, sc.drift, {x0, xT, 1.0}, N);
    EXPECT_LT(s.residual, 1e-9) << sc.name;
    const auto m = direct_minimize(sc.noise, sc.drift, x0, xT, 1.0, N);
    EXPECT_LT(sup_distance(s.path, m.path), 1e-3) << sc.name;
    const double os = om_integral(sc.noise, sc.drift, s.path), om = om_integral(sc.noise, sc.drift, m.path);
    EXPECT_LT(oracle::rel_err(os, om), 1e-4) << sc.name;
  }
}

TEST(Shoot, ReportsBestIterateOnFailure) {
  const auto sc = scenario::kernels(2);
  ShootingProblem prob{vec({-0.7, -0.5}), vec({0.6, 0.4}), 1.0};
  prob.max_iter = 1;
  prob.tolerance = 1e-14;
  prob.initial_velocity = vec({-3.0, 2.0});
  try {
    shoot(sc.noise, sc.drift, prob, 40);
    FAIL();
  } catch (const ShootingFailure& e) {
    EXPECT_GT(e.residual(), 1e-14);
    EXPECT_EQ(e.best().path.nodes(), 41);
    EXPECT_NEAR((e.best().path.point(40) - prob.xT).norm(), e.best().residual, 1e-15);
  }
}

TEST(Shoot, RejectsInvalidProblem) {
  const auto sc = scenario::flat(2);
  EXPECT_THROW(shoot(sc.noise, sc.drift, {vec({0.0, 0.0}), vec({1.0, 1.0}), 0.0}, 10), InvalidArgument);
  EXPECT_THROW(shoot(sc.noise, sc.drift, {vec({0.0, 0.0}), vec({1.0}), 1.0}, 10), InvalidArgument);
}

// ---- mpp_flow --------------------------------------------------------------------------

TEST(MppFlow, ConstantDivergenceDriftGivesDeterministicFlow) {
  // z = u and f = tr(A)/2 is constant, so a stays zero and the most probable
  // trajectory is the deterministic characteristic.
  Eigen::MatrixXd A(2, 2);
  A << 0.1, -0.6, 0.6, 0.1;
  const auto u = VectorFieldSpec::linear(A, vec({0.2, 0.0}));
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(vec({-1.0 + 2.0 * i / 39.0, -0.5}));
  const auto res = mpp_flow(scenario::flat_noise(2), u, pts, std::nullopt, 1.0, 200);
  ASSERT_EQ(res.size(), 40u);
  for (std::size_t i = 0; i < res.size(); ++i) {
    ASSERT_EQ(res[i].status, PointStatus::Ok);
    // RK4 of the deterministic flow x' = A x + c with the same grid.
    Eigen::VectorXd x = pts[i];
    const double h = 1.0 / 200;
    auto F = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return A * y + vec({0.2, 0.0}); };
    for (int k = 0; k < 200; ++k) {
      const Eigen::VectorXd k1 = F(x), k2 = F(x + 0.5 * h * k1), k3 = F(x + 0.5 * h * k2), k4 = F(x + h * k3);
      x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    EXPECT_LT((res[i].path.point(200) - x).norm(), 1e-12);
  }
}

TEST(MppFlow, PermutationEquivariantAndThreadIndependent) {
  const auto sc = scenario::kernels(2);
  std::vector<Eigen::VectorXd> pts, tgts;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 6; ++i) {
    pts.push_back(oracle::random_point(rng, 2, 0.8));
    tgts.push_back(oracle::random_point(rng, 2, 0.8));
  }
  MppFlowOptions one;
  MppFlowOptions four;
  four.threads = 4;
  const auto a = mpp_flow(sc.noise, sc.drift, pts, tgts, 1.0, 60, one);
  const auto b = mpp_flow(sc.noise, sc.drift, pts, tgts, 1.0, 60, four);
  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  std::vector<Eigen::VectorXd> pp, tp;
  for (int j : perm) {
    pp.push_back(pts[j]);
    tp.push_back(tgts[j]);
  }
  const auto c = mpp_flow(sc.noise, sc.drift, pp, tp, 1.0, 60, four);
  for (int i = 0; i < 6; ++i) {
    ASSERT_EQ(a[i].status, PointStatus::Ok) << a[i].message;
    EXPECT_EQ(a[i].path.points, b[i].path.points);
    EXPECT_EQ(a[perm[i]].path.points, c[i].path.points);
    EXPECT_EQ(a[perm[i]].v0, c[i].v0);
    EXPECT_LT(a[i].residual, 1e-9);
    EXPECT_NEAR(a[i].om_value, om_integral(sc.noise, sc.drift, a[i].path), 1e-12);
  }
}

TEST(MppFlow, FailuresAreIsolatedPerPoint) {
  const auto sc = scenario::conformal(2, 1.0);
  std::vector<Eigen::VectorXd> pts{vec({0.0, 0.0}), vec({3.0, 0.0}), vec({0.2, 0.1})};
  const auto res = mpp_flow(sc.noise, sc.drift, pts, std::nullopt, 1.0, 20);
  ASSERT_EQ(res.size(), 3u);
  EXPECT_EQ(res[0].status, PointStatus::Ok);
  EXPECT_EQ(res[1].status, PointStatus::EllipticityViolation);
  EXPECT_FALSE(res[1].message.empty());
  EXPECT_EQ(res[2].status, PointStatus::Ok);
  EXPECT_STREQ(to_string(PointStatus::EllipticityViolation), "ellipticity_violation");
  EXPECT_THROW(mpp_flow(sc.noise, sc.drift, pts, std::vector<Eigen::VectorXd>{vec({0.0, 0.0})}, 1.0, 20),
               InvalidArgument);
}
