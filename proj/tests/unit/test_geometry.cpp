#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "mpflow/diagnostics.hpp"
#include "mpflow/errors.hpp"
#include "mpflow/geometry.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace mpflow;
using scenario::vec;

namespace {

QuadraticTestFunction random_quadratic(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> N(0.0, 1.0);
  QuadraticTestFunction phi;
  phi.c = N(rng);
  phi.b = Eigen::VectorXd(d);
  for (int i = 0; i < d; ++i) phi.b[i] = N(rng);
  Eigen::MatrixXd B(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) B(i, j) = N(rng);
  phi.A = B + B.transpose();
  return phi;
}

void expect_tensor_near(const Tensor3& a, const Tensor3& b, double rel, double abs) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_TRUE(oracle::close(a.data()[i], b.data()[i], rel, abs)) << i << ": " << a.data()[i] << " vs " << b.data()[i];
}

}  // namespace

// ---- closed-form cases ---------------------------------------------------

TEST(GeometryFlat, EuclideanEverywhere) {
  for (int d = 1; d <= 3; ++d) {
    const auto noise = scenario::flat_noise(d);
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(d, -0.4, 0.7);
    EXPECT_TRUE(cometric(noise, 0.2, x).isIdentity(0.0));
    const auto md = metric_and_derivatives(noise, 0.2, x);
    for (double v : md.d_metric.data()) EXPECT_EQ(v, 0.0);
    for (double v : md.d2_metric.data()) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(md.metric_dt.isZero(0.0));
    const auto G = christoffel(noise, 0.2, x);
    for (double v : G.data()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(scalar_curvature(noise, 0.2, x), 0.0);
  }
}

TEST(GeometryFlat, DriftCorrectionIsTheDrift) {
  const auto noise = scenario::flat_noise(2);
  const auto u = scenario::kernel_drift(2);
  const Eigen::VectorXd x = vec({0.3, -0.1});
  const auto z = drift_z(noise, u, 0.4, x);
  EXPECT_LT((z.z - eval_value(u, 0.4, x)).norm(), 1e-15);
}

TEST(GeometryFlat, LinearDriftPotentialIsHalfTrace) {
  Eigen::MatrixXd A(2, 2);
  A << 0.3, -1.2, 0.7, 0.5;
  const auto u = VectorFieldSpec::linear(A, vec({0.1, 0.2}));
  const auto p = om_potential(scenario::flat_noise(2), u, 0.0, vec({0.8, -0.6}));
  EXPECT_NEAR(p.f, 0.4, 1e-14);
  EXPECT_LT(p.grad_f.norm(), 1e-14);
  const auto zero = om_potential(scenario::flat_noise(2), VectorFieldSpec::zero(2), 0.0, vec({0.8, -0.6}));
  EXPECT_EQ(zero.f, 0.0);
}

TEST(GeometryFlat, GeneratorOnHalfSquaredNorm) {
  const auto u = scenario::kernel_drift(3);
  const Eigen::VectorXd x = vec({0.2, -0.3, 0.5});
  QuadraticTestFunction phi{0.0, Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)};
  EXPECT_NEAR(generator_apply(scenario::flat_noise(3), u, 0.1, x, phi), 1.5 + eval_value(u, 0.1, x).dot(x), 1e-13);
  QuadraticTestFunction c{2.5, Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(3, 3)};
  EXPECT_EQ(generator_apply(scenario::kernel_noise(3), u, 0.1, x, c), 0.0);
}

TEST(GeometryConformal, CometricValues) {
  const auto noise = scenario::conformal_noise(2, 1.0);
  EXPECT_TRUE(cometric(noise, 0.0, vec({0.0, 0.0})).isIdentity(1e-15));
  const Eigen::MatrixXd expected = std::exp(-2.0) * Eigen::MatrixXd::Identity(2, 2);
  EXPECT_LT((cometric(noise, 0.0, vec({1.0, 0.0})) - expected).norm(), 1e-15);
}

TEST(GeometryConformal, MetricDerivativeMatchesAnalyticForm) {
  const double beta = 0.3;
  const auto md = metric_and_derivatives(scenario::conformal_noise(2, beta), 0.0, vec({1.0, 0.0}));
  const double dlambda[2] = {2.0 * beta, 0.0};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        EXPECT_NEAR(md.d_metric(i, j, k), 2.0 * dlambda[i] * md.metric(j, k), 1e-12);
}

TEST(GeometryConformal, ChristoffelIdentity) {
  const double beta = 0.1;
  const Eigen::VectorXd x = vec({1.0, 0.0});
  const auto G = christoffel(scenario::conformal_noise(2, beta), 0.0, x);
  EXPECT_NEAR(G(0, 0, 0), 0.2, 1e-14);
  const Eigen::VectorXd dl = 2.0 * beta * x;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        EXPECT_NEAR(G(k, i, j), (k == j) * dl[i] + (k == i) * dl[j] - (i == j) * dl[k], 1e-14);
}

TEST(GeometryConformal, ScalarCurvature) {
  EXPECT_NEAR(scalar_curvature(scenario::conformal_noise(2, 0.25), 0.0, vec({0.0, 0.0})), -2.0, 1e-6);
  for (double beta : {0.1, 0.5}) {
    const auto noise = scenario::conformal_noise(2, beta);
    for (const auto& x : {vec({0.0, 0.0}), vec({0.4, -0.3}), vec({-0.7, 0.2})}) {
      const double lambda = beta * x.squaredNorm();
      EXPECT_NEAR(scalar_curvature(noise, 0.0, x), -8.0 * beta * std::exp(-2.0 * lambda), 1e-6);
    }
  }
}

TEST(GeometryKernel, SingleKernelCometric) {
  const double eps = 0.05;
  const Eigen::VectorXd a = vec({0.4, -0.2});
  const auto k = VectorFieldSpec::gaussian(vec({0.1, 0.3}), a, 0.6);
  NoiseModel noise({VectorFieldSpec::constant(vec({std::sqrt(eps), 0.0})),
                    VectorFieldSpec::constant(vec({0.0, std::sqrt(eps)})), k},
                   1e-3);
  const Eigen::VectorXd x = vec({-0.2, 0.5});
  const Eigen::VectorXd ax = eval_value(k, 0.0, x);
  const Eigen::MatrixXd expected = eps * Eigen::MatrixXd::Identity(2, 2) + ax * ax.transpose();
  EXPECT_LT((cometric(noise, 0.0, x) - expected).norm(), 1e-15);
  EXPECT_LT((cometric(noise, 0.0, x) - oracle::cometric(noise, 0.0, x)).norm(), 1e-15);
}

// ---- generator oracle for z ------------------------------------------------

TEST(GeometryDrift, OneDimensionalSineNoise) {
  const auto sigma = VectorFieldSpec::fourier(0, vec({1.0}), 1.0, {0.3}, {});
  NoiseModel noise({sigma}, 1e-3);
  const auto u = VectorFieldSpec::zero(1);
  std::mt19937_64 rng(11);
  for (double x0 : {-2.0, -0.5, 0.0, 1.3, 2.9}) {
    const Eigen::VectorXd x = vec({x0});
    const auto z = drift_z(noise, u, 0.0, x);
    // In 1D, (1/2) sigma^2 is already (1/2) Laplace-Beltrami, so z vanishes.
    EXPECT_NEAR(z.z[0], 0.0, 1e-14);
    for (int r = 0; r < 5; ++r) {
      const auto phi = random_quadratic(rng, 1);
      const double lhs = generator_apply(noise, u, 0.0, x, phi);
      const double rhs = 0.5 * laplace_beltrami_apply(noise, 0.0, x, phi) + z.z.dot(phi.gradient(x));
      EXPECT_NEAR(lhs, rhs, 1e-8);
    }
  }
}

// ---- invariants over random points of each scenario ------------------------

struct Case {
  const char* name;
  scenario::Scenario (*make)();
};

class GeometryScenario : public ::testing::TestWithParam<Case> {};

TEST_P(GeometryScenario, Invariants) {
  const auto sc = GetParam().make();
  const int d = sc.noise.dimension();
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> T(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double t = T(rng);
    const Eigen::VectorXd x = oracle::random_point(rng, d, 1.0);
    const auto jet = geometry_jet(sc.noise, sc.drift, t, x);

    EXPECT_LT((jet.metric * jet.cometric - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(jet.cometric).eigenvalues().minCoeff(),
              sc.noise.ellipticity_floor);
    EXPECT_GT(jet.det_metric, 0.0);
    EXPECT_NEAR(jet.det_metric, jet.metric.determinant(), 1e-10 * jet.det_metric);

    const auto md = metric_and_derivatives(sc.noise, t, x);
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          EXPECT_EQ(jet.christoffel(k, i, j), jet.christoffel(k, j, i));
          double compat = 0.0;
          for (int l = 0; l < d; ++l)
            compat += jet.christoffel(l, k, i) * jet.metric(l, j) + jet.christoffel(l, k, j) * jet.metric(l, i);
          EXPECT_NEAR(md.d_metric(k, i, j), compat, 1e-8);
        }

    EXPECT_LT((jet.cometric_dt + jet.cometric * jet.metric_dt * jet.cometric).cwiseAbs().maxCoeff(), 1e-8);

    // Finite-difference oracles.
    expect_tensor_near(md.d_metric, oracle::d_metric(sc.noise, t, x), 1e-5, 1e-9);
    EXPECT_LT(oracle::max_rel_err(md.metric_dt, oracle::metric_dt(sc.noise, t, x), 1e-9), 1e-5);
    expect_tensor_near(jet.christoffel, oracle::christoffel(sc.noise, t, x), 1e-5, 1e-9);
    EXPECT_TRUE(oracle::close(jet.scalar_curvature, oracle::scalar_curvature(sc.noise, t, x), 1e-4, 1e-9))
        << jet.scalar_curvature << " vs " << oracle::scalar_curvature(sc.noise, t, x);
    EXPECT_LT(oracle::max_rel_err(jet.z, oracle::drift_z(sc.noise, sc.drift, t, x), 1e-6), 1e-5);
    EXPECT_TRUE(oracle::close(jet.f, oracle::om_potential(sc.noise, sc.drift, t, x), 1e-4, 1e-8))
        << jet.f << " vs " << oracle::om_potential(sc.noise, sc.drift, t, x);

    // Covariant derivative of z.
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double expect = jet.z_jacobian(i, j);
        for (int k = 0; k < d; ++k) expect += jet.christoffel(j, i, k) * jet.z[k];
        EXPECT_NEAR(jet.z_covariant(i, j), expect, 1e-12);
      }
    // Index-raised gradient of f against FD of the assembled f.
    const auto f_at = [&](const Eigen::VectorXd& y) { return om_potential(sc.noise, sc.drift, t, y).f; };
    const Eigen::VectorXd df = oracle::fd_gradient(f_at, x, 1e-4);
    const auto pot = om_potential(sc.noise, sc.drift, t, x);
    EXPECT_LT(oracle::max_rel_err(pot.df, df, 1e-6), 1e-4);
    EXPECT_LT((pot.grad_f - jet.cometric * pot.df).norm(), 1e-12 * (1.0 + pot.grad_f.norm()));
    EXPECT_LT((jet.grad_f - pot.grad_f).norm(), 1e-12 * (1.0 + pot.grad_f.norm()));

    // Generator identity on 20 random quadratics.
    for (int r = 0; r < 20; ++r) {
      const auto phi = random_quadratic(rng, d);
      const double lhs = generator_apply(sc.noise, sc.drift, t, x, phi);
      const double rhs = 0.5 * laplace_beltrami_apply(sc.noise, t, x, phi) + jet.z.dot(phi.gradient(x));
      EXPECT_NEAR(lhs, rhs, 1e-8);
    }
  }
}

TEST_P(GeometryScenario, DriftJacobianMatchesFiniteDifferences) {
  const auto sc = GetParam().make();
  const int d = sc.noise.dimension();
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd x = oracle::random_point(rng, d, 1.0);
    const auto z = drift_z(sc.noise, sc.drift, 0.35, x);
    for (int j = 0; j < d; ++j) {
      const auto zj = [&](const Eigen::VectorXd& y) { return drift_z(sc.noise, sc.drift, 0.35, y).z[j]; };
      const Eigen::VectorXd g = oracle::fd_gradient(zj, x, 1e-4);
      for (int i = 0; i < d; ++i) EXPECT_TRUE(oracle::close(z.jacobian(i, j), g[i], 1e-6, 1e-8));
    }
  }
}

TEST_P(GeometryScenario, GeodesicsConserveSpeed) {
  const auto sc = GetParam().make();
  const int d = sc.noise.dimension();
  std::mt19937_64 rng(5);
  const auto gamma = [&](const Eigen::VectorXd& y) { return christoffel(sc.noise, 0.0, y); };
  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::VectorXd x0 = oracle::random_point(rng, d, 0.8);
    const Eigen::VectorXd v0 = oracle::random_point(rng, d, 0.6);
    const auto speeds = oracle::geodesic_speeds(sc.noise, gamma, x0, v0, 1.0, 400);
    for (double s : speeds) EXPECT_NEAR(s, speeds.front(), 1e-6);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Scenarios, GeometryScenario,
    ::testing::Values(Case{"kernels1", [] { return scenario::kernels(1); }},
                      Case{"kernels2", [] { return scenario::kernels(2); }},
                      Case{"kernels3", [] { return scenario::kernels(3); }},
                      Case{"conformal2", [] { return scenario::conformal(2, 0.3); }},
                      Case{"conformal3", [] { return scenario::conformal(3, 0.2); }}),
    [](const auto& info) { return std::string(info.param.name); });

// ---- translation invariance ----------------------------------------------

TEST(GeometryIsometry, TranslatingKernelCentersTranslatesEverything) {
  const Eigen::VectorXd c = vec({0.25, -0.5});
  const double eps = 0.05;
  auto build = [&](const Eigen::VectorXd& shift) {
    std::vector<VectorFieldSpec> s{VectorFieldSpec::constant(vec({std::sqrt(eps), 0.0})),
                                   VectorFieldSpec::constant(vec({0.0, std::sqrt(eps)})),
                                   VectorFieldSpec::gaussian(vec({0.3, -0.2}) + shift, vec({0.5, 0.2}), 0.7),
                                   VectorFieldSpec::gaussian(vec({-0.4, 0.5}) + shift, vec({-0.1, 0.4}), 0.6)};
    auto drift = VectorFieldSpec::kernel_momentum({vec({0.5, -0.5}) + shift}, {vec({0.1, 0.6})}, 0.5);
    return scenario::Scenario{"shifted", NoiseModel(s, 1e-3), drift};
  };
  const auto a = build(Eigen::VectorXd::Zero(2));
  const auto b = build(c);
  const Eigen::VectorXd x = vec({0.125, 0.375});
  const auto ja = geometry_jet(a.noise, a.drift, 0.5, x);
  const auto jb = geometry_jet(b.noise, b.drift, 0.5, x + c);
  auto near = [](double p, double q) { return oracle::close(p, q, 1e-12, 1e-12); };
  for (Eigen::Index i = 0; i < ja.metric.size(); ++i) EXPECT_TRUE(near(ja.metric.data()[i], jb.metric.data()[i]));
  for (std::size_t i = 0; i < ja.christoffel.size(); ++i)
    EXPECT_TRUE(near(ja.christoffel.data()[i], jb.christoffel.data()[i]));
  EXPECT_TRUE(near(ja.scalar_curvature, jb.scalar_curvature));
  for (int i = 0; i < 2; ++i) {
    EXPECT_TRUE(near(ja.z[i], jb.z[i]));
    EXPECT_TRUE(near(ja.grad_f[i], jb.grad_f[i]));
  }
  EXPECT_TRUE(near(ja.f, jb.f));
}

// ---- ellipticity -----------------------------------------------------------

TEST(GeometryEllipticity, DegenerateCometricThrows) {
  NoiseModel noise({VectorFieldSpec::constant(vec({1.0, 0.0}))}, 1e-3);
  EXPECT_THROW(cometric(noise, 0.0, vec({0.0, 0.0})), EllipticityViolation);
  EXPECT_THROW(geometry_jet(noise, VectorFieldSpec::zero(2), 0.0, vec({0.0, 0.0})), EllipticityViolation);
  try {
    christoffel(noise, 0.5, vec({0.1, 0.2}));
    FAIL();
  } catch (const EllipticityViolation& e) {
    EXPECT_EQ(e.time(), 0.5);
    EXPECT_NEAR(e.min_eigenvalue(), 0.0, 1e-15);
  }
}

TEST(GeometryEllipticity, NearSingularWarns) {
  NoiseModel noise({VectorFieldSpec::constant(vec({1.0, 0.0})), VectorFieldSpec::constant(vec({0.0, 0.05}))}, 1e-3);
  reset_warning_counts();
  const auto before = warning_count(WarningKind::NearSingularCometric);
  EXPECT_NO_THROW(cometric(noise, 0.0, vec({0.0, 0.0})));
  EXPECT_GT(warning_count(WarningKind::NearSingularCometric), before);
  NoiseModel fine = scenario::flat_noise(2);
  reset_warning_counts();
  cometric(fine, 0.0, vec({0.0, 0.0}));
  EXPECT_EQ(warning_count(WarningKind::NearSingularCometric), 0u);
}

TEST(GeometryInput, RejectsMismatchedPoint) {
  EXPECT_THROW(cometric(scenario::flat_noise(2), 0.0, vec({0.0, 0.0, 0.0})), InvalidArgument);
  EXPECT_THROW(drift_z(scenario::flat_noise(2), VectorFieldSpec::zero(3), 0.0, vec({0.0, 0.0})), InvalidArgument);
}
