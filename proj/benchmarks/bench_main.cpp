#include <cmath>
#include <numbers>

#include <benchmark/benchmark.h>

#include "mpflow/epdiff1d.hpp"
#include "mpflow/geometry.hpp"
#include "mpflow/mpp.hpp"
#include "mpflow/sde.hpp"

using namespace mpflow;

namespace {

Eigen::VectorXd point(std::initializer_list<double> v) {
  Eigen::VectorXd x(v.size());
  int i = 0;
  for (double c : v) x[i++] = c;
  return x;
}

NoiseModel kernel_noise(int d) {
  std::vector<VectorFieldSpec> fields;
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd center = Eigen::VectorXd::Zero(d), amp = Eigen::VectorXd::Zero(d);
    center[0] = -0.5 + 0.5 * k;
    amp[k % d] = 1.0;
    fields.push_back(VectorFieldSpec::gaussian(center, amp, 0.6));
  }
  return NoiseModel(fields, 0.05);
}

VectorFieldSpec kernel_drift(int d) {
  std::vector<Eigen::VectorXd> pts(2, Eigen::VectorXd::Zero(d)), mom(2, Eigen::VectorXd::Zero(d));
  pts[0][0] = -0.5;
  pts[1][0] = 0.5;
  mom[0][d - 1] = 0.6;
  mom[1][d - 1] = 0.6;
  return VectorFieldSpec::kernel_momentum(pts, mom, 0.5);
}

void BM_GeometryJet(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto noise = kernel_noise(d);
  const auto drift = kernel_drift(d);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(d, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(geometry_jet(noise, drift, 0.3, x));
}
BENCHMARK(BM_GeometryJet)->Arg(1)->Arg(2)->Arg(3);

void BM_IntegrateMpp(benchmark::State& state) {
  const auto noise = kernel_noise(2);
  const auto drift = kernel_drift(2);
  const int N = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(integrate_mpp(noise, drift, point({-0.5, -0.5}), point({1.0, 0.3}), 1.0, N));
  state.SetItemsProcessed(state.iterations() * N);
}
BENCHMARK(BM_IntegrateMpp)->Arg(200);

void BM_SdeStep(benchmark::State& state) {
  SdeConfig cfg{kernel_noise(2), kernel_drift(2)};
  cfg.steps = 100;
  cfg.n_samples = 16;
  const Scheme scheme = state.range(0) == 0 ? Scheme::StratonovichHeun : Scheme::ItoEuler;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(cfg, {point({0.1, -0.2})}, scheme));
  state.SetItemsProcessed(state.iterations() * cfg.steps * cfg.n_samples);
}
BENCHMARK(BM_SdeStep)->Arg(0)->Arg(1);

void BM_EpdiffRhs(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Eigen::VectorXd u(n);
  for (int j = 0; j < n; ++j) u[j] = 0.6 * std::sin(2.0 * std::numbers::pi * j / n);
  const auto st = GridState::from_velocity(u, 1.0);
  const SpectralGrid grid(n);
  for (auto _ : state) benchmark::DoNotOptimize(epdiff_rhs(grid, st));
}
BENCHMARK(BM_EpdiffRhs)->Arg(64)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
