#pragma once

// Monte Carlo simulation of the flow SDE
//
//   Stratonovich:  dx = u dt + sum_j sigma_j(x) o dW^j
//   Ito:           dx = u^ dt + sum_j sigma_j(x) dW^j,  u^ = u + 1/2 sum_j (D sigma_j) sigma_j
//
// Every sample is one realization of the flow: the same Brownian increments
// move all tracked points.  Sample s draws from its own generator seeded from
// (seed, s), so results do not depend on the thread count.

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mpflow/fields.hpp"
#include "mpflow/om.hpp"

namespace mpflow {

struct SdeConfig {
  NoiseModel noise;
  VectorFieldSpec drift;
  double T = 1.0;
  int steps = 100;
  std::uint64_t seed = 0;
  int n_samples = 1;
  int threads = 1;
  bool independent_point_noise = false;  // separate Brownian motion per tracked point
  double blowup_radius = 1e6;

  void validate() const;
};

enum class Scheme {
  StratonovichHeun,  // predictor-corrector on drift and noise
  ItoEuler,          // Euler-Maruyama with the converted drift
  ItoHeun,           // trapezoidal converted drift, noise frozen at the step start
};

Eigen::VectorXd ito_drift_conversion(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                                     const Eigen::VectorXd& x);

/// Stored trajectories, indexed (sample, point, step, component).
struct Ensemble {
  std::vector<double> times;
  int samples = 0;
  int points = 0;
  int dim = 0;
  std::vector<double> data;

  double at(int s, int p, int k, int i) const {
    return data[((static_cast<std::size_t>(s) * points + p) * times.size() + k) * dim + i];
  }
  Path path(int s, int p) const;
};

Ensemble simulate(const SdeConfig& cfg, const std::vector<Eigen::VectorXd>& x0, Scheme scheme);
Ensemble simulate_stratonovich(const SdeConfig& cfg, const std::vector<Eigen::VectorXd>& x0);
Ensemble simulate_ito(const SdeConfig& cfg, const std::vector<Eigen::VectorXd>& x0,
                      Scheme scheme = Scheme::ItoEuler);

/// Mean and componentwise variance per point and time, accumulated without
/// storing trajectories.  mean[p] and variance[p] are (steps+1) x d.
struct EnsembleSummary {
  std::vector<double> times;
  int samples = 0;
  std::vector<Eigen::MatrixXd> mean;
  std::vector<Eigen::MatrixXd> variance;
};

EnsembleSummary summarize_ensemble(const SdeConfig& cfg, const std::vector<Eigen::VectorXd>& x0,
                                   Scheme scheme = Scheme::StratonovichHeun);

/// Sup over the simulation times of |X_t - center(t)| < epsilon.  The center
/// is linearly interpolated onto the simulation grid.
struct TubeQuery {
  Path center;
  double epsilon = 0.1;
};

struct TubeEstimate {
  double estimate = 0.0;
  double std_error = 0.0;  // binomial
  std::int64_t hits = 0;
  std::int64_t samples = 0;
};

TubeEstimate tube_probability(const SdeConfig& cfg, const Eigen::VectorXd& x0, const TubeQuery& query,
                              Scheme scheme = Scheme::StratonovichHeun);

/// All queries against one shared ensemble (common random numbers).
std::vector<TubeEstimate> tube_probabilities(const SdeConfig& cfg, const Eigen::VectorXd& x0,
                                             const std::vector<TubeQuery>& queries,
                                             Scheme scheme = Scheme::StratonovichHeun);

}  // namespace mpflow
