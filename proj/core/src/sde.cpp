#include "mpflow/sde.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mpflow/detail/field_eval.hpp"
#include "mpflow/detail/parallel.hpp"
#include "mpflow/errors.hpp"

namespace mpflow {

void SdeConfig::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("sde: T must be positive");
  if (steps < 1) throw InvalidArgument("sde: steps must be at least 1");
  if (n_samples < 1) throw InvalidArgument("sde: n_samples must be at least 1");
  if (drift.dimension() != noise.dimension()) throw InvalidArgument("sde: drift and noise dimensions differ");
  if (!(blowup_radius > 0.0)) throw InvalidArgument("sde: blowup_radius must be positive");
}

Path Ensemble::path(int s, int p) const {
  Path out;
  out.times = times;
  const int K = static_cast<int>(times.size());
  out.points.resize(K, dim);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < dim; ++i) out.points(k, i) = at(s, p, k, i);
  return out;
}

namespace {

using detail::Vec;

constexpr int kBlock = 2048;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <int D>
Vec<double, D> ito_drift(const NoiseModel& noise, const VectorFieldSpec& drift, double t, const Vec<double, D>& x) {
  Vec<double, D> out = detail::eval_jet0<double, D>(drift, t, x).value;
  for (const auto& s : noise.sigmas) {
    const auto j = detail::eval_jet1<double, D>(s, t, x);
    // (D sigma) sigma: component k is sum_i sigma^i d_i sigma^k.
    for (int k = 0; k < D; ++k) {
      double acc = 0.0;
      for (int i = 0; i < D; ++i) acc += j.jac[i][k] * j.value[i];
      out[k] += 0.5 * acc;
    }
  }
  return out;
}

template <int D>
class Engine {
 public:
  Engine(const SdeConfig& cfg, const std::vector<Eigen::VectorXd>& x0, Scheme scheme)
      : cfg_(cfg), scheme_(scheme), h_(cfg.T / cfg.steps), m_(static_cast<int>(cfg.noise.sigmas.size())) {
    for (const auto& p : x0) {
      if (p.size() != D || !p.allFinite()) throw InvalidArgument("sde: bad initial point");
      x0_.push_back(detail::to_array<D>(p));
    }
    if (x0_.empty()) throw InvalidArgument("sde: no initial points");
  }

  int points() const { return static_cast<int>(x0_.size()); }
  int nodes() const { return cfg_.steps + 1; }
  std::size_t buffer_size() const { return static_cast<std::size_t>(points()) * nodes() * D; }
  std::vector<double> times() const {
    std::vector<double> t(nodes());
    for (int k = 0; k < nodes(); ++k) t[k] = k * h_;
    return t;
  }

  /// Fills traj[(p * nodes + k) * D + i] for sample s.
  void run(std::int64_t s, std::vector<double>& traj) const {
    std::mt19937_64 gen(splitmix64(cfg_.seed ^ splitmix64(static_cast<std::uint64_t>(s))));
    std::normal_distribution<double> normal;
    const double sqrt_h = std::sqrt(h_);
    const int P = points();
    const int streams = cfg_.independent_point_noise ? P : 1;
    std::vector<double> dW(static_cast<std::size_t>(streams) * m_);
    traj.resize(buffer_size());

    std::vector<Vec<double, D>> x(x0_);
    for (int p = 0; p < P; ++p) store(traj, p, 0, x[p]);
    for (int k = 0; k < cfg_.steps; ++k) {
      for (auto& w : dW) w = sqrt_h * normal(gen);
      const double t = k * h_;
      for (int p = 0; p < P; ++p) {
        const double* w = dW.data() + (cfg_.independent_point_noise ? p * m_ : 0);
        x[p] = step(t, x[p], w);
        check(x[p], t + h_);
        store(traj, p, k + 1, x[p]);
      }
    }
  }

 private:
  void store(std::vector<double>& traj, int p, int k, const Vec<double, D>& x) const {
    double* dst = traj.data() + (static_cast<std::size_t>(p) * nodes() + k) * D;
    for (int i = 0; i < D; ++i) dst[i] = x[i];
  }

  void check(const Vec<double, D>& x, double t) const {
    double r2 = 0.0;
    bool finite = true;
    for (int i = 0; i < D; ++i) {
      r2 += x[i] * x[i];
      finite = finite && std::isfinite(x[i]);
    }
    if (!finite || std::sqrt(r2) > cfg_.blowup_radius) {
      std::ostringstream msg;
      msg << "sde: sample left radius " << cfg_.blowup_radius << " at t=" << t;
      throw BlowUp(msg.str(), t);
    }
  }

  Vec<double, D> drift_at(double t, const Vec<double, D>& x) const {
    if (scheme_ == Scheme::StratonovichHeun) return detail::eval_jet0<double, D>(cfg_.drift, t, x).value;
    return ito_drift<D>(cfg_.noise, cfg_.drift, t, x);
  }

  // sum_j sigma_j(t, x) dW_j
  Vec<double, D> noise_at(double t, const Vec<double, D>& x, const double* dW) const {
    Vec<double, D> out = detail::zero_vec<double, D>();
    for (int j = 0; j < m_; ++j) {
      const auto v = detail::eval_jet0<double, D>(cfg_.noise.sigmas[j], t, x).value;
      for (int i = 0; i < D; ++i) out[i] += v[i] * dW[j];
    }
    return out;
  }

  Vec<double, D> step(double t, const Vec<double, D>& x, const double* dW) const {
    const Vec<double, D> a0 = drift_at(t, x);
    const Vec<double, D> n0 = noise_at(t, x, dW);
    Vec<double, D> pred;
    for (int i = 0; i < D; ++i) pred[i] = x[i] + a0[i] * h_ + n0[i];
    if (scheme_ == Scheme::ItoEuler) return pred;

    const Vec<double, D> a1 = drift_at(t + h_, pred);
    Vec<double, D> out;
    if (scheme_ == Scheme::StratonovichHeun) {
      const Vec<double, D> n1 = noise_at(t + h_, pred, dW);
      for (int i = 0; i < D; ++i) out[i] = x[i] + 0.5 * (a0[i] + a1[i]) * h_ + 0.5 * (n0[i] + n1[i]);
    } else {
      for (int i = 0; i < D; ++i) out[i] = x[i] + 0.5 * (a0[i] + a1[i]) * h_ + 0.5 * (n0[i] + n0[i]);
    }
    return out;
  }

  const SdeConfig& cfg_;
  Scheme scheme_;
  double h_;
  int m_;
  std::vector<Vec<double, D>> x0_;
};

// Runs samples in fixed blocks; block_body(block_index, first, last, engine)
// must only write state owned by its block.
template <int D, class BlockBody>
void for_blocks(const SdeConfig& cfg, const Engine<D>& engine, BlockBody&& block_body) {
  const int blocks = (cfg.n_samples + kBlock - 1) / kBlock;
  detail::parallel_for(blocks, cfg.threads, [&](int b) {
    const std::int64_t first = static_cast<std::int64_t>(b) * kBlock;
    const std::int64_t last = std::min<std::int64_t>(first + kBlock, cfg.n_samples);
    block_body(b, first, last, engine);
  });
}

struct Moments {
  double n = 0.0;
  std::vector<double> mean;
  std::vector<double> m2;

  void add(const std::vector<double>& x) {
    if (mean.empty()) {
      mean.assign(x.size(), 0.0);
      m2.assign(x.size(), 0.0);
    }
    n += 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean[i];
      mean[i] += delta / n;
      m2[i] += delta * (x[i] - mean[i]);
    }
  }

  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    if (n == 0.0) {
      *this = o;
      return;
    }
    const double total = n + o.n;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double delta = o.mean[i] - mean[i];
      mean[i] += delta * o.n / total;
      m2[i] += o.m2[i] + delta * delta * n * o.n / total;
    }
    n = total;
  }
};

Eigen::MatrixXd interpolate(const Path& center, const std::vector<double>& times) {
  Eigen::MatrixXd out(times.size(), center.dimension());
  std::size_t seg = 0;
  const int last = center.nodes() - 1;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    while (static_cast<int>(seg) + 1 < last && center.times[seg + 1] < t) ++seg;
    const double t0 = center.times[seg], t1 = center.times[seg + 1];
    const double s = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    out.row(k) = (1.0 - s) * center.points.row(seg) + s * center.points.row(seg + 1);
  }
  return out;
}

}  // namespace

Eigen::VectorXd ito_drift_conversion(const NoiseModel& noise, const VectorFieldSpec& drift, double t,
                                     const Eigen::VectorXd& x) {
  const int d = noise.dimension();
  if (x.size() != d || drift.dimension() != d) throw InvalidArgument("ito_drift_conversion: dimension mismatch");
  if (!x.allFinite()) throw InvalidArgument("ito_drift_conversion: non-finite point");
  return detail::with_dimension(d, [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto v = ito_drift<D>(noise, drift, t, detail::to_array<D>(x));
    Eigen::VectorXd out(D);
    for (int i = 0; i < D; ++i) out[i] = v[i];
    return out;
  });
}

Ensemble simulate(const SdeConfig& cfg, const std::vector<Eigen::VectorXd>& x0, Scheme scheme) {
  cfg.validate();
  return detail::with_dimension(cfg.noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const Engine<D> engine(cfg, x0, scheme);
    Ensemble ens;
    ens.times = engine.times();
    ens.samples = cfg.n_samples;
    ens.points = engine.points();
    ens.dim = D;
    const std::size_t per = engine.buffer_size();
    ens.data.resize(per * cfg.n_samples);
    for_blocks<D>(cfg, engine, [&](int, std::int64_t first, std::int64_t last, const Engine<D>& e) {
      std::vector<double> traj;
      for (std::int64_t s = first; s < last; ++s) {
        e.run(s, traj);
        std::copy(traj.begin(), traj.end(), ens.data.begin() + static_cast<std::ptrdiff_t>(s * per));
      }
    });
    return ens;
  });
}

Ensemble simulate_stratonovich(const SdeConfig& cfg, const std::vector<Eigen::VectorXd>& x0) {
  return simulate(cfg, x0, Scheme::StratonovichHeun);
}

Ensemble simulate_ito(const SdeConfig& cfg, const std::vector<Eigen::VectorXd>& x0, Scheme scheme) {
  if (scheme == Scheme::StratonovichHeun) throw InvalidArgument("simulate_ito: choose an Ito scheme");
  return simulate(cfg, x0, scheme);
}

EnsembleSummary summarize_ensemble(const SdeConfig& cfg, const std::vector<Eigen::VectorXd>& x0, Scheme scheme) {
  cfg.validate();
  return detail::with_dimension(cfg.noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const Engine<D> engine(cfg, x0, scheme);
    const int blocks = (cfg.n_samples + kBlock - 1) / kBlock;
    std::vector<Moments> partial(blocks);
    for_blocks<D>(cfg, engine, [&](int b, std::int64_t first, std::int64_t last, const Engine<D>& e) {
      std::vector<double> traj;
      for (std::int64_t s = first; s < last; ++s) {
        e.run(s, traj);
        partial[b].add(traj);
      }
    });
    Moments total;
    for (const auto& m : partial) total.merge(m);

    EnsembleSummary out;
    out.times = engine.times();
    out.samples = cfg.n_samples;
    const int K = engine.nodes();
    const double denom = cfg.n_samples > 1 ? cfg.n_samples - 1.0 : 1.0;
    for (int p = 0; p < engine.points(); ++p) {
      Eigen::MatrixXd mean(K, D), var(K, D);
      for (int k = 0; k < K; ++k)
        for (int i = 0; i < D; ++i) {
          const std::size_t idx = (static_cast<std::size_t>(p) * K + k) * D + i;
          mean(k, i) = total.mean[idx];
          var(k, i) = total.m2[idx] / denom;
        }
      out.mean.push_back(std::move(mean));
      out.variance.push_back(std::move(var));
    }
    return out;
  });
}

std::vector<TubeEstimate> tube_probabilities(const SdeConfig& cfg, const Eigen::VectorXd& x0,
                                             const std::vector<TubeQuery>& queries, Scheme scheme) {
  cfg.validate();
  for (const auto& q : queries) {
    if (!(q.epsilon > 0.0)) throw InvalidArgument("tube: epsilon must be positive");
    q.center.validate();
    if (q.center.dimension() != x0.size()) throw InvalidArgument("tube: center dimension mismatch");
    if ((q.center.point(0) - x0).norm() > 1e-12) throw InvalidArgument("tube: center must start at x0");
  }
  return detail::with_dimension(cfg.noise.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const Engine<D> engine(cfg, {x0}, scheme);
    const auto times = engine.times();
    const int K = engine.nodes();
    std::vector<Eigen::MatrixXd> centers;
    for (const auto& q : queries) centers.push_back(interpolate(q.center, times));

    const int Q = static_cast<int>(queries.size());
    const int blocks = (cfg.n_samples + kBlock - 1) / kBlock;
    std::vector<std::vector<std::int64_t>> hits(blocks, std::vector<std::int64_t>(Q, 0));
    for_blocks<D>(cfg, engine, [&](int b, std::int64_t first, std::int64_t last, const Engine<D>& e) {
      std::vector<double> traj;
      for (std::int64_t s = first; s < last; ++s) {
        e.run(s, traj);
        for (int q = 0; q < Q; ++q) {
          const double eps2 = queries[q].epsilon * queries[q].epsilon;
          bool inside = true;
          for (int k = 0; k < K && inside; ++k) {
            double r2 = 0.0;
            for (int i = 0; i < D; ++i) {
              const double diff = traj[k * D + i] - centers[q](k, i);
              r2 += diff * diff;
            }
            inside = r2 < eps2;
          }
          if (inside) ++hits[b][q];
        }
      }
    });

    std::vector<TubeEstimate> out(Q);
    for (int q = 0; q < Q; ++q) {
      for (const auto& h : hits) out[q].hits += h[q];
      out[q].samples = cfg.n_samples;
      const double p = static_cast<double>(out[q].hits) / cfg.n_samples;
      out[q].estimate = p;
      out[q].std_error = std::sqrt(p * (1.0 - p) / cfg.n_samples);
    }
    return out;
  });
}

TubeEstimate tube_probability(const SdeConfig& cfg, const Eigen::VectorXd& x0, const TubeQuery& query,
                              Scheme scheme) {
  return tube_probabilities(cfg, x0, {query}, scheme).front();
}

}  // namespace mpflow
