#include "app.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mpflow/epdiff1d.hpp"
#include "mpflow/errors.hpp"
#include "mpflow/io.hpp"
#include "mpflow/sde.hpp"
#include "svg.hpp"

namespace mpflow::cli {

namespace {

using json = nlohmann::json;

class Log {
 public:
  explicit Log(const RunOptions& o) : out_(o.quiet ? nullptr : (o.log ? o.log : &std::cerr)) {}
  template <class... A>
  void operator()(const A&... parts) const {
    if (!out_) return;
    ((*out_) << ... << parts) << '\n';
  }

 private:
  std::ostream* out_;
};

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_rows_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out << text;
}

void write_json(const std::filesystem::path& file, const json& j) { write_text(file, j.dump(1) + "\n"); }

void write_results_csv(const std::filesystem::path& file, const std::vector<PointResult>& results) {
  std::vector<Path> paths;
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].path.nodes() == 0) continue;
    paths.push_back(results[i].path);
    ids.push_back(static_cast<std::int64_t>(i));
  }
  if (paths.empty()) return;
  write_paths_csv(file, paths, ids);
}

json results_json(const Scenario& s, const std::vector<PointResult>& results,
                  const std::vector<Eigen::VectorXd>* targets) {
  json points = json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const PointResult& r = results[i];
    all_ok = all_ok && r.status == PointStatus::Ok;
    json p;
    p["index"] = i;
    p["x0"] = vec_json(s.landmarks[i]);
    if (targets) p["target"] = vec_json((*targets)[i]);
    p["status"] = to_string(r.status);
    p["message"] = r.message;
    p["v0"] = r.v0.size() ? vec_json(r.v0) : json(nullptr);
    if (targets) p["residual"] = r.residual;
    p["om_integral"] = r.path.nodes() ? json(r.om_value) : json(nullptr);
    p["iterations"] = r.iterations;
    points.push_back(p);
  }
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = s.name;
  j["horizon"] = s.horizon;
  j["steps"] = s.solver.steps;
  j["tolerance"] = s.solver.tolerance;
  j["all_converged"] = all_ok;
  j["landmarks"] = points;
  return j;
}

int status_exit_code(const std::vector<PointResult>& results) {
  int code = kExitOk;
  for (const auto& r : results) {
    if (r.status == PointStatus::EllipticityViolation) return kExitEllipticity;
    if (r.status != PointStatus::Ok) code = kExitNonConvergence;
  }
  return code;
}

void report_points(const Log& log, const char* what, const std::vector<PointResult>& results, bool shooting) {
  int ok = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].status == PointStatus::Ok) {
      ++ok;
      worst = std::max(worst, results[i].residual);
    } else {
      log("  ", what, " landmark ", i, ": ", to_string(results[i].status), " (", results[i].message, ")");
    }
  }
  if (shooting) {
    log(what, ": ", ok, "/", results.size(), " converged, max residual ", format_double(worst));
  } else {
    log(what, ": ", ok, "/", results.size(), " ok");
  }
}

MppFlowOptions flow_options(const Scenario& s, int threads) {
  MppFlowOptions o;
  o.threads = threads;
  o.tolerance = s.solver.tolerance;
  o.max_iter = s.solver.max_iter;
  o.integrate.blowup_radius = s.solver.blowup_radius;
  return o;
}

NoiseModel checked_noise(const Scenario& s) {
  try {
    return s.noise_model();
  } catch (const InvalidArgument& e) {
    throw ConfigError("noise", e.what());
  }
}

}  // namespace

Tasks scenario_tasks(const Scenario& s) {
  return Tasks{s.outputs.deterministic, s.outputs.mpp_forward, s.outputs.mpp_bvp,
               s.outputs.ensemble && s.ensemble.samples > 0, s.outputs.figure};
}

std::vector<Path> deterministic_flow(const Scenario& s) {
  const VectorFieldSpec& u = s.drift_field();
  const int N = s.solver.steps;
  const double h = s.horizon / N;
  std::vector<Path> out;
  for (const auto& x0 : s.landmarks) {
    Path p;
    p.times.resize(N + 1);
    p.points.resize(N + 1, s.dimension);
    p.velocities.resize(N + 1, s.dimension);
    Eigen::VectorXd x = x0;
    for (int k = 0; k <= N; ++k) {
      const double t = k * h;
      p.times[k] = t;
      p.points.row(k) = x.transpose();
      const Eigen::VectorXd k1 = eval_value(u, t, x);
      p.velocities.row(k) = k1.transpose();
      if (k == N) break;
      const Eigen::VectorXd k2 = eval_value(u, t + 0.5 * h, x + 0.5 * h * k1);
      const Eigen::VectorXd k3 = eval_value(u, t + 0.5 * h, x + 0.5 * h * k2);
      const Eigen::VectorXd k4 = eval_value(u, t + h, x + h * k3);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!x.allFinite() || x.norm() > s.solver.blowup_radius) throw BlowUp("deterministic flow left the domain", t + h);
    }
    p.times[N] = s.horizon;
    out.push_back(std::move(p));
  }
  return out;
}

RunReport execute(const Scenario& s, const Tasks& tasks, const RunOptions& options) {
  const Log log(options);
  const bool needs_noise = tasks.mpp_forward || tasks.mpp_bvp || tasks.ensemble;
  if (tasks.deterministic || needs_noise || tasks.figure) {
    s.require("drift", "run");
    s.require("landmarks", "run");
  }
  if (needs_noise) s.require("noise", "run");
  const int threads = options.threads.value_or(s.solver.threads);
  const std::uint64_t seed = options.seed.value_or(s.seed);
  const double T = s.horizon;
  const int N = s.solver.steps;

  RunReport rep;
  std::optional<NoiseModel> noise;
  if (needs_noise || !s.noise.empty()) noise = checked_noise(s);
  const bool need_det = tasks.deterministic || tasks.figure || (tasks.mpp_bvp && !s.bvp_targets);
  if (need_det) {
    rep.deterministic = deterministic_flow(s);
    log(s.name, ": deterministic flow for ", s.landmarks.size(), " landmarks");
  }
  if (tasks.mpp_forward) {
    rep.forward = mpp_flow(*noise, s.drift_field(), s.landmarks, std::nullopt, T, N, flow_options(s, threads));
    report_points(log, "forward", rep.forward, false);
  }
  std::vector<Eigen::VectorXd> targets;
  if (tasks.mpp_bvp) {
    if (s.bvp_targets) {
      targets = *s.bvp_targets;
    } else {
      for (const auto& p : rep.deterministic) targets.push_back(p.point(p.nodes() - 1));
    }
    rep.bvp = mpp_flow(*noise, s.drift_field(), s.landmarks, targets, T, N, flow_options(s, threads));
    report_points(log, "bvp", rep.bvp, true);
  }

  std::optional<EnsembleSummary> summary;
  std::optional<Ensemble> raw;
  if (tasks.ensemble) {
    if (s.ensemble.samples < 1) throw ConfigError("ensemble.samples", "must be positive");
    SdeConfig cfg{*noise, s.drift_field(), T, s.ensemble.steps, seed, s.ensemble.samples, threads};
    cfg.blowup_radius = s.solver.blowup_radius;
    try {
      summary = summarize_ensemble(cfg, s.landmarks);
      if (s.ensemble.raw > 0) {
        cfg.n_samples = std::min(s.ensemble.raw, s.ensemble.samples);
        raw = simulate_stratonovich(cfg, s.landmarks);
      }
      log("ensemble: ", s.ensemble.samples, " samples, seed ", seed);
    } catch (const BlowUp& e) {
      log("ensemble: ", e.what());
      rep.exit_code = kExitNonConvergence;
    }
  }

  std::filesystem::create_directories(options.out);
  auto emit = [&](const std::string& name) {
    rep.artifacts.push_back(name);
    return options.out / name;
  };
  if (tasks.deterministic) {
    std::vector<std::int64_t> ids(rep.deterministic.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
    write_paths_csv(emit("deterministic.csv"), rep.deterministic, ids);
  }
  if (tasks.mpp_forward) {
    write_results_csv(emit("mpp_forward.csv"), rep.forward);
    write_json(emit("forward_summary.json"), results_json(s, rep.forward, nullptr));
  }
  if (tasks.mpp_bvp) {
    write_results_csv(emit("mpp_bvp.csv"), rep.bvp);
    write_json(emit("bvp_summary.json"), results_json(s, rep.bvp, &targets));
  }
  if (summary) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["scenario"] = s.name;
    j["seed"] = seed;
    j["samples"] = summary->samples;
    j["steps"] = s.ensemble.steps;
    j["horizon"] = T;
    j["times"] = summary->times;
    json pts = json::array();
    for (std::size_t p = 0; p < s.landmarks.size(); ++p) {
      json e;
      e["index"] = p;
      e["x0"] = vec_json(s.landmarks[p]);
      e["mean"] = matrix_rows_json(summary->mean[p]);
      e["variance"] = matrix_rows_json(summary->variance[p]);
      pts.push_back(e);
    }
    j["landmarks"] = pts;
    write_json(emit("ensemble_summary.json"), j);
  }
  if (raw) {
    std::vector<Path> paths;
    std::vector<std::int64_t> ids;
    for (int smp = 0; smp < raw->samples; ++smp)
      for (int p = 0; p < raw->points; ++p) {
        paths.push_back(raw->path(smp, p));
        ids.push_back(static_cast<std::int64_t>(smp) * raw->points + p);
      }
    write_paths_csv(emit("ensemble.csv"), paths, ids);
  }
  if (tasks.figure) {
    FigureData fig;
    fig.title = s.name;
    fig.dimension = s.dimension;
    fig.deterministic = rep.deterministic;
    for (const auto& r : rep.forward) fig.forward.push_back(r.path);
    for (const auto& r : rep.bvp) fig.bvp.push_back(r.path);
    fig.centers = s.noise_centers;
    fig.drift = &s.drift_field();
    fig.bounds = s.plot_bounds;
    write_text(emit("figure.svg"), render_figure(fig));
  }

  for (const auto* results : {&rep.forward, &rep.bvp}) {
    const int code = status_exit_code(*results);
    if (code == kExitEllipticity || (code == kExitNonConvergence && rep.exit_code == kExitOk)) rep.exit_code = code;
  }
  return rep;
}

RunReport epdiff_drift(const Scenario& s, const RunOptions& options) {
  s.require("epdiff", "epdiff-drift");
  const Log log(options);
  const EpdiffSettings& e = *s.epdiff;
  RunReport rep;
  DriftSnapshots drift;
  try {
    const GridState initial = GridState::from_velocity(e.u0, e.alpha, e.sigmas);
    drift = e.sigmas.empty() ? epdiff_integrate(initial, s.horizon, e.steps, e.snapshot_every)
                             : optu_integrate(initial, s.horizon, e.steps, e.snapshot_every);
  } catch (const InvalidArgument& err) {
    throw ConfigError("epdiff", err.what());
  } catch (const BlowUp& err) {
    log("epdiff: ", err.what());
    rep.exit_code = kExitNonConvergence;
    return rep;
  }
  std::filesystem::create_directories(options.out);
  write_drift_json(options.out / e.output, drift);
  rep.artifacts.push_back(e.output);
  const double e0 = x_energy(GridState::from_velocity(drift.u_hat.front(), e.alpha));
  const double e1 = x_energy(GridState::from_velocity(drift.u_hat.back(), e.alpha));
  log("epdiff: ", drift.times.size(), " snapshots, X-energy ", format_double(e0), " -> ", format_double(e1));
  return rep;
}

RunReport plot(const Scenario& s, const RunOptions& options) {
  FigureData fig;
  fig.title = s.name;
  fig.dimension = s.dimension;
  fig.centers = s.noise_centers;
  if (s.drift) fig.drift = &*s.drift;
  fig.bounds = s.plot_bounds;
  auto load = [&](const char* name, std::vector<Path>& into) {
    const auto file = options.out / name;
    if (std::filesystem::exists(file)) into = read_paths_csv(file);
  };
  load("deterministic.csv", fig.deterministic);
  load("mpp_forward.csv", fig.forward);
  load("mpp_bvp.csv", fig.bvp);
  if (fig.deterministic.empty() && fig.forward.empty() && fig.bvp.empty())
    throw ConfigError("out", "no trajectory CSV files in " + options.out.string());
  RunReport rep;
  write_text(options.out / "figure.svg", render_figure(fig));
  rep.artifacts.push_back("figure.svg");
  return rep;
}

std::vector<double> om_eval(const Scenario& s, const std::filesystem::path& csv, Quadrature rule) {
  s.require("noise", "om-eval");
  s.require("drift", "om-eval");
  const NoiseModel noise = checked_noise(s);
  std::vector<double> out;
  for (const Path& p : read_paths_csv(csv)) {
    if (p.dimension() != s.dimension) throw InvalidArgument("om-eval: path dimension differs from the scenario");
    out.push_back(om_integral(noise, s.drift_field(), p, rule));
  }
  return out;
}

int main_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Most probable paths and flows of stochastic diffeomorphisms."};
  app.name("mpflow");
  app.require_subcommand(1);

  std::string config, out_dir = ".", path_csv, rule_name = "trapezoid";
  std::uint64_t seed = 0;
  int threads = 1;
  bool quiet = false;
  std::vector<std::pair<CLI::App*, std::pair<CLI::Option*, CLI::Option*>>> subs;
  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Scenario file")->required();
    sub->add_option("--out", out_dir, "Output directory");
    CLI::Option* so = sub->add_option("--seed", seed, "Random seed (overrides the scenario)");
    CLI::Option* to = sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", quiet, "Suppress progress output");
    subs.push_back({sub, {so, to}});
    return sub;
  };
  add("run", "Run every output the scenario requests");
  add("simulate", "Monte Carlo ensemble of the flow");
  add("mpp", "Forward most probable paths from every landmark");
  add("shoot", "Most probable paths between landmarks and their targets");
  CLI::App* om = add("om-eval", "Print the functional value of each path in a CSV file");
  om->add_option("--path", path_csv, "Path CSV")->required()->check(CLI::ExistingFile);
  om->add_option("--rule", rule_name, "Quadrature rule")->check(CLI::IsMember({"trapezoid", "midpoint"}));
  add("epdiff-drift", "Integrate EPDiff / OptU and write a drift file");
  add("plot", "Re-render figure.svg from the CSV files in --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* sub = nullptr;
  RunOptions options;
  options.out = out_dir;
  options.quiet = quiet;
  options.log = &err;
  for (auto& [s, opts] : subs) {
    if (!s->parsed()) continue;
    sub = s;
    if (*opts.first) options.seed = seed;
    if (*opts.second) options.threads = threads;
  }
  const std::string cmd = sub->get_name();

  try {
    const Scenario scenario = load_scenario(config);
    RunReport rep;
    if (cmd == "run") {
      rep = execute(scenario, scenario_tasks(scenario), options);
    } else if (cmd == "simulate") {
      if (scenario.ensemble.samples < 1) throw ConfigError("ensemble.samples", "must be positive for 'simulate'");
      rep = execute(scenario, Tasks{false, false, false, true, false}, options);
    } else if (cmd == "mpp") {
      rep = execute(scenario, Tasks{true, true, false, false, false}, options);
    } else if (cmd == "shoot") {
      rep = execute(scenario, Tasks{false, false, true, false, false}, options);
    } else if (cmd == "om-eval") {
      const Quadrature rule = rule_name == "midpoint" ? Quadrature::Midpoint : Quadrature::Trapezoid;
      for (double v : om_eval(scenario, path_csv, rule)) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out << buf << '\n';
      }
      return kExitOk;
    } else if (cmd == "epdiff-drift") {
      rep = epdiff_drift(scenario, options);
    } else {
      rep = plot(scenario, options);
    }
    if (!quiet)
      for (const auto& a : rep.artifacts) err << "wrote " << (options.out / a).string() << '\n';
    return rep.exit_code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const EllipticityViolation& e) {
    err << "ellipticity violation: " << e.what() << '\n';
    return kExitEllipticity;
  } catch (const NonConvergence& e) {
    err << "solver did not converge: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const BlowUp& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const InvalidArgument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace mpflow::cli
