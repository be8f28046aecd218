#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "app.hpp"
#include "mpflow/epdiff1d.hpp"
#include "mpflow/io.hpp"
#include "scenario.hpp"
#include "toml.hpp"

using namespace mpflow;
using namespace mpflow::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = MPFLOW_SCENARIO_DIR;

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mpflow_cli_" + name);
  fs::remove_all(d);
  return d;
}

fs::path write_file(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  std::ofstream(file) << text;
  return file;
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mpflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = main_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config_error_key(const std::string& text) {
  try {
    parse_scenario(parse_toml(text), fs::temp_directory_path());
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

int count(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

const char* kMinimal = R"(
dimension = 2
horizon = 1.0
[[noise]]
kind = "constant"
value = [1.0, 0.0]
[[noise]]
kind = "constant"
value = [0.0, 1.0]
[drift]
kind = "zero"
[landmarks]
kind = "list"
points = [[0.0, 0.0]]
)";

}  // namespace

TEST(Toml, ParsesTheSupportedSubset) {
  const auto j = parse_toml(R"(# comment
name = "a \"quoted\" name"  # trailing comment
n = 1_000
x = -2.5e-3
flag = true
list = [1, 2,
        3,]   # multi-line with trailing comma
nested = [[1.0, 2.0], [3.0, 4.0]]
inline = { kind = "sine", amplitude = 0.5 }

[table]
key = "v"

[[items]]
a = 1
[[items]]
a = 2
[items.sub]
b = false
)");
  EXPECT_EQ(j["name"], "a \"quoted\" name");
  EXPECT_EQ(j["n"], 1000);
  EXPECT_DOUBLE_EQ(j["x"].get<double>(), -2.5e-3);
  EXPECT_EQ(j["flag"], true);
  EXPECT_EQ(j["list"].size(), 3u);
  EXPECT_DOUBLE_EQ(j["nested"][1][0].get<double>(), 3.0);
  EXPECT_EQ(j["inline"]["kind"], "sine");
  EXPECT_EQ(j["table"]["key"], "v");
  ASSERT_EQ(j["items"].size(), 2u);
  EXPECT_EQ(j["items"][1]["a"], 2);
  EXPECT_EQ(j["items"][1]["sub"]["b"], false);
  EXPECT_TRUE(j["n"].is_number_integer());
  EXPECT_TRUE(j["x"].is_number_float());
}

TEST(Toml, ReportsSyntaxErrorsWithLine) {
  const std::vector<std::pair<std::string, std::string>> bad{
      {"a = 1\nb = \n", "line 2"},
      {"a = 1\na = 2\n", "duplicate"},
      {"a = [1, 2\n", "line"},
      {"s = \"open\n", "unterminated"},
      {"[t]\n[t]\n", "twice"},
      {"a = 1 b\n", "trailing"},
      {"a = 1.2.3\n", "invalid value"},
  };
  for (const auto& [text, fragment] : bad) {
    try {
      parse_toml(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  }
}

TEST(Scenario, BundledFigureScenariosLoad) {
  const Scenario single = load_scenario(kScenarios / "fig1_single.toml");
  EXPECT_EQ(single.dimension, 2);
  EXPECT_EQ(single.noise.size(), 3u);
  ASSERT_EQ(single.noise_centers.size(), 1u);
  EXPECT_EQ(single.noise_centers[0], Eigen::Vector2d(0.0, 0.0));
  ASSERT_EQ(single.landmarks.size(), 40u);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_DOUBLE_EQ(single.landmarks[i][1], -0.5);
    EXPECT_NEAR(single.landmarks[i][0], -1.0 + 2.0 * i / 39.0, 1e-15);
  }

  const Scenario two = load_scenario(kScenarios / "fig1_two.toml");
  ASSERT_EQ(two.noise_centers.size(), 2u);
  EXPECT_EQ(two.noise_centers[0], Eigen::Vector2d(-0.5, 0.0));
  EXPECT_EQ(two.noise_centers[1], Eigen::Vector2d(0.5, 0.0));

  const Scenario grid = load_scenario(kScenarios / "fig1_grid.toml");
  EXPECT_EQ(grid.noise.size(), 51u);
  ASSERT_EQ(grid.noise_centers.size(), 49u);
  EXPECT_EQ(grid.noise_centers.front(), Eigen::Vector2d(-1.5, -1.5));
  EXPECT_EQ(grid.noise_centers.back(), Eigen::Vector2d(1.5, 1.5));

  for (const char* f : {"flat.toml", "epdiff_drift.toml", "epdiff_flow.toml"})
    EXPECT_NO_THROW(load_scenario(kScenarios / f)) << f;
}

TEST(Scenario, ErrorsNameTheOffendingKey) {
  const std::string base = kMinimal;
  auto without = [&](const std::string& line) {
    std::string s = base;
    s.erase(s.find(line), line.size());
    return s;
  };
  EXPECT_EQ(config_error_key(base), "<none>");
  EXPECT_EQ(config_error_key(without("horizon = 1.0\n")), "horizon");
  EXPECT_EQ(config_error_key(without("dimension = 2\n")), "dimension");
  EXPECT_EQ(config_error_key("horizn = 2\n" + base), "horizn");
  EXPECT_EQ(config_error_key("dimension = 4\nhorizon = 1.0\n"), "dimension");
  EXPECT_EQ(config_error_key("dimension = 2\nhorizon = -1.0\n"), "horizon");
  EXPECT_EQ(config_error_key("dimension = 2\nhorizon = 1.0\n[[noise]]\nkind = \"gaussian\"\ncenter = [0.0]\n"
                             "amplitude = [0.0, 0.1]\nwidth = 0.5\n"),
            "noise[0].center");
  EXPECT_EQ(config_error_key("dimension = 2\nhorizon = 1.0\n[[noise]]\nkind = \"gaussian\"\ncenter = [0.0, 0.0]\n"
                             "amplitude = [0.0, 0.1]\nwidth = 0.0\n"),
            "noise[0].width");
  EXPECT_EQ(config_error_key("dimension = 2\nhorizon = 1.0\n[[noise]]\nkind = \"spiral\"\n"), "noise[0].kind");
  EXPECT_EQ(config_error_key("dimension = 1\nhorizon = 1.0\n[drift]\nkind = \"epdiff1d\"\nfile = \"missing.json\"\n"),
            "drift.file");
  EXPECT_EQ(config_error_key("dimension = 2\nhorizon = 1.0\n[landmarks]\nkind = \"list\"\npoints = []\n"),
            "landmarks.points");
  EXPECT_EQ(config_error_key("dimension = 2\nhorizon = 1.0\n[solver]\nsteps = 1.5\n"), "solver.steps");
}

TEST(Scenario, ScheduleWrapsFields) {
  const Scenario s = parse_scenario(parse_toml(R"(
dimension = 1
horizon = 1.0
[[noise]]
kind = "constant"
value = [2.0]
schedule = { kind = "polynomial", coefficients = [1.0, 1.0] }
)"),
                                    ".");
  ASSERT_EQ(s.noise.size(), 1u);
  EXPECT_DOUBLE_EQ(eval_value(s.noise[0], 0.5, Eigen::VectorXd::Zero(1))[0], 3.0);
}

TEST(Cli, OmEvalOfStraightLineIsHalf) {
  const auto r = run_cli({"om-eval", "--config", (kScenarios / "flat.toml").string(), "--path",
                      (kScenarios / "data" / "straight_line.csv").string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "0.5\n");
}

TEST(Cli, MissingHorizonExitsWithConfigErrorAndNoArtifacts) {
  const fs::path dir = fresh_dir("nohorizon");
  std::string text = read_file(kScenarios / "fig1_single.toml");
  text.erase(text.find("horizon = 1.0\n"), 14);
  const fs::path cfg = write_file(dir / "cfg" / "s.toml", text);
  const auto r = run_cli({"run", "--config", cfg.string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("horizon"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, UsageErrorsAreConfigErrors) {
  EXPECT_EQ(run_cli({}).code, kExitConfig);
  EXPECT_EQ(run_cli({"run"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"run", "--config", "/nonexistent.toml"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
}

TEST(Cli, RunIsDeterministicUnderFixedSeed) {
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b"), c = fresh_dir("det_c");
  const std::string cfg = (kScenarios / "flat.toml").string();
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", a.string(), "--seed", "5", "--quiet"}).code, kExitOk);
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", b.string(), "--seed", "5", "--threads", "3", "--quiet"}).code,
            kExitOk);
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", c.string(), "--seed", "6", "--quiet"}).code, kExitOk);
  for (const char* f : {"deterministic.csv", "mpp_forward.csv", "mpp_bvp.csv", "bvp_summary.json",
                        "forward_summary.json", "ensemble_summary.json", "figure.svg"})
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  EXPECT_NE(read_file(a / "ensemble_summary.json"), read_file(c / "ensemble_summary.json"));
  EXPECT_EQ(read_file(a / "bvp_summary.json"), read_file(c / "bvp_summary.json"));
}

TEST(Cli, JsonArtifactsCarrySchemaVersion) {
  const fs::path dir = fresh_dir("schema");
  ASSERT_EQ(run_cli({"run", "--config", (kScenarios / "flat.toml").string(), "--out", dir.string(), "--quiet"}).code,
            kExitOk);
  for (const char* f : {"bvp_summary.json", "forward_summary.json", "ensemble_summary.json"}) {
    const auto j = nlohmann::json::parse(read_file(dir / f));
    EXPECT_EQ(j.at("schema_version"), kSchemaVersion) << f;
  }
  const auto bvp = nlohmann::json::parse(read_file(dir / "bvp_summary.json"));
  EXPECT_TRUE(bvp["all_converged"].get<bool>());
  const auto& p = bvp["landmarks"][0];
  EXPECT_EQ(p["status"], "ok");
  EXPECT_NEAR(p["v0"][0].get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(p["om_integral"].get<double>(), 0.5, 1e-9);
  EXPECT_LT(p["residual"].get<double>(), 1e-9);
}

TEST(Cli, SvgHasOnePolylinePerTrajectoryAndOneMarkerPerCenter) {
  const fs::path dir = fresh_dir("svg");
  std::string text = read_file(kScenarios / "fig1_two.toml");
  text.replace(text.find("count = 40"), 10, "count = 5");
  text.replace(text.find("samples = 200"), 13, "samples = 0");
  const fs::path cfg = write_file(dir / "s.toml", text);
  ASSERT_EQ(run_cli({"run", "--config", cfg.string(), "--out", (dir / "out").string(), "--quiet"}).code, kExitOk);
  const std::string svg = read_file(dir / "out" / "figure.svg");
  EXPECT_EQ(count(svg, "<polyline class=\"deterministic\""), 5);
  EXPECT_EQ(count(svg, "<polyline class=\"mpp-forward\""), 5);
  EXPECT_EQ(count(svg, "<polyline class=\"mpp-bvp\""), 5);
  EXPECT_EQ(count(svg, "<polyline"), 15);
  EXPECT_EQ(count(svg, "<circle class=\"noise-center\""), 2);
  EXPECT_EQ(count(svg, "<use href=\"#deterministic\"/>"), 2);
  EXPECT_EQ(count(svg, "<g"), count(svg, "</g>"));
  EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);
  EXPECT_NE(svg.find("stroke=\"#d62728\""), std::string::npos);
  EXPECT_NE(svg.find("fill=\"#2ca02c\""), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out" / "ensemble_summary.json"));

  // plot re-renders the same figure from the CSV files
  const std::string before = svg;
  fs::remove(dir / "out" / "figure.svg");
  ASSERT_EQ(run_cli({"plot", "--config", cfg.string(), "--out", (dir / "out").string(), "--quiet"}).code, kExitOk);
  const std::string after = read_file(dir / "out" / "figure.svg");
  EXPECT_EQ(count(after, "<polyline"), 15);
  EXPECT_EQ(count(after, "<circle class=\"noise-center\""), 2);
}

TEST(Cli, SubcommandsWriteOnlyTheirArtifacts) {
  const fs::path dir = fresh_dir("subs");
  const std::string cfg = (kScenarios / "flat.toml").string();
  ASSERT_EQ(run_cli({"mpp", "--config", cfg, "--out", (dir / "mpp").string(), "--quiet"}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir / "mpp" / "mpp_forward.csv"));
  EXPECT_TRUE(fs::exists(dir / "mpp" / "deterministic.csv"));
  EXPECT_FALSE(fs::exists(dir / "mpp" / "mpp_bvp.csv"));
  ASSERT_EQ(run_cli({"shoot", "--config", cfg, "--out", (dir / "shoot").string(), "--quiet"}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir / "shoot" / "bvp_summary.json"));
  EXPECT_FALSE(fs::exists(dir / "shoot" / "mpp_forward.csv"));
  ASSERT_EQ(run_cli({"simulate", "--config", cfg, "--out", (dir / "sim").string(), "--quiet"}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir / "sim" / "ensemble_summary.json"));
  EXPECT_FALSE(fs::exists(dir / "sim" / "bvp_summary.json"));
  const auto paths = read_paths_csv(dir / "shoot" / "mpp_bvp.csv");
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_NEAR(paths[0].points(paths[0].nodes() - 1, 0), 1.0, 1e-9);
}

TEST(Cli, EnsembleMomentsOfBrownianScenario) {
  const fs::path dir = fresh_dir("bm");
  ASSERT_EQ(run_cli({"simulate", "--config", (kScenarios / "flat.toml").string(), "--out", dir.string(), "--quiet"}).code,
            kExitOk);
  const auto j = nlohmann::json::parse(read_file(dir / "ensemble_summary.json"));
  EXPECT_EQ(j["samples"], 1000);
  const auto& last_var = j["landmarks"][0]["variance"].back();
  // Var W_1 = 1; the sample variance of 1000 draws has relative sd about 0.045
  EXPECT_NEAR(last_var[0].get<double>(), 1.0, 0.2);
  EXPECT_NEAR(last_var[1].get<double>(), 1.0, 0.2);
}

TEST(Cli, EpdiffDriftConservesEnergyWithoutNoise) {
  const fs::path dir = fresh_dir("epdiff");
  const fs::path cfg = write_file(dir / "e.toml", R"(
dimension = 1
horizon = 1.0
[epdiff]
n = 256
alpha = 1.0
steps = 200
snapshot_every = 20
output = "drift.json"
initial = { offset = 0.2, cosine = [1.0], sine = [0.0, 0.3] }
)");
  const auto r = run_cli({"epdiff-drift", "--config", cfg.string(), "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const DriftSnapshots d = read_drift_json(dir / "out" / "drift.json");
  ASSERT_EQ(d.times.size(), 11u);
  const double e0 = x_energy(GridState::from_velocity(d.u_hat.front(), d.alpha));
  for (const auto& u : d.u_hat) EXPECT_LT(std::abs(x_energy(GridState::from_velocity(u, d.alpha)) - e0), 1e-4);

  // the drift file feeds a 1D scenario
  const fs::path flow = write_file(dir / "out" / "flow.toml", R"(
dimension = 1
horizon = 1.0
[[noise]]
kind = "constant"
value = [0.1]
[drift]
kind = "epdiff1d"
file = "drift.json"
[landmarks]
kind = "line"
from = [1.0]
to = [2.0]
count = 3
)");
  const auto r2 = run_cli({"run", "--config", flow.string(), "--out", (dir / "flow").string(), "--quiet"});
  EXPECT_EQ(r2.code, kExitOk) << r2.err;
  const auto bvp = nlohmann::json::parse(read_file(dir / "flow" / "bvp_summary.json"));
  EXPECT_TRUE(bvp["all_converged"].get<bool>());
  EXPECT_EQ(read_paths_csv(dir / "flow" / "mpp_forward.csv").size(), 3u);
}

TEST(Cli, EllipticityViolationExitsWithFour) {
  const fs::path dir = fresh_dir("ellip");
  const fs::path cfg = write_file(dir / "c.toml", R"(
dimension = 2
horizon = 1.0
[[noise]]
kind = "conformal"
beta = 1.0
[drift]
kind = "zero"
[landmarks]
kind = "list"
points = [[0.0, 0.0], [3.0, 0.0]]
)");
  const auto r = run_cli({"run", "--config", cfg.string(), "--out", (dir / "out").string(), "--quiet"});
  EXPECT_EQ(r.code, kExitEllipticity);
  const auto j = nlohmann::json::parse(read_file(dir / "out" / "bvp_summary.json"));
  EXPECT_FALSE(j["all_converged"].get<bool>());
  EXPECT_EQ(j["landmarks"][0]["status"], "ok");
  EXPECT_EQ(j["landmarks"][1]["status"], "ellipticity_violation");
}

TEST(Cli, NonConvergenceExitsWithThreeAndPartialArtifacts) {
  const fs::path dir = fresh_dir("nonconv");
  const fs::path cfg = write_file(dir / "c.toml", R"(
dimension = 2
horizon = 1.0
[solver]
tolerance = 1e-15
max_iter = 1
[[noise]]
kind = "conformal"
beta = 0.3
[drift]
kind = "zero"
[landmarks]
kind = "list"
points = [[0.0, 0.0]]
[bvp]
targets = "list"
points = [[1.0, 0.5]]
[outputs]
mpp_forward = false
)");
  const auto r = run_cli({"run", "--config", cfg.string(), "--out", (dir / "out").string(), "--quiet"});
  EXPECT_EQ(r.code, kExitNonConvergence);
  const auto j = nlohmann::json::parse(read_file(dir / "out" / "bvp_summary.json"));
  EXPECT_FALSE(j["all_converged"].get<bool>());
  EXPECT_EQ(j["landmarks"][0]["status"], "non_convergence");
  EXPECT_TRUE(fs::exists(dir / "out" / "mpp_bvp.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "figure.svg"));
}
