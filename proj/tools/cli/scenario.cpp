#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "mpflow/errors.hpp"
#include "mpflow/io.hpp"

namespace mpflow::cli {

namespace {

using json = nlohmann::json;

class Node {
 public:
  Node(const json& j, std::string key) : j_(j), key_(std::move(key)) {}

  const std::string& key() const { return key_; }
  const json& raw() const { return j_; }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(key_, msg); }

  bool has(const std::string& k) const { return j_.is_object() && j_.contains(k); }

  Node at(const std::string& k) const {
    if (!j_.is_object()) fail("expected a table");
    if (!j_.contains(k)) throw ConfigError(child_key(k), "missing required key");
    return Node(j_.at(k), child_key(k));
  }

  Node item(std::size_t i) const { return Node(j_.at(i), key_ + "[" + std::to_string(i) + "]"); }

  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  void allow(std::initializer_list<std::string> keys) const {
    if (!j_.is_object()) fail("expected a table");
    const std::set<std::string> ok(keys);
    for (const auto& [k, v] : j_.items())
      if (!ok.count(k)) throw ConfigError(child_key(k), "unknown key");
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }

  std::int64_t integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<std::int64_t>();
  }

  int count(int lo) const {
    const std::int64_t v = integer();
    if (v < lo || v > std::numeric_limits<int>::max()) fail("must be an integer >= " + std::to_string(lo));
    return static_cast<int>(v);
  }

  bool boolean() const {
    if (!j_.is_boolean()) fail("expected true or false");
    return j_.get<bool>();
  }

  std::string str() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  std::vector<double> numbers() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(item(i).number());
    return out;
  }

  Eigen::VectorXd vec(int d) const {
    const auto v = numbers();
    if (static_cast<int>(v.size()) != d) fail("expected " + std::to_string(d) + " components");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), d);
  }

  std::vector<Eigen::VectorXd> vecs(int d) const {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(item(i).vec(d));
    return out;
  }

  Eigen::MatrixXd matrix(int d) const {
    if (size() != static_cast<std::size_t>(d)) fail("expected " + std::to_string(d) + " rows");
    Eigen::MatrixXd A(d, d);
    for (int i = 0; i < d; ++i) A.row(i) = item(i).vec(d).transpose();
    return A;
  }

 private:
  std::string child_key(const std::string& k) const { return key_.empty() ? k : key_ + "." + k; }

  const json& j_;
  std::string key_;
};

Schedule parse_schedule(const Node& n) {
  const std::string kind = n.at("kind").str();
  if (kind == "polynomial") {
    n.allow({"kind", "coefficients"});
    return Schedule(Schedule::Polynomial{n.at("coefficients").numbers()});
  }
  if (kind == "sine") {
    n.allow({"kind", "offset", "amplitude", "frequency", "phase"});
    Schedule::Sine s;
    if (n.has("offset")) s.offset = n.at("offset").number();
    if (n.has("amplitude")) s.amplitude = n.at("amplitude").number();
    if (n.has("frequency")) s.frequency = n.at("frequency").number();
    if (n.has("phase")) s.phase = n.at("phase").number();
    return Schedule(s);
  }
  n.at("kind").fail("unknown schedule kind '" + kind + "'");
}

std::vector<double> coefficients(const Node& n, const std::string& k) {
  return n.has(k) ? n.at(k).numbers() : std::vector<double>{};
}

// One field record; `kind` values that expand to several fields append all
// of them.  Centers of kernel fields are collected for plotting.
void parse_field(const Node& n, int d, const std::filesystem::path& base_dir, std::vector<VectorFieldSpec>& out,
                 std::vector<Eigen::VectorXd>* centers) {
  const std::string kind = n.at("kind").str();
  std::vector<VectorFieldSpec> made;
  std::vector<std::string> keys{"kind", "schedule"};
  auto allow = [&](std::initializer_list<std::string> extra) {
    std::vector<std::string> all = keys;
    all.insert(all.end(), extra);
    for (const auto& [k, v] : n.raw().items())
      if (std::find(all.begin(), all.end(), k) == all.end()) throw ConfigError(n.key() + "." + k, "unknown key");
  };

  try {
    if (kind == "zero") {
      allow({});
      made.push_back(VectorFieldSpec::zero(d));
    } else if (kind == "constant") {
      allow({"value"});
      made.push_back(VectorFieldSpec::constant(n.at("value").vec(d)));
    } else if (kind == "gaussian") {
      allow({"center", "amplitude", "width"});
      const Eigen::VectorXd c = n.at("center").vec(d);
      made.push_back(VectorFieldSpec::gaussian(c, n.at("amplitude").vec(d), n.at("width").positive()));
      if (centers) centers->push_back(c);
    } else if (kind == "gaussian_grid") {
      allow({"lower", "upper", "count", "amplitude", "width"});
      const Eigen::VectorXd lo = n.at("lower").vec(d), hi = n.at("upper").vec(d);
      const Node cn = n.at("count");
      if (cn.size() != static_cast<std::size_t>(d)) cn.fail("expected " + std::to_string(d) + " components");
      std::vector<int> count;
      for (int i = 0; i < d; ++i) count.push_back(cn.item(i).count(1));
      const Eigen::VectorXd amp = n.at("amplitude").vec(d);
      const double width = n.at("width").positive();
      std::vector<int> idx(d, 0);
      while (true) {
        Eigen::VectorXd c(d);
        for (int i = 0; i < d; ++i)
          c[i] = count[i] == 1 ? 0.5 * (lo[i] + hi[i]) : lo[i] + (hi[i] - lo[i]) * idx[i] / (count[i] - 1);
        made.push_back(VectorFieldSpec::gaussian(c, amp, width));
        if (centers) centers->push_back(c);
        int i = d - 1;
        while (i >= 0 && ++idx[i] == count[i]) idx[i--] = 0;
        if (i < 0) break;
      }
    } else if (kind == "conformal") {
      allow({"beta"});
      const double beta = n.at("beta").number();
      for (int a = 0; a < d; ++a) made.push_back(VectorFieldSpec::conformal_axis(d, a, beta));
    } else if (kind == "kernel_momentum") {
      allow({"points", "momenta", "width"});
      made.push_back(VectorFieldSpec::kernel_momentum(n.at("points").vecs(d), n.at("momenta").vecs(d),
                                                      n.at("width").positive()));
    } else if (kind == "linear") {
      allow({"matrix", "offset"});
      made.push_back(VectorFieldSpec::linear(n.at("matrix").matrix(d),
                                             n.has("offset") ? n.at("offset").vec(d) : Eigen::VectorXd::Zero(d)));
    } else if (kind == "fourier") {
      allow({"axis", "direction", "offset", "sine", "cosine"});
      const int axis = n.has("axis") ? n.at("axis").count(0) : 0;
      if (axis >= d) n.at("axis").fail("must be below the dimension");
      made.push_back(VectorFieldSpec::fourier(axis, n.at("direction").vec(d),
                                              n.has("offset") ? n.at("offset").number() : 0.0,
                                              coefficients(n, "sine"), coefficients(n, "cosine")));
    } else if (kind == "sum") {
      allow({"terms"});
      const Node terms = n.at("terms");
      std::vector<VectorFieldSpec> parts;
      for (std::size_t i = 0; i < terms.size(); ++i) parse_field(terms.item(i), d, base_dir, parts, centers);
      if (parts.empty()) terms.fail("expected at least one term");
      made.push_back(VectorFieldSpec::sum(std::move(parts)));
    } else if (kind == "epdiff1d") {
      allow({"file", "field"});
      if (d != 1) n.fail("epdiff1d drift needs dimension = 1");
      const Node fn = n.at("file");
      const std::filesystem::path file = base_dir / fn.str();
      if (!std::filesystem::exists(file)) fn.fail("drift file " + file.string() + " does not exist");
      const std::string which = n.has("field") ? n.at("field").str() : "stratonovich";
      if (which != "stratonovich" && which != "ito") n.at("field").fail("expected \"stratonovich\" or \"ito\"");
      DriftSnapshots snaps;
      try {
        snaps = read_drift_json(file);
      } catch (const InvalidArgument& e) {
        fn.fail(e.what());
      }
      made.push_back(which == "ito" ? snaps.ito_field() : snaps.stratonovich_field());
    } else {
      n.at("kind").fail("unknown field kind '" + kind + "'");
    }
  } catch (const InvalidArgument& e) {
    n.fail(e.what());
  }

  if (n.has("schedule")) {
    const Schedule s = parse_schedule(n.at("schedule"));
    for (auto& f : made) f = VectorFieldSpec::time_scaled(f, s);
  }
  out.insert(out.end(), made.begin(), made.end());
}

std::vector<Eigen::VectorXd> parse_landmarks(const Node& n, int d) {
  const std::string kind = n.at("kind").str();
  std::vector<Eigen::VectorXd> pts;
  if (kind == "line") {
    n.allow({"kind", "from", "to", "count"});
    const Eigen::VectorXd a = n.at("from").vec(d), b = n.at("to").vec(d);
    const int c = n.at("count").count(1);
    for (int k = 0; k < c; ++k) pts.push_back(c == 1 ? a : Eigen::VectorXd(a + (b - a) * k / (c - 1.0)));
  } else if (kind == "grid") {
    n.allow({"kind", "lower", "upper", "count"});
    const Eigen::VectorXd lo = n.at("lower").vec(d), hi = n.at("upper").vec(d);
    const Node cn = n.at("count");
    if (cn.size() != static_cast<std::size_t>(d)) cn.fail("expected " + std::to_string(d) + " components");
    std::vector<int> count;
    for (int i = 0; i < d; ++i) count.push_back(cn.item(i).count(1));
    std::vector<int> idx(d, 0);
    while (true) {
      Eigen::VectorXd x(d);
      for (int i = 0; i < d; ++i)
        x[i] = count[i] == 1 ? 0.5 * (lo[i] + hi[i]) : lo[i] + (hi[i] - lo[i]) * idx[i] / (count[i] - 1);
      pts.push_back(x);
      int i = d - 1;
      while (i >= 0 && ++idx[i] == count[i]) idx[i--] = 0;
      if (i < 0) break;
    }
  } else if (kind == "list") {
    n.allow({"kind", "points"});
    pts = n.at("points").vecs(d);
    if (pts.empty()) n.at("points").fail("landmark count must be at least 1");
  } else {
    n.at("kind").fail("unknown landmark kind '" + kind + "'");
  }
  return pts;
}

Eigen::VectorXd fourier_profile(const Node& n, const Eigen::VectorXd& nodes) {
  n.allow({"offset", "sine", "cosine"});
  const double c0 = n.has("offset") ? n.at("offset").number() : 0.0;
  const auto s = coefficients(n, "sine"), c = coefficients(n, "cosine");
  Eigen::VectorXd v = Eigen::VectorXd::Constant(nodes.size(), c0);
  for (std::size_t k = 0; k < s.size(); ++k) v += s[k] * (static_cast<double>(k + 1) * nodes).array().sin().matrix();
  for (std::size_t k = 0; k < c.size(); ++k) v += c[k] * (static_cast<double>(k + 1) * nodes).array().cos().matrix();
  return v;
}

EpdiffSettings parse_epdiff(const Node& n) {
  n.allow({"n", "alpha", "steps", "snapshot_every", "output", "initial", "sigma"});
  EpdiffSettings e;
  if (n.has("n")) {
    e.n = n.at("n").count(8);
    if ((e.n & (e.n - 1)) != 0) n.at("n").fail("must be a power of two");
  }
  if (n.has("alpha")) e.alpha = n.at("alpha").positive();
  if (n.has("steps")) e.steps = n.at("steps").count(1);
  if (n.has("snapshot_every")) e.snapshot_every = n.at("snapshot_every").count(1);
  if (n.has("output")) e.output = n.at("output").str();
  Eigen::VectorXd nodes(e.n);
  for (int j = 0; j < e.n; ++j) nodes[j] = 2.0 * M_PI * j / e.n;
  e.u0 = fourier_profile(n.at("initial"), nodes);
  if (n.has("sigma")) {
    const Node s = n.at("sigma");
    for (std::size_t i = 0; i < s.size(); ++i) e.sigmas.push_back(fourier_profile(s.item(i), nodes));
  }
  return e;
}

}  // namespace

NoiseModel Scenario::noise_model() const {
  if (noise.empty()) throw ConfigError("noise", "missing required key");
  return NoiseModel(noise, solver.ellipticity_floor);
}

const VectorFieldSpec& Scenario::drift_field() const {
  if (!drift) throw ConfigError("drift", "missing required key");
  return *drift;
}

void Scenario::require(const std::string& section, const std::string& command) const {
  const bool present = section == "noise"       ? !noise.empty()
                       : section == "drift"     ? drift.has_value()
                       : section == "landmarks" ? !landmarks.empty()
                       : section == "epdiff"    ? epdiff.has_value()
                                                : true;
  if (!present) throw ConfigError(section, "missing required key (needed by '" + command + "')");
}

Scenario parse_scenario(const nlohmann::json& config, const std::filesystem::path& base_dir) {
  const Node root(config, "");
  root.allow({"name", "dimension", "horizon", "seed", "solver", "noise", "drift", "landmarks", "bvp", "ensemble",
              "outputs", "plot", "epdiff"});
  Scenario s;
  s.base_dir = base_dir;
  s.name = root.has("name") ? root.at("name").str() : "scenario";
  s.dimension = root.at("dimension").count(1);
  if (s.dimension > kMaxDimension) root.at("dimension").fail("must be 1, 2 or 3");
  const int d = s.dimension;
  s.horizon = root.at("horizon").positive();
  if (root.has("seed")) {
    const Node n = root.at("seed");
    if (n.integer() < 0) n.fail("must be non-negative");
    s.seed = static_cast<std::uint64_t>(n.integer());
  }

  if (root.has("solver")) {
    const Node n = root.at("solver");
    n.allow({"steps", "tolerance", "max_iter", "threads", "ellipticity_floor", "blowup_radius"});
    if (n.has("steps")) s.solver.steps = n.at("steps").count(2);
    if (n.has("tolerance")) s.solver.tolerance = n.at("tolerance").positive();
    if (n.has("max_iter")) s.solver.max_iter = n.at("max_iter").count(1);
    if (n.has("threads")) s.solver.threads = n.at("threads").count(1);
    if (n.has("ellipticity_floor")) s.solver.ellipticity_floor = n.at("ellipticity_floor").positive();
    if (n.has("blowup_radius")) s.solver.blowup_radius = n.at("blowup_radius").positive();
  }

  if (root.has("noise")) {
    const Node n = root.at("noise");
    for (std::size_t i = 0; i < n.size(); ++i) parse_field(n.item(i), d, base_dir, s.noise, &s.noise_centers);
  }
  if (root.has("drift")) {
    std::vector<VectorFieldSpec> f;
    parse_field(root.at("drift"), d, base_dir, f, nullptr);
    s.drift = f.size() == 1 ? f.front() : VectorFieldSpec::sum(f);
  }
  if (root.has("landmarks")) s.landmarks = parse_landmarks(root.at("landmarks"), d);

  if (root.has("bvp")) {
    const Node n = root.at("bvp");
    n.allow({"targets", "points"});
    const std::string t = n.has("targets") ? n.at("targets").str() : "deterministic";
    if (t == "list") {
      s.bvp_targets = n.at("points").vecs(d);
      if (s.bvp_targets->size() != s.landmarks.size())
        n.at("points").fail("need one target per landmark");
    } else if (t != "deterministic") {
      n.at("targets").fail("expected \"deterministic\" or \"list\"");
    }
  }

  if (root.has("ensemble")) {
    const Node n = root.at("ensemble");
    n.allow({"samples", "steps", "raw"});
    if (n.has("samples")) s.ensemble.samples = n.at("samples").count(0);
    if (n.has("steps")) s.ensemble.steps = n.at("steps").count(1);
    if (n.has("raw")) s.ensemble.raw = n.at("raw").count(0);
  }

  if (root.has("outputs")) {
    const Node n = root.at("outputs");
    n.allow({"deterministic", "mpp_forward", "mpp_bvp", "ensemble", "figure"});
    if (n.has("deterministic")) s.outputs.deterministic = n.at("deterministic").boolean();
    if (n.has("mpp_forward")) s.outputs.mpp_forward = n.at("mpp_forward").boolean();
    if (n.has("mpp_bvp")) s.outputs.mpp_bvp = n.at("mpp_bvp").boolean();
    if (n.has("ensemble")) s.outputs.ensemble = n.at("ensemble").boolean();
    if (n.has("figure")) s.outputs.figure = n.at("figure").boolean();
  }

  if (root.has("plot")) {
    const Node n = root.at("plot");
    n.allow({"lower", "upper"});
    const int pd = std::min(d, 2);
    Eigen::VectorXd lo = n.at("lower").vec(pd), hi = n.at("upper").vec(pd);
    if (!(hi.array() > lo.array()).all()) n.at("upper").fail("must exceed lower");
    s.plot_bounds = std::make_pair(lo, hi);
  }

  if (root.has("epdiff")) {
    if (d != 1) root.at("epdiff").fail("needs dimension = 1");
    s.epdiff = parse_epdiff(root.at("epdiff"));
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
  const auto config = parse_toml_file(file);
  return parse_scenario(config, file.has_parent_path() ? file.parent_path() : std::filesystem::path("."));
}

}  // namespace mpflow::cli
