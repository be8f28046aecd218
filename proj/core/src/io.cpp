#include "mpflow/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mpflow/errors.hpp"

namespace mpflow {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

void write_paths(std::ostream& out, const std::vector<Path>& paths, const std::vector<std::int64_t>* ids) {
  if (paths.empty()) throw InvalidArgument("write_paths_csv: no paths");
  if (ids && ids->size() != paths.size()) throw InvalidArgument("write_paths_csv: one sample id per path");
  const int d = paths.front().dimension();
  const bool tagged = ids || paths.size() > 1;
  out << "t";
  for (int i = 1; i <= d; ++i) out << ",x" << i;
  if (tagged) out << ",sample";
  out << '\n';
  for (std::size_t s = 0; s < paths.size(); ++s) {
    const Path& p = paths[s];
    if (p.dimension() != d) throw InvalidArgument("write_paths_csv: paths differ in dimension");
    const std::int64_t id = ids ? (*ids)[s] : static_cast<std::int64_t>(s);
    for (int k = 0; k < p.nodes(); ++k) {
      out << format_double(p.times[k]);
      for (int i = 0; i < d; ++i) out << ',' << format_double(p.points(k, i));
      if (tagged) out << ',' << id;
      out << '\n';
    }
  }
}

std::ofstream open_for_writing(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  return out;
}

}  // namespace

void write_paths_csv(std::ostream& out, const std::vector<Path>& paths) { write_paths(out, paths, nullptr); }

void write_paths_csv(std::ostream& out, const std::vector<Path>& paths, const std::vector<std::int64_t>& sample_ids) {
  write_paths(out, paths, &sample_ids);
}

void write_paths_csv(const std::filesystem::path& file, const std::vector<Path>& paths,
                     const std::vector<std::int64_t>& sample_ids) {
  auto out = open_for_writing(file);
  write_paths(out, paths, &sample_ids);
}

void write_paths_csv(const std::filesystem::path& file, const std::vector<Path>& paths) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  write_paths_csv(out, paths);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

double parse_number(const std::string& s, int line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InvalidArgument("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<Path> read_paths_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("csv: empty input");
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "t") throw InvalidArgument("csv: header must start with t,x1");
  const bool tagged = header.back() == "sample";
  const int d = static_cast<int>(header.size()) - 1 - (tagged ? 1 : 0);
  for (int i = 1; i <= d; ++i)
    if (header[i] != "x" + std::to_string(i)) throw InvalidArgument("csv: unexpected column " + header[i]);

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<double>>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw InvalidArgument("csv line " + std::to_string(lineno) + ": wrong column count");
    const std::string id = tagged ? cells.back() : "";
    std::vector<double> r(d + 1);
    for (int i = 0; i <= d; ++i) r[i] = parse_number(cells[i], lineno);
    auto it = rows.find(id);
    if (it == rows.end()) {
      order.push_back(id);
      it = rows.emplace(id, std::vector<std::vector<double>>{}).first;
    }
    it->second.push_back(std::move(r));
  }
  std::vector<Path> out;
  for (const auto& id : order) {
    const auto& r = rows[id];
    Path p;
    p.points.resize(static_cast<Eigen::Index>(r.size()), d);
    for (std::size_t k = 0; k < r.size(); ++k) {
      p.times.push_back(r[k][0]);
      for (int i = 0; i < d; ++i) p.points(static_cast<Eigen::Index>(k), i) = r[k][i + 1];
    }
    out.push_back(std::move(p));
  }
  if (out.empty()) throw InvalidArgument("csv: no rows");
  return out;
}

std::vector<Path> read_paths_csv(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + file.string());
  return read_paths_csv(in);
}

namespace {

nlohmann::json to_json(const std::vector<Eigen::VectorXd>& snaps) {
  auto arr = nlohmann::json::array();
  for (const auto& v : snaps) arr.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return arr;
}

std::vector<Eigen::VectorXd> snapshots_from(const nlohmann::json& arr, int n) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& row : arr) {
    const auto v = row.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != n) throw InvalidArgument("drift json: snapshot length differs from n");
    out.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), n));
  }
  return out;
}

}  // namespace

std::string drift_to_json(const DriftSnapshots& drift) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["alpha"] = drift.alpha;
  j["n"] = drift.n;
  j["times"] = drift.times;
  j["u"] = to_json(drift.u);
  j["u_hat"] = to_json(drift.u_hat);
  return j.dump(1) + "\n";
}

DriftSnapshots drift_from_json(const std::string& text) {
  DriftSnapshots d;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw InvalidArgument("drift json: unsupported schema_version");
    d.alpha = j.at("alpha").get<double>();
    d.n = j.at("n").get<int>();
    d.times = j.at("times").get<std::vector<double>>();
    d.u = snapshots_from(j.at("u"), d.n);
    d.u_hat = j.contains("u_hat") ? snapshots_from(j.at("u_hat"), d.n) : d.u;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("drift json: ") + e.what());
  }
  if (d.times.size() < 2 || d.u.size() != d.times.size() || d.u_hat.size() != d.times.size())
    throw InvalidArgument("drift json: need at least two snapshots, one per time");
  return d;
}

void write_drift_json(const std::filesystem::path& file, const DriftSnapshots& drift) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out << drift_to_json(drift);
}

DriftSnapshots read_drift_json(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return drift_from_json(ss.str());
}

}  // namespace mpflow
