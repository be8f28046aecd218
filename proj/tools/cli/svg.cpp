#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mpflow::cli {

namespace {

constexpr double kPanel = 320.0;
constexpr double kGap = 20.0;
constexpr double kTop = 40.0;
constexpr const char* kRed = "#d62728";
constexpr const char* kBlue = "#1f77b4";
constexpr const char* kGreen = "#2ca02c";

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Frame {
  Eigen::Vector2d lo, hi;
  double scale_x = 1.0, scale_y = 1.0;

  Eigen::Vector2d map(const Eigen::Vector2d& w) const {
    return {(w.x() - lo.x()) * scale_x, kPanel - (w.y() - lo.y()) * scale_y};
  }
};

// World coordinates of node k: (x1, x2), or (t, x1) in 1D.
Eigen::Vector2d node(const Path& p, int k) {
  if (p.dimension() == 1) return {p.times[k], p.points(k, 0)};
  return {p.points(k, 0), p.points(k, 1)};
}

Eigen::Vector2d center_point(const Eigen::VectorXd& c) {
  if (c.size() == 1) return {0.0, c[0]};
  return {c[0], c[1]};
}

Frame make_frame(const FigureData& d) {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(1e300), hi = Eigen::Vector2d::Constant(-1e300);
  auto grow = [&](const Eigen::Vector2d& w) {
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  };
  for (const auto* set : {&d.deterministic, &d.forward, &d.bvp})
    for (const Path& p : *set)
      for (int k = 0; k < p.nodes(); ++k) grow(node(p, k));
  for (const auto& c : d.centers) grow(center_point(c));
  if (!(hi.array() >= lo.array()).all()) lo.setConstant(-1.0), hi.setConstant(1.0);

  if (d.bounds) {
    if (d.dimension == 1) {
      lo.y() = d.bounds->first[0];
      hi.y() = d.bounds->second[0];
    } else {
      lo = d.bounds->first.head<2>();
      hi = d.bounds->second.head<2>();
    }
  } else {
    Eigen::Vector2d span = (hi - lo).cwiseMax(1e-9);
    if (d.dimension != 1) span.setConstant(span.maxCoeff());
    const Eigen::Vector2d mid = 0.5 * (lo + hi);
    lo = mid - 0.55 * span;
    hi = mid + 0.55 * span;
  }
  Frame f{lo, hi};
  f.scale_x = kPanel / (hi.x() - lo.x());
  f.scale_y = kPanel / (hi.y() - lo.y());
  return f;
}

void polyline(std::ostream& out, const Frame& f, const Path& p, const char* cls, const char* color, double width,
              int index) {
  if (p.nodes() == 0) return;
  out << "    <polyline class=\"" << cls << "\" data-index=\"" << index << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"" << width << "\" points=\"";
  for (int k = 0; k < p.nodes(); ++k) {
    const Eigen::Vector2d q = f.map(node(p, k));
    out << (k ? " " : "") << px(q.x()) << ',' << px(q.y());
  }
  out << "\"/>\n";
}

void panel_open(std::ostream& out, const std::string& id, int column, const std::string& label) {
  out << "  <g class=\"panel\" id=\"" << id << "\" transform=\"translate(" << px(kGap + column * (kPanel + kGap))
      << "," << px(kTop) << ")\">\n"
      << "    <text x=\"0\" y=\"-8\" font-family=\"sans-serif\" font-size=\"12\">" << escape(label) << "</text>\n"
      << "    <rect class=\"frame\" x=\"0\" y=\"0\" width=\"" << px(kPanel) << "\" height=\"" << px(kPanel)
      << "\" fill=\"none\" stroke=\"#444\"/>\n"
      << "    <g clip-path=\"url(#panel-clip)\">\n";
}

void panel_close(std::ostream& out) { out << "    </g>\n  </g>\n"; }

void drift_arrows(std::ostream& out, const Frame& f, const VectorFieldSpec& drift) {
  constexpr int kGrid = 15;
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> arrows;
  double vmax = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(drift.dimension());
      x[0] = f.lo.x() + (i + 0.5) * (f.hi.x() - f.lo.x()) / kGrid;
      x[1] = f.lo.y() + (j + 0.5) * (f.hi.y() - f.lo.y()) / kGrid;
      const Eigen::VectorXd u = eval_value(drift, 0.0, x);
      arrows.emplace_back(Eigen::Vector2d(x[0], x[1]), Eigen::Vector2d(u[0], u[1]));
      vmax = std::max(vmax, std::hypot(u[0], u[1]));
    }
  }
  if (!(vmax > 0.0)) return;
  const double cell = kPanel / kGrid;
  out << "      <g class=\"drift\" stroke=\"#888\" stroke-width=\"0.8\">\n";
  for (const auto& [x, u] : arrows) {
    const Eigen::Vector2d a = f.map(x);
    const Eigen::Vector2d du(u.x() * f.scale_x, -u.y() * f.scale_y);
    const double len = std::hypot(u.x(), u.y()) / vmax * 0.9 * cell;
    if (len < 0.5) continue;
    const Eigen::Vector2d b = a + du.normalized() * len;
    out << "        <line x1=\"" << px(a.x()) << "\" y1=\"" << px(a.y()) << "\" x2=\"" << px(b.x()) << "\" y2=\""
        << px(b.y()) << "\" marker-end=\"url(#arrow)\"/>\n";
  }
  out << "      </g>\n";
}

}  // namespace

std::string render_figure(const FigureData& d) {
  const Frame f = make_frame(d);
  const double width = 3 * kPanel + 4 * kGap;
  const double height = kPanel + kTop + kGap;
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(width) << "\" height=\"" << px(height)
      << "\" viewBox=\"0 0 " << px(width) << " " << px(height) << "\">\n"
      << "  <title>" << escape(d.title) << "</title>\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << px(width) << "\" height=\"" << px(height) << "\" fill=\"white\"/>\n"
      << "  <defs>\n"
      << "    <clipPath id=\"panel-clip\"><rect x=\"0\" y=\"0\" width=\"" << px(kPanel) << "\" height=\"" << px(kPanel)
      << "\"/></clipPath>\n"
      << "    <marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"5\" markerHeight=\"5\" "
         "orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#888\"/></marker>\n"
      << "    <g id=\"deterministic\">\n";
  for (std::size_t i = 0; i < d.deterministic.size(); ++i)
    polyline(out, f, d.deterministic[i], "deterministic", kRed, 2.5, static_cast<int>(i));
  out << "    </g>\n  </defs>\n";

  panel_open(out, "panel-field", 0, d.dimension == 2 ? "drift at t = 0, noise centers" : "noise centers");
  if (d.drift && d.dimension == 2) drift_arrows(out, f, *d.drift);
  out << "      <g class=\"centers\">\n";
  for (const auto& c : d.centers) {
    const Eigen::Vector2d q = f.map(center_point(c));
    out << "        <circle class=\"noise-center\" cx=\"" << px(q.x()) << "\" cy=\"" << px(q.y())
        << "\" r=\"3\" fill=\"" << kGreen << "\"/>\n";
  }
  out << "      </g>\n";
  panel_close(out);

  panel_open(out, "panel-forward", 1, "forward most probable paths");
  if (!d.deterministic.empty()) out << "      <use href=\"#deterministic\"/>\n";
  for (std::size_t i = 0; i < d.forward.size(); ++i) polyline(out, f, d.forward[i], "mpp-forward", kBlue, 1.0, static_cast<int>(i));
  panel_close(out);

  panel_open(out, "panel-bvp", 2, "most probable paths between endpoints");
  if (!d.deterministic.empty()) out << "      <use href=\"#deterministic\"/>\n";
  for (std::size_t i = 0; i < d.bvp.size(); ++i) polyline(out, f, d.bvp[i], "mpp-bvp", kBlue, 1.0, static_cast<int>(i));
  panel_close(out);

  out << "</svg>\n";
  return out.str();
}

}  // namespace mpflow::cli
