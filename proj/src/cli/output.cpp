#include "emfg/cli/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace emfg::cli {

bool ResultBundle::check(const std::string& name, double value, const std::string& relation, double threshold,
                         const std::string& detail) {
  bool pass = false;
  if (relation == "<=") pass = value <= threshold;
  else if (relation == "<") pass = value < threshold;
  else if (relation == ">=") pass = value >= threshold;
  else if (relation == ">") pass = value > threshold;
  else throw std::invalid_argument("unknown relation '" + relation + "'");
  assertions.push_back({name, pass, value, threshold, relation, detail});
  return pass;
}

bool ResultBundle::check(const std::string& name, bool pass, const std::string& detail) {
  assertions.push_back({name, pass, pass ? 1.0 : 0.0, 1.0, "==", detail});
  return pass;
}

int ResultBundle::passed() const {
  return static_cast<int>(std::count_if(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; }));
}

int ResultBundle::exit_code() const {
  if (!failures.empty()) return 1;
  return passed() == static_cast<int>(assertions.size()) ? 0 : 3;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string render_csv(const Table& t) {
  std::ostringstream os;
  for (size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
  os << '\n';
  for (const auto& row : t.rows) {
    for (size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_number(row[c]);
    os << '\n';
  }
  return os.str();
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;

  double map(double v) const { return log ? std::log10(v) : v; }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
};

Axis fit_axis(const std::vector<Series>& series, bool use_x, bool log) {
  Axis a;
  a.log = log;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    for (double v : use_x ? s.x : s.y) {
      if (!a.usable(v)) continue;
      lo = std::min(lo, a.map(v));
      hi = std::max(hi, a.map(v));
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-300) {
    const double pad = std::max(std::abs(lo) * 0.05, 0.5);
    lo -= pad;
    hi += pad;
  }
  a.lo = lo;
  a.hi = hi;
  return a;
}

}  // namespace

std::string render_svg(const Plot& p) {
  const double width = 660, height = 420, left = 96, right = 20, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;
  const Axis ax = fit_axis(p.series, true, p.log_x);
  const Axis ay = fit_axis(p.series, false, p.log_y);
  auto px = [&](double v) { return left + (ax.map(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return top + ph - (ay.map(v) - ay.lo) / (ay.hi - ay.lo) * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(p.title)
     << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = ax.lo + (ax.hi - ax.lo) * k / 4.0, fy = ay.lo + (ay.hi - ay.lo) * k / 4.0;
    const double sx = left + pw * k / 4.0, sy = top + ph - ph * k / 4.0;
    const double vx = ax.log ? std::pow(10.0, fx) : fx, vy = ay.log ? std::pow(10.0, fy) : fy;
    os << "<line x1=\"" << sx << "\" y1=\"" << top + ph << "\" x2=\"" << sx << "\" y2=\"" << top + ph + 5
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << sx << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt("%.3g", vx)
       << "</text>\n";
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << sy << "\" x2=\"" << left << "\" y2=\"" << sy
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">" << fmt("%.3g", vy)
       << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 18 << "\" text-anchor=\"middle\">"
     << escape_xml(p.x_label + (p.log_x ? " (log)" : "")) << "</text>\n";
  os << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape_xml(p.y_label + (p.log_y ? " (log)" : "")) << "</text>\n";

  for (size_t s = 0; s < p.series.size(); ++s) {
    const Series& se = p.series[s];
    const char* color = colors[s % (sizeof colors / sizeof *colors)];
    std::ostringstream pts;
    size_t count = 0;
    for (size_t k = 0; k < std::min(se.x.size(), se.y.size()); ++k) {
      if (!ax.usable(se.x[k]) || !ay.usable(se.y[k])) continue;
      pts << fmt("%.2f", px(se.x[k])) << ',' << fmt("%.2f", py(se.y[k])) << ' ';
      ++count;
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
       << "\"/>\n";
    if (count <= 40) {
      for (size_t k = 0; k < std::min(se.x.size(), se.y.size()); ++k) {
        if (!ax.usable(se.x[k]) || !ay.usable(se.y[k])) continue;
        os << "<circle cx=\"" << fmt("%.2f", px(se.x[k])) << "\" cy=\"" << fmt("%.2f", py(se.y[k]))
           << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    const double ly = top + 16 + 16 * static_cast<double>(s);
    os << "<line x1=\"" << left + pw - 150 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw - 130 << "\" y2=\""
       << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw - 125 << "\" y=\"" << ly << "\">" << escape_xml(se.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

nlohmann::json summary_document(const ResultBundle& b) {
  using nlohmann::json;
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = command_name(b.config.command);
  doc["provenance"] = {{"version", kVersion},
                       {"seed", b.config.seed},
                       {"started", b.started},
                       {"finished", b.finished},
                       {"runtime_seconds", b.runtime_seconds}};
  json asserts = json::array();
  for (const auto& a : b.assertions) {
    asserts.push_back({{"name", a.name},
                       {"pass", a.pass},
                       {"value", a.value},
                       {"relation", a.relation},
                       {"threshold", a.threshold},
                       {"detail", a.detail}});
  }
  doc["assertions"] = asserts;
  doc["counts"] = {{"assertions", b.assertions.size()},
                   {"passed", b.passed()},
                   {"failed", static_cast<int>(b.assertions.size()) - b.passed()},
                   {"solver_failures", b.failures.size()}};
  doc["failures"] = b.failures;
  doc["results"] = b.summary;
  doc["exit_code"] = b.exit_code();
  json tables = json::array();
  for (const auto& t : b.tables) tables.push_back(t.name + ".csv");
  doc["tables"] = tables;
  json plots = json::array();
  for (const auto& p : b.plots) plots.push_back(p.name + ".svg");
  doc["plots"] = plots;
  return doc;
}

std::vector<std::string> emit(const ResultBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& content) {
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    written.push_back(path.string());
  };
  for (const auto& t : b.tables) write(t.name + ".csv", render_csv(t));
  for (const auto& p : b.plots) write(p.name + ".svg", render_svg(p));
  write("config.yaml", emit_config(b.config));
  write("summary.json", summary_document(b).dump(2) + "\n");
  return written;
}

}  // namespace emfg::cli
