#pragma once

// Run outputs: the time-series CSV, one ledger dump per replica, a JSON run
// report and optional SVG plots.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mgsim/ledger.hpp"
#include "mgsim/simulation.hpp"

namespace mgsim {

inline const std::vector<std::string>& csv_agent_columns() {
  static const std::vector<std::string> cols{"v_out", "i_out", "i_pu", "v_bar", "delta", "dv1",   "dv2",
                                             "v_star", "dm1",  "dm2",  "flag",  "heal",  "e_down", "trigger"};
  return cols;
}

// "t" followed by <column>_<agent> for every agent, agent-major.
inline std::string csv_header(std::size_t agents) {
  std::string h = "t";
  for (std::size_t k = 0; k < agents; ++k)
    for (const auto& c : csv_agent_columns()) h += "," + c + "_" + std::to_string(k);
  return h;
}

namespace detail {

inline void put_number(std::string& line, double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  line.append(buf, ec == std::errc() ? p : buf);
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<Sample>& series) {
  if (series.empty()) return;
  os << csv_header(series.front().agents.size()) << '\n';
  std::string line;
  for (const auto& s : series) {
    line.clear();
    detail::put_number(line, s.t);
    for (const auto& a : s.agents) {
      for (double v : {a.v_out, a.i_out, a.i_pu, a.v_bar, a.delta, a.dv1, a.dv2, a.v_star, a.dm1, a.dm2}) {
        line.push_back(',');
        detail::put_number(line, v);
      }
      line += a.flag ? ",1" : ",0";
      line += "," + std::to_string(static_cast<int>(a.heal));
      line.push_back(',');
      detail::put_number(line, a.e_down);
      line += a.trigger ? ",1" : ",0";
    }
    os << line << '\n';
  }
}

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["rounds"] = r.rounds;
  j["committed"] = r.committed;
  j["rejected"] = r.rejected;
  j["forged_commits"] = r.forged_commits;
  j["all_nodes_compromised"] = r.all_nodes_compromised;
  j["control_steps"] = r.control_steps;
  j["predictor_triggers"] = r.triggers;
  j["raw_leaks"] = r.raw_leaks;
  j["final_max_vbar_error_V"] = r.max_vbar_error;
  j["final_max_abs_delta_pu"] = r.max_abs_delta;
  j["wall_seconds"] = r.wall_seconds;
  j["notes"] = r.notes;
  auto& flags = j["flags"] = nlohmann::json::array();
  for (const auto& f : r.flags)
    flags.push_back({{"t", f.t}, {"agent", f.agent}, {"event", f.raised ? "raised" : "cleared"},
                     {"voltage", f.voltage}, {"current", f.current}});
  auto& heals = j["heals"] = nlohmann::json::array();
  for (const auto& h : r.heals)
    heals.push_back({{"agent", h.agent},
                     {"signal", h.signal == SignalKind::Current ? "current" : "voltage"},
                     {"t_trigger", h.t_trigger},
                     {"donor", h.donor},
                     {"held_value", h.held_value},
                     {"resume_at", h.resume_at},
                     {"hops", h.hops}});
  auto& resumes = j["resumes"] = nlohmann::json::array();
  for (const auto& e : r.resumes)
    resumes.push_back({{"t", e.t}, {"agent", e.agent}, {"donor", e.donor}, {"hops", e.hops}});
  auto& traffic = j["traffic"] = nlohmann::json::array();
  for (const auto& [link, tr] : r.traffic)
    traffic.push_back({{"link", std::to_string(link.first) + "-" + std::to_string(link.second)},
                       {"sent", tr.sent},
                       {"exposed", tr.exposed},
                       {"dropped", tr.dropped}});
  return j;
}

namespace detail {

struct Trace {
  std::string label;
  std::vector<double> y;
};

inline std::string svg_panel(const std::vector<double>& t, const std::vector<Trace>& traces,
                             const std::string& title, double y_off) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
  const double w = 760.0, h = 220.0, x0 = 60.0;
  double lo = 1e300, hi = -1e300;
  for (const auto& tr : traces)
    for (double v : tr.y) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) {
    hi = lo + 1.0;
    lo -= 1.0;
  }
  const double t0 = t.front(), t1 = t.back() > t.front() ? t.back() : t.front() + 1.0;
  std::ostringstream os;
  os << "<g transform=\"translate(0," << y_off << ")\">\n";
  os << "<rect x=\"" << x0 << "\" y=\"20\" width=\"" << w << "\" height=\"" << h
     << "\" fill=\"none\" stroke=\"#888\"/>\n";
  os << "<text x=\"" << x0 << "\" y=\"14\" font-size=\"13\">" << title << "</text>\n";
  os << "<text x=\"4\" y=\"30\" font-size=\"10\">" << hi << "</text>\n";
  os << "<text x=\"4\" y=\"" << 20 + h << "\" font-size=\"10\">" << lo << "</text>\n";
  const std::size_t stride = std::max<std::size_t>(1, t.size() / 2000);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    os << "<polyline fill=\"none\" stroke-width=\"1\" stroke=\"" << kColors[i % 6] << "\" points=\"";
    for (std::size_t s = 0; s < t.size(); s += stride) {
      const double x = x0 + (t[s] - t0) / (t1 - t0) * w;
      const double y = 20 + h - (traces[i].y[s] - lo) / (hi - lo) * h;
      os << x << ',' << y << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << x0 + w + 8 << "\" y=\"" << 34 + 14 * i << "\" font-size=\"11\" fill=\"" << kColors[i % 6]
       << "\">" << traces[i].label << "</text>\n";
  }
  os << "</g>\n";
  return os.str();
}

}  // namespace detail

// Currents, voltages and detection metrics against time.
inline std::string plot_svg(const std::vector<Sample>& series, const std::string& title) {
  if (series.empty()) return {};
  const std::size_t n = series.front().agents.size();
  std::vector<double> t;
  for (const auto& s : series) t.push_back(s.t);
  auto traces = [&](auto field) {
    std::vector<detail::Trace> out;
    for (std::size_t k = 0; k < n; ++k) {
      detail::Trace tr{"agent " + std::to_string(k), {}};
      for (const auto& s : series) tr.y.push_back(field(s.agents[k]));
      out.push_back(std::move(tr));
    }
    return out;
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"1060\" font-family=\"sans-serif\">\n";
  os << "<text x=\"60\" y=\"18\" font-size=\"15\">" << title << "</text>\n";
  os << detail::svg_panel(t, traces([](const AgentSample& a) { return a.i_pu; }), "per-unit current", 30);
  os << detail::svg_panel(t, traces([](const AgentSample& a) { return a.v_out; }), "output voltage (V)", 290);
  os << detail::svg_panel(t, traces([](const AgentSample& a) { return a.dm1; }), "voltage metric", 550);
  os << detail::svg_panel(t, traces([](const AgentSample& a) { return a.dm2; }), "current metric", 810);
  os << "</svg>\n";
  return os.str();
}

struct OutputFiles {
  std::filesystem::path csv;
  std::vector<std::filesystem::path> dumps;
  std::filesystem::path report;
  std::optional<std::filesystem::path> plot;
};

inline OutputFiles export_outputs(const RunResult& run, const std::filesystem::path& dir, const std::string& name,
                                  bool plots) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoError, "cannot write " + p.string());
    return f;
  };
  OutputFiles files;
  files.csv = dir / (name + ".csv");
  {
    auto f = open(files.csv);
    write_csv(f, run.series);
  }
  for (std::size_t k = 0; k < run.replicas.size(); ++k) {
    files.dumps.push_back(dir / (name + ".ledger." + std::to_string(k) + ".jsonl"));
    auto f = open(files.dumps.back());
    write_dump(f, run.replicas[k].chain());
  }
  files.report = dir / (name + ".report.json");
  {
    auto f = open(files.report);
    f << report_to_json(run.report).dump(2) << '\n';
  }
  if (plots) {
    files.plot = dir / (name + ".svg");
    auto f = open(*files.plot);
    f << plot_svg(run.series, name);
  }
  return files;
}

}  // namespace mgsim
