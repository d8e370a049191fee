#pragma once

// Scenario files: an INI-like text format with named sections.
//
//   # comment (also ';')
//   [section]
//   key = value
//
// Keys marked (repeatable) may appear many times; [attack] may appear many
// times, one attack per section. Agent ids are 0-based. Grammar:
//
//   [sim]        t_end, dt, comm_period, seed, init = equilibrium|cold
//   [graph]      agents, edge = i j [w]            (repeatable, w defaults to 1)
//   [plant]      buses, tracking_tau, i_max, i_min, v_min, v_max, rating,
//                converter = bus [i_max]           (repeatable, one per agent)
//                line = a b R                      (repeatable)
//                load = t bus R                    (repeatable)
//                sigma_w, sigma_v
//   [controller] v_ref, i_ref, kp_h1, ki_h1, kp_h2, ki_h2, c, comm_delay_tau
//   [ledger]     enabled, contract, mining_delay
//   [detection]  enabled, h, c, upsilon1, upsilon2, debounce, clear_window
//   [selfheal]   enabled, window, event_threshold
//   [predictor]  enabled, d, b, alpha, t_loop, k1, k2, deadband
//   [attack]     kind, signal, targets, links, start, stop, magnitude, zeta,
//                vector, accept, suppress_self_report
//   [output]     plots
//
// [graph] and [plant] are required; other sections fall back to defaults and
// the fallback is recorded in ScenarioConfig::notices.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mgsim/attacks.hpp"
#include "mgsim/control.hpp"
#include "mgsim/detection.hpp"
#include "mgsim/plant.hpp"
#include "mgsim/predictor.hpp"
#include "mgsim/selfheal.hpp"
#include "mgsim/topology.hpp"

namespace mgsim {

struct SimParams {
  double t_end = 5.0;
  double comm_period = 1e-3;
  std::uint64_t seed = 1;
  bool cold_start = false;
};

struct LedgerParams {
  bool enabled = true;
  bool contract = true;
  double mining_delay = 0.0;
};

struct ScenarioConfig {
  std::string name;
  SimParams sim;
  std::size_t agents = 0;
  std::vector<Edge> edges;
  GraphTopology graph;
  PlantParams plant;
  MeasurementModel measurement;
  ControllerParams controller;
  LedgerParams ledger;
  bool detection_enabled = true;
  DetectionParams detection;
  SelfHealParams selfheal;
  PredictorParams predictor;
  std::vector<AttackSpec> attacks;
  bool plots = false;
  std::vector<std::string> notices;
};

namespace detail {

struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct Section {
  std::string name;
  std::size_t line = 0;
  std::vector<Entry> entries;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::string w;
  for (char ch : s) {
    if (ch == ' ' || ch == '\t' || ch == ',') {
      if (!w.empty()) out.push_back(std::move(w));
      w.clear();
    } else {
      w.push_back(ch);
    }
  }
  if (!w.empty()) out.push_back(std::move(w));
  return out;
}

inline std::vector<Section> tokenize(const std::string& text) {
  std::vector<Section> sections;
  std::istringstream in(text);
  std::string raw;
  std::size_t n = 0;
  while (std::getline(in, raw)) {
    ++n;
    const auto cut = raw.find_first_of("#;");
    const std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw Error(ErrorKind::ParseError, "line " + std::to_string(n) + ": malformed section header");
      sections.push_back({trim(line.substr(1, line.size() - 2)), n, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::ParseError, "line " + std::to_string(n) + ": expected key = value");
    if (sections.empty())
      throw Error(ErrorKind::ParseError, "line " + std::to_string(n) + ": entry outside any section");
    sections.back().entries.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), n});
  }
  return sections;
}

inline Error field_error(const Entry& e, const std::string& why) {
  return Error(ErrorKind::ParseError, "line " + std::to_string(e.line) + ", field '" + e.key + "': " + why);
}

inline double to_double(const Entry& e, const std::string& word) {
  double v = 0.0;
  const char* first = word.data();
  const char* last = first + word.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last) {
    if (word == "inf") return std::numeric_limits<double>::infinity();
    throw field_error(e, "'" + word + "' is not a number");
  }
  return v;
}

inline std::size_t to_index(const Entry& e, const std::string& word) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(word.data(), word.data() + word.size(), v);
  if (ec != std::errc() || p != word.data() + word.size())
    throw field_error(e, "'" + word + "' is not a non-negative integer");
  return v;
}

inline bool to_bool(const Entry& e) {
  if (e.value == "true" || e.value == "on" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "off" || e.value == "no" || e.value == "0") return false;
  throw field_error(e, "expected true or false");
}

inline double number(const Entry& e) {
  const auto w = split_words(e.value);
  if (w.size() != 1) throw field_error(e, "expected one number");
  return to_double(e, w[0]);
}

inline std::vector<double> numbers(const Entry& e, std::size_t min_count, std::size_t max_count) {
  const auto w = split_words(e.value);
  if (w.size() < min_count || w.size() > max_count)
    throw field_error(e, "expected " + std::to_string(min_count) +
                             (min_count == max_count ? "" : "-" + std::to_string(max_count)) + " numbers");
  std::vector<double> out;
  for (const auto& s : w) out.push_back(to_double(e, s));
  return out;
}

inline std::size_t index(const Entry& e) {
  const auto w = split_words(e.value);
  if (w.size() != 1) throw field_error(e, "expected one integer");
  return to_index(e, w[0]);
}

// Dispatches entries of one section to handlers, rejecting unknown keys.
class Fields {
 public:
  using Handler = std::function<void(const Entry&)>;

  Fields& on(const std::string& key, Handler h) {
    handlers_[key] = std::move(h);
    return *this;
  }

  void run(const Section& s) const {
    for (const auto& e : s.entries) {
      auto it = handlers_.find(e.key);
      if (it == handlers_.end()) throw field_error(e, "unknown key in [" + s.name + "]");
      it->second(e);
    }
  }

 private:
  std::map<std::string, Handler> handlers_;
};

}  // namespace detail

inline ScenarioConfig parse_scenario(const std::string& text, const std::string& name = "scenario") {
  using namespace detail;
  const auto sections = tokenize(text);
  ScenarioConfig cfg;
  cfg.name = name;

  static const std::set<std::string> kKnown{"sim",      "graph",     "plant",    "controller", "ledger",
                                            "detection", "selfheal", "predictor", "attack",     "output"};
  std::map<std::string, const Section*> single;
  std::vector<const Section*> attack_sections;
  for (const auto& s : sections) {
    if (!kKnown.contains(s.name))
      throw Error(ErrorKind::ParseError, "line " + std::to_string(s.line) + ": unknown section [" + s.name + "]");
    if (s.name == "attack") {
      attack_sections.push_back(&s);
      continue;
    }
    if (single.contains(s.name))
      throw Error(ErrorKind::ParseError, "line " + std::to_string(s.line) + ": duplicate section [" + s.name + "]");
    single[s.name] = &s;
  }
  for (const char* required : {"graph", "plant"})
    if (!single.contains(required))
      throw Error(ErrorKind::ParseError, std::string("missing section [") + required + "]");
  for (const char* optional : {"sim", "controller", "ledger", "detection", "selfheal", "predictor", "output"})
    if (!single.contains(optional)) cfg.notices.push_back(std::string("[") + optional + "] absent, defaults used");

  auto section = [&](const char* n) -> const Section* {
    auto it = single.find(n);
    return it == single.end() ? nullptr : it->second;
  };

  double dt = 1e-4;
  if (auto s = section("sim"))
    Fields{}
        .on("t_end", [&](const Entry& e) { cfg.sim.t_end = number(e); })
        .on("dt", [&](const Entry& e) { dt = number(e); })
        .on("comm_period", [&](const Entry& e) { cfg.sim.comm_period = number(e); })
        .on("seed", [&](const Entry& e) { cfg.sim.seed = index(e); })
        .on("init",
            [&](const Entry& e) {
              if (e.value == "cold") cfg.sim.cold_start = true;
              else if (e.value == "equilibrium") cfg.sim.cold_start = false;
              else throw field_error(e, "expected equilibrium or cold");
            })
        .run(*s);

  std::vector<std::pair<Edge, std::size_t>> edges;
  bool have_agents = false;
  Fields{}
      .on("agents",
          [&](const Entry& e) {
            cfg.agents = index(e);
            have_agents = true;
          })
      .on("edge",
          [&](const Entry& e) {
            const auto v = numbers(e, 2, 3);
            const Edge edge{to_index(e, split_words(e.value)[0]), to_index(e, split_words(e.value)[1]),
                            v.size() == 3 ? v[2] : 1.0};
            edges.emplace_back(edge, e.line);
          })
      .run(*section("graph"));
  if (!have_agents) throw Error(ErrorKind::ParseError, "[graph]: field 'agents' is required");
  for (const auto& [edge, line] : edges) {
    if (edge.a >= cfg.agents || edge.b >= cfg.agents)
      throw Error(ErrorKind::DanglingAgentReference, "line " + std::to_string(line) + ": edge " +
                                                         std::to_string(edge.a) + "-" + std::to_string(edge.b));
    cfg.edges.push_back(edge);
  }

  ConverterParams proto;
  std::vector<std::pair<std::size_t, std::optional<double>>> converters;
  bool have_buses = false;
  Fields{}
      .on("buses",
          [&](const Entry& e) {
            cfg.plant.n_buses = index(e);
            have_buses = true;
          })
      .on("tracking_tau", [&](const Entry& e) { cfg.plant.tracking_tau = number(e); })
      .on("i_max", [&](const Entry& e) { proto.i_max = number(e); })
      .on("i_min", [&](const Entry& e) { proto.i_min = number(e); })
      .on("v_min", [&](const Entry& e) { proto.v_min = number(e); })
      .on("v_max", [&](const Entry& e) { proto.v_max = number(e); })
      .on("rating", [&](const Entry& e) { proto.rating = number(e); })
      .on("l_se", [&](const Entry& e) { proto.l_se = number(e); })
      .on("c_dc", [&](const Entry& e) { proto.c_dc = number(e); })
      .on("sigma_w", [&](const Entry& e) { cfg.measurement.sigma_w = number(e); })
      .on("sigma_v", [&](const Entry& e) { cfg.measurement.sigma_v = number(e); })
      .on("converter",
          [&](const Entry& e) {
            const auto v = numbers(e, 1, 2);
            converters.emplace_back(to_index(e, split_words(e.value)[0]),
                                    v.size() == 2 ? std::optional<double>(v[1]) : std::nullopt);
          })
      .on("line",
          [&](const Entry& e) {
            const auto v = numbers(e, 3, 3);
            const auto w = split_words(e.value);
            cfg.plant.lines.push_back({to_index(e, w[0]), to_index(e, w[1]), v[2]});
          })
      .on("load",
          [&](const Entry& e) {
            const auto v = numbers(e, 3, 3);
            cfg.plant.loads.push_back({v[0], to_index(e, split_words(e.value)[1]), v[2]});
          })
      .run(*section("plant"));
  if (!have_buses) throw Error(ErrorKind::ParseError, "[plant]: field 'buses' is required");
  for (const auto& [bus, i_max] : converters) {
    ConverterParams c = proto;
    c.bus = bus;
    if (i_max) c.i_max = *i_max;
    cfg.plant.converters.push_back(c);
  }
  cfg.plant.dt = dt;
  if (cfg.plant.converters.size() != cfg.agents)
    throw Error(ErrorKind::DanglingAgentReference, "[plant]: " + std::to_string(cfg.plant.converters.size()) +
                                                       " converters for " + std::to_string(cfg.agents) + " agents");

  auto& ctl = cfg.controller;
  ctl.v_min = proto.v_min;
  ctl.v_max = proto.v_max;
  if (auto s = section("controller"))
    Fields{}
        .on("v_ref", [&](const Entry& e) { ctl.v_ref = number(e); })
        .on("i_ref", [&](const Entry& e) { ctl.i_ref = number(e); })
        .on("kp_h1", [&](const Entry& e) { ctl.kp_h1 = number(e); })
        .on("ki_h1", [&](const Entry& e) { ctl.ki_h1 = number(e); })
        .on("kp_h2", [&](const Entry& e) { ctl.kp_h2 = number(e); })
        .on("ki_h2", [&](const Entry& e) { ctl.ki_h2 = number(e); })
        .on("c", [&](const Entry& e) { ctl.c = number(e); })
        .on("comm_delay_tau", [&](const Entry& e) { ctl.comm_delay_tau = number(e); })
        .run(*s);
  ctl.i_max.clear();
  for (const auto& c : cfg.plant.converters) ctl.i_max.push_back(c.i_max);

  if (auto s = section("ledger"))
    Fields{}
        .on("enabled", [&](const Entry& e) { cfg.ledger.enabled = to_bool(e); })
        .on("contract", [&](const Entry& e) { cfg.ledger.contract = to_bool(e); })
        .on("mining_delay", [&](const Entry& e) { cfg.ledger.mining_delay = number(e); })
        .run(*s);

  if (auto s = section("detection"))
    Fields{}
        .on("enabled", [&](const Entry& e) { cfg.detection_enabled = to_bool(e); })
        .on("h", [&](const Entry& e) { cfg.detection.h = number(e); })
        .on("c", [&](const Entry& e) { cfg.detection.c = number(e); })
        .on("upsilon1", [&](const Entry& e) { cfg.detection.upsilon1 = number(e); })
        .on("upsilon2", [&](const Entry& e) { cfg.detection.upsilon2 = number(e); })
        .on("debounce", [&](const Entry& e) { cfg.detection.debounce = index(e); })
        .on("clear_window", [&](const Entry& e) { cfg.detection.clear_window = number(e); })
        .run(*s);

  if (auto s = section("selfheal"))
    Fields{}
        .on("enabled", [&](const Entry& e) { cfg.selfheal.enabled = to_bool(e); })
        .on("window", [&](const Entry& e) { cfg.selfheal.window = number(e); })
        .on("event_threshold", [&](const Entry& e) { cfg.selfheal.event_threshold = number(e); })
        .run(*s);

  cfg.predictor.t_loop = ctl.ki_h1 > 0.0 ? ctl.kp_h1 / ctl.ki_h1 : cfg.predictor.t_loop;
  if (auto s = section("predictor"))
    Fields{}
        .on("enabled", [&](const Entry& e) { cfg.predictor.enabled = to_bool(e); })
        .on("d", [&](const Entry& e) { cfg.predictor.d = index(e); })
        .on("b", [&](const Entry& e) { cfg.predictor.b = index(e); })
        .on("alpha", [&](const Entry& e) { cfg.predictor.alpha = number(e); })
        .on("t_loop", [&](const Entry& e) { cfg.predictor.t_loop = number(e); })
        .on("k1", [&](const Entry& e) { cfg.predictor.k1 = number(e); })
        .on("k2", [&](const Entry& e) { cfg.predictor.k2 = number(e); })
        .on("deadband", [&](const Entry& e) { cfg.predictor.deadband = number(e); })
        .run(*s);

  for (const Section* s : attack_sections) {
    AttackSpec a;
    bool have_kind = false;
    Fields{}
        .on("kind",
            [&](const Entry& e) {
              a.kind = parse_attack_kind(e.value);
              have_kind = true;
            })
        .on("signal",
            [&](const Entry& e) {
              if (e.value == "voltage") a.signal = SignalKind::Voltage;
              else if (e.value == "current") a.signal = SignalKind::Current;
              else throw field_error(e, "expected voltage or current");
            })
        .on("targets",
            [&](const Entry& e) {
              for (const auto& w : split_words(e.value)) {
                const auto k = to_index(e, w);
                if (k >= cfg.agents)
                  throw Error(ErrorKind::DanglingAgentReference,
                              "line " + std::to_string(e.line) + ": target " + std::to_string(k));
                a.targets.push_back(k);
              }
            })
        .on("links",
            [&](const Entry& e) {
              for (const auto& w : split_words(e.value)) {
                const auto dash = w.find('-');
                if (dash == std::string::npos) throw field_error(e, "links are written a-b");
                const Link l{to_index(e, w.substr(0, dash)), to_index(e, w.substr(dash + 1))};
                if (l.first >= cfg.agents || l.second >= cfg.agents)
                  throw Error(ErrorKind::DanglingAgentReference, "line " + std::to_string(e.line) + ": link " + w);
                a.links.push_back(l);
              }
            })
        .on("start", [&](const Entry& e) { a.start = number(e); })
        .on("stop", [&](const Entry& e) { a.stop = number(e); })
        .on("magnitude", [&](const Entry& e) { a.magnitude = number(e); })
        .on("zeta", [&](const Entry& e) { a.zeta = number(e); })
        .on("vector", [&](const Entry& e) { a.vector = numbers(e, 1, 1024); })
        .on("accept", [&](const Entry& e) { a.accept = to_bool(e); })
        .on("suppress_self_report", [&](const Entry& e) { a.suppress_self_report = to_bool(e); })
        .run(*s);
    if (!have_kind)
      throw Error(ErrorKind::ParseError, "line " + std::to_string(s->line) + ": [attack] needs field 'kind'");
    if (a.kind == AttackKind::Fdi) a.zeta = 0.0;
    cfg.attacks.push_back(std::move(a));
  }

  if (auto s = section("output"))
    Fields{}.on("plots", [&](const Entry& e) { cfg.plots = to_bool(e); }).run(*s);

  // Semantic validation.
  cfg.graph = build_graph(cfg.agents, cfg.edges);
  cfg.plant.validate();
  cfg.measurement.seed = cfg.sim.seed;
  cfg.measurement.validate();
  ctl.validate(cfg.agents);
  cfg.detection.validate();
  cfg.selfheal.validate();
  cfg.predictor.validate();
  for (const auto& a : cfg.attacks) a.validate(cfg.agents);
  if (!(cfg.sim.t_end > 0.0)) throw Error(ErrorKind::InvalidParams, "t_end must be > 0");
  const double ratio = cfg.sim.comm_period / dt;
  if (!(cfg.sim.comm_period > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0)
    throw Error(ErrorKind::InvalidParams, "comm_period must be a positive multiple of dt");
  if (!(cfg.ledger.mining_delay >= 0.0)) throw Error(ErrorKind::InvalidParams, "mining_delay must be >= 0");
  return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.stem().string());
}

}  // namespace mgsim
