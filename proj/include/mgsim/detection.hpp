#pragma once

// Physics-informed detection metrics and the persistence state machine that
// turns threshold crossings into misbehavior flags.

#include <algorithm>
#include <limits>
#include <vector>

#include "mgsim/core.hpp"
#include "mgsim/topology.hpp"

namespace mgsim {

struct DetectionParams {
  double h = 2.5;             // voltage metric gain
  double c = 1.4;             // current metric gain
  double upsilon1 = 0.025;
  double upsilon2 = 0.035;
  std::size_t debounce = 3;   // consecutive violating rounds before a flag
  double clear_window = 0.15; // s of clean rounds before a flag clears

  void validate() const {
    if (!(h > 0.0 && c > 0.0)) throw Error(ErrorKind::InvalidParams, "detection gains must be > 0");
    if (!(upsilon1 > 0.0 && upsilon2 > 0.0)) throw Error(ErrorKind::InvalidParams, "thresholds must be > 0");
    if (debounce == 0) throw Error(ErrorKind::InvalidParams, "debounce must be >= 1");
    if (!(clear_window >= 0.0)) throw Error(ErrorKind::InvalidParams, "clear window must be >= 0");
  }
};

// gain * [sum_j a_kj (x_j - x_k)] * [sum_j a_kj (x_j + x_k)]
inline double dm_product(std::span<const double> x, const GraphTopology& g, AgentId k, double gain) {
  double diff = 0.0;
  double sum = 0.0;
  for (AgentId j : g.neighbors(k)) {
    const double a = g.weight(k, j);
    diff += a * (x[j] - x[k]);
    sum += a * (x[j] + x[k]);
  }
  return gain * diff * sum;
}

inline double dm_voltage(std::span<const double> dv1, const GraphTopology& g, AgentId k, double h) {
  return dm_product(dv1, g, k, h);
}

inline double dm_current(std::span<const double> i_ref_pu, const GraphTopology& g, AgentId k, double c) {
  return dm_product(i_ref_pu, g, k, c);
}

struct MetricCheck {
  Vector dm1;  // per agent, NaN where not evaluated
  Vector dm2;
  bool voltage_violation = false;
  bool current_violation = false;
  bool violation() const { return voltage_violation || current_violation; }
};

// Evaluates both metrics for `producer` and each of its neighbors on a view of
// the latest values. A producer's block is only as good as the neighborhood
// it leaves behind, since the metric at k mixes k's value with its neighbors'.
inline MetricCheck neighborhood_check(std::span<const double> dv1, std::span<const double> i_pu,
                                      const GraphTopology& g, AgentId producer, const DetectionParams& p) {
  const std::size_t n = g.size();
  MetricCheck m{Vector(n, std::numeric_limits<double>::quiet_NaN()),
                Vector(n, std::numeric_limits<double>::quiet_NaN())};
  auto eval = [&](AgentId k) {
    m.dm1[k] = dm_voltage(dv1, g, k, p.h);
    m.dm2[k] = dm_current(i_pu, g, k, p.c);
    if (m.dm1[k] > p.upsilon1) m.voltage_violation = true;
    if (m.dm2[k] > p.upsilon2) m.current_violation = true;
  };
  eval(producer);
  for (AgentId j : g.neighbors(producer)) eval(j);
  return m;
}

enum class FlagTransition { None, Raised, Cleared };

// Debounced misbehavior flag for one agent.
class FlagState {
 public:
  FlagState() = default;
  explicit FlagState(const DetectionParams& p) : debounce_(p.debounce), clear_window_(p.clear_window) {}

  FlagTransition update(bool violation, double t) {
    if (violation) {
      ++consecutive_;
      last_violation_ = t;
      if (!flagged_ && consecutive_ >= debounce_) {
        flagged_ = true;
        return FlagTransition::Raised;
      }
      return FlagTransition::None;
    }
    consecutive_ = 0;
    if (flagged_ && t - last_violation_ >= clear_window_ - 1e-9) {
      flagged_ = false;
      return FlagTransition::Cleared;
    }
    return FlagTransition::None;
  }

  bool flagged() const noexcept { return flagged_; }
  std::size_t consecutive() const noexcept { return consecutive_; }

 private:
  std::size_t debounce_ = 3;
  double clear_window_ = 0.15;
  std::size_t consecutive_ = 0;
  bool flagged_ = false;
  double last_violation_ = 0.0;
};

// Per-agent flags advanced together once per round.
inline std::vector<FlagTransition> evaluate_contract(std::vector<FlagState>& flags,
                                                     const std::vector<bool>& violations, double t) {
  if (flags.size() != violations.size()) throw Error(ErrorKind::DimensionMismatch, "flags vs violations");
  std::vector<FlagTransition> out(flags.size());
  for (std::size_t k = 0; k < flags.size(); ++k) out[k] = flags[k].update(violations[k], t);
  return out;
}

}  // namespace mgsim
