#pragma once

// Distributed secondary control: consensus voltage observer, per-unit current
// mismatch, the two PI voltage corrections and the local voltage reference.

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "mgsim/core.hpp"
#include "mgsim/topology.hpp"

namespace mgsim {

struct ControllerParams {
  double v_ref = 315.0;   // V
  double i_ref = 0.0;     // pu, nominal mismatch target
  double kp_h1 = 5.0;
  double ki_h1 = 100.0;
  double kp_h2 = 2.5;
  double ki_h2 = 0.05;
  double c = 1.4;               // coupling gain
  double comm_delay_tau = 0.0;  // s, nominal channel delay
  double v_min = 270.0;
  double v_max = 360.0;
  Vector i_max;                 // per agent (A)

  void validate(std::size_t agents) const {
    for (double g : {kp_h1, ki_h1, kp_h2, ki_h2, c})
      if (!(g >= 0.0)) throw Error(ErrorKind::InvalidParams, "controller gains must be >= 0");
    if (!(comm_delay_tau >= 0.0)) throw Error(ErrorKind::InvalidParams, "comm delay must be >= 0");
    if (!(v_min < v_ref && v_ref < v_max))
      throw Error(ErrorKind::InvalidParams, "need v_min < v_ref < v_max");
    if (i_max.size() != agents) throw Error(ErrorKind::InvalidParams, "i_max per agent required");
    for (double m : i_max)
      if (!(m > 0.0)) throw Error(ErrorKind::InvalidParams, "i_max must be > 0");
  }
};

// A neighbor value paired with the local value at the same timestamp, so the
// consensus terms compare like with like under delay.
struct DelayedPair {
  AgentId neighbor = 0;
  double remote = 0.0;
  double local = 0.0;
};

struct AgentControlState {
  double observer_integral = 0.0;  // the integral term of the observer (V)
  double v_bar = 0.0;
  double delta = 0.0;
  double dv1 = 0.0;
  double dv2 = 0.0;
  double integ1 = 0.0;  // K_I^{H1} * integral of (V_ref - v_bar), V
  double integ2 = 0.0;  // K_I^{H2} * integral of delta, V
  double v_star = 0.0;
  bool clamped = false;
};

// sum_j a_kj (x_j - x_k) over the supplied pairs.
inline double consensus_input(const GraphTopology& g, AgentId k, std::span<const DelayedPair> pairs) {
  double u = 0.0;
  for (const auto& p : pairs) u += g.weight(k, p.neighbor) * (p.remote - p.local);
  return u;
}

// Advances the observer by one explicit-Euler step with consensus input u
// (volts per second) and returns v_bar = V_k + integral.
inline double observer_update(AgentControlState& s, double local_v, double u, double dt) {
  s.observer_integral += u * dt;
  s.v_bar = local_v + s.observer_integral;
  return s.v_bar;
}

inline double observer_update(AgentControlState& s, double local_v, std::span<const DelayedPair> vbars,
                              const GraphTopology& g, AgentId k, double dt) {
  return observer_update(s, local_v, consensus_input(g, k, vbars), dt);
}

// delta_k = sum_j c a_kj (i_pu_j - i_pu_k), values delayed pairwise.
inline double current_mismatch(std::span<const DelayedPair> i_pu, const GraphTopology& g, AgentId k,
                               double c) {
  return c * consensus_input(g, k, i_pu);
}

struct Corrections {
  double dv1 = 0.0;
  double dv2 = 0.0;
};

// PI corrections with conditional integration: while the previous reference
// was clamped, an integrator only moves in the direction that leaves the clamp.
inline Corrections voltage_corrections(AgentControlState& s, double dt, const ControllerParams& p,
                                       double delta_input) {
  const double e1 = p.v_ref - s.v_bar;
  const double e2 = delta_input - p.i_ref;
  const double step1 = p.ki_h1 * e1 * dt;
  const double step2 = p.ki_h2 * e2 * dt;
  const bool high = s.clamped && s.v_star >= p.v_max;
  const bool low = s.clamped && s.v_star <= p.v_min;
  auto allowed = [&](double step) { return !(high && step > 0.0) && !(low && step < 0.0); };
  if (allowed(step1)) s.integ1 += step1;
  if (allowed(step2)) s.integ2 += step2;
  s.dv1 = p.kp_h1 * e1 + s.integ1;
  s.dv2 = p.kp_h2 * e2 + s.integ2;
  return {s.dv1, s.dv2};
}

inline Corrections voltage_corrections(AgentControlState& s, double dt, const ControllerParams& p) {
  return voltage_corrections(s, dt, p, s.delta);
}

struct Reference {
  double v_star = 0.0;
  bool clamped = false;
};

inline Reference local_reference(double dv1, double dv2, const ControllerParams& p) {
  const double raw = p.v_ref + dv1 + dv2;
  const double v = std::clamp(raw, p.v_min, p.v_max);
  return {v, v != raw};
}

// One sample of what an agent publishes for its neighbors' controllers.
struct InboxEntry {
  double stamp = 0.0;  // source time of the data (s)
  double v_bar = 0.0;
  double i_pu = 0.0;
  bool reconstructed = false;
};

// Timestamped per-neighbor buffers. Reads return the newest entry whose stamp
// is at most t - tau; with nothing new, the last held entry stays in effect.
class Inbox {
 public:
  void deliver(AgentId from, const InboxEntry& e) {
    auto& q = queues_[from];
    auto it = std::upper_bound(q.begin(), q.end(), e.stamp,
                               [](double s, const InboxEntry& x) { return s < x.stamp; });
    q.insert(it, e);
  }

  std::optional<InboxEntry> read(AgentId from, double t, double tau) const {
    auto found = queues_.find(from);
    if (found == queues_.end()) return std::nullopt;
    const auto& q = found->second;
    const double limit = t - tau + 1e-12;
    auto it = std::upper_bound(q.begin(), q.end(), limit,
                               [](double s, const InboxEntry& x) { return s < x.stamp; });
    if (it == q.begin()) return std::nullopt;
    return *std::prev(it);
  }

  // Drops entries that can no longer be the newest readable one.
  void trim(double t, double tau) {
    const double limit = t - tau + 1e-12;
    for (auto& [from, q] : queues_) {
      while (q.size() > 1 && q[1].stamp <= limit) q.pop_front();
    }
  }

 private:
  std::map<AgentId, std::deque<InboxEntry>> queues_;
};

// The agent's own published history, used to evaluate its side of each
// consensus term at the neighbor sample's timestamp.
class OwnHistory {
 public:
  void record(const InboxEntry& e) { entries_.push_back(e); }

  const InboxEntry& at(double stamp) const {
    auto it = std::upper_bound(entries_.begin(), entries_.end(), stamp + 1e-12,
                               [](double s, const InboxEntry& x) { return s < x.stamp; });
    if (it == entries_.begin()) return entries_.front();
    return *std::prev(it);
  }

  bool empty() const noexcept { return entries_.empty(); }
  const InboxEntry& latest() const { return entries_.back(); }

 private:
  std::vector<InboxEntry> entries_;
};

}  // namespace mgsim
