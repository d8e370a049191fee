#pragma once

// Event-driven recovery of a flagged agent's published signal from the
// nearest trustworthy agent.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "mgsim/attacks.hpp"
#include "mgsim/core.hpp"
#include "mgsim/topology.hpp"

namespace mgsim {

struct SelfHealParams {
  bool enabled = true;
  double window = 0.15;            // validation window per hop (s)
  double event_threshold = 0.01;   // relative donor change that starts a new hold

  void validate() const {
    if (!(window > 0.0)) throw Error(ErrorKind::InvalidParams, "heal window must be > 0");
    if (!(event_threshold >= 0.0)) throw Error(ErrorKind::InvalidParams, "event threshold must be >= 0");
  }
};

struct HealEvent {
  AgentId agent = 0;
  SignalKind signal = SignalKind::Current;
  double t_trigger = 0.0;
  AgentId donor = 0;
  double held_value = 0.0;
  double resume_at = 0.0;
  std::size_t hops = 0;
};

// Nearest unflagged agent by hop count, lowest id on ties.
inline AgentId select_donor(AgentId victim, const std::vector<bool>& flagged, const GraphTopology& g) {
  if (flagged.size() != g.size()) throw Error(ErrorKind::DimensionMismatch, "flag vector size");
  const auto hops = g.hops_from(victim);
  std::optional<AgentId> best;
  for (AgentId k = 0; k < g.size(); ++k) {
    if (k == victim || flagged[k]) continue;
    if (!best || hops[k] < hops[*best]) best = k;
  }
  if (!best) throw Error(ErrorKind::AllNodesCompromised, "no trustworthy agent left for " + std::to_string(victim));
  return *best;
}

// Current signals are carried in per unit and rescaled to the victim's
// rating; voltage signals are used as is. Without a donor sample this round,
// the victim's last trusted value stands in.
inline double reconstruct_signal(SignalKind signal, std::optional<double> donor_value,
                                 std::optional<double> last_trusted_own, double victim_rating) {
  if (donor_value) return signal == SignalKind::Current ? *donor_value * victim_rating : *donor_value;
  if (last_trusted_own) return *last_trusted_own;
  throw Error(ErrorKind::NoTrustedSource, "no donor sample and no trusted history");
}

// Zero-order hold that re-samples only when the source moves by more than a
// relative threshold.
class EventHold {
 public:
  explicit EventHold(double threshold = 0.01) : threshold_(threshold) {}

  // Returns true when this sample starts a new triggering instant.
  bool offer(double value, double t) {
    if (held_ && std::abs(value - *held_) <= threshold_ * std::max(std::abs(*held_), 1e-9)) return false;
    held_ = value;
    instants_.push_back(t);
    return true;
  }

  std::optional<double> held() const noexcept { return held_; }
  const std::vector<double>& instants() const noexcept { return instants_; }

 private:
  double threshold_;
  std::optional<double> held_;
  std::vector<double> instants_;
};

// Victims resume one validation window per hop from their donor, so agents
// farther from the trusted source re-enter later.
inline double resume_time(double t_trigger, double window, std::size_t hops) {
  return t_trigger + window * static_cast<double>(std::max<std::size_t>(hops, 1));
}

}  // namespace mgsim
