#pragma once

// Scenario-driven adversary: signal manipulations on the published payload,
// loss and delay on channels, and verdict overwrites on the vote.

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mgsim/core.hpp"
#include "mgsim/ledger.hpp"
#include "mgsim/topology.hpp"

namespace mgsim {

enum class AttackKind { Stealth, Fdi, Hijack, Dos, Delay, ForgeVotes };
enum class SignalKind { Voltage, Current };

inline AttackKind parse_attack_kind(const std::string& s) {
  if (s == "stealth") return AttackKind::Stealth;
  if (s == "fdi") return AttackKind::Fdi;
  if (s == "hijack") return AttackKind::Hijack;
  if (s == "dos") return AttackKind::Dos;
  if (s == "delay") return AttackKind::Delay;
  if (s == "forge_votes") return AttackKind::ForgeVotes;
  throw Error(ErrorKind::UnknownAttackKind, "'" + s + "'");
}

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::Stealth: return "stealth";
    case AttackKind::Fdi: return "fdi";
    case AttackKind::Hijack: return "hijack";
    case AttackKind::Dos: return "dos";
    case AttackKind::Delay: return "delay";
    case AttackKind::ForgeVotes: return "forge_votes";
  }
  return "?";
}

using Link = std::pair<AgentId, AgentId>;

struct AttackSpec {
  AttackKind kind = AttackKind::Fdi;
  SignalKind signal = SignalKind::Current;
  std::vector<AgentId> targets;  // agents (signal attacks) or controlled nodes (forge_votes)
  std::vector<Link> links;       // undirected; empty means every link (dos, delay)
  double start = 0.0;
  double stop = 1e300;
  double magnitude = 0.0;  // c_a in signal units, loss probability, or extra delay (s)
  double zeta = 1.0;
  Vector vector;           // stealth injection, one entry per agent; empty = derive from W
  bool accept = true;      // forge_votes desired decision
  bool suppress_self_report = false;

  bool active(double t) const { return t >= start && t < stop; }

  bool hits_link(AgentId a, AgentId b) const {
    if (links.empty()) return true;
    return std::any_of(links.begin(), links.end(), [&](const Link& l) {
      return (l.first == a && l.second == b) || (l.first == b && l.second == a);
    });
  }

  bool targets_agent(AgentId k) const { return std::find(targets.begin(), targets.end(), k) != targets.end(); }

  void validate(std::size_t agents) const {
    if (!(start < stop)) throw Error(ErrorKind::InvalidParams, "attack needs start < stop");
    if (zeta != 0.0 && zeta != 1.0) throw Error(ErrorKind::InvalidZeta, std::to_string(zeta));
    if (kind == AttackKind::Dos && !(magnitude >= 0.0 && magnitude <= 1.0))
      throw Error(ErrorKind::InvalidParams, "loss probability must be in [0,1]");
    if (kind == AttackKind::Delay && !(magnitude >= 0.0))
      throw Error(ErrorKind::InvalidParams, "extra delay must be >= 0");
    for (AgentId k : targets)
      if (k >= agents) throw Error(ErrorKind::DanglingAgentReference, "attack target " + std::to_string(k));
    for (const auto& [a, b] : links)
      if (a >= agents || b >= agents)
        throw Error(ErrorKind::DanglingAgentReference,
                    "attack link " + std::to_string(a) + "-" + std::to_string(b));
    if (kind == AttackKind::Stealth && !vector.empty() && vector.size() != agents)
      throw Error(ErrorKind::DimensionMismatch, "stealth vector needs one entry per agent");
  }
};

inline double inject_fdi(double x, double c_a) { return x + c_a; }

inline double inject_hijack(double x, double zeta, double c_a) {
  if (zeta != 0.0 && zeta != 1.0) throw Error(ErrorKind::InvalidZeta, std::to_string(zeta));
  return (1.0 - zeta) * x + c_a;
}

struct StealthInjection {
  Vector signals;
  bool stealth = false;  // injection lies in the null space of W
};

inline StealthInjection inject_stealth(std::span<const double> signals, std::span<const double> vec,
                                       const AttackDistribution& ad) {
  if (signals.size() != vec.size() || vec.size() != ad.w.rows())
    throw Error(ErrorKind::DimensionMismatch, "stealth vector size");
  StealthInjection out{Vector(signals.begin(), signals.end()), is_stealth(ad, vec)};
  for (std::size_t k = 0; k < vec.size(); ++k) out.signals[k] += vec[k];
  return out;
}

// The injection vector a stealth spec uses: the configured one, or the W null
// space vector scaled to the magnitude. nullopt when no null space exists.
inline std::optional<Vector> stealth_injection_vector(const AttackSpec& spec, const AttackDistribution& ad) {
  if (!spec.vector.empty()) return spec.vector;
  return stealth_vector(ad, spec.magnitude);
}

// Applies every active signal attack on `agent` to its outgoing payload, in
// declaration order. Voltage attacks move the published observer estimate and
// voltage correction together; current attacks move the amp and per-unit
// readings consistently.
inline Payload apply_signal_attacks(Payload p, AgentId agent, double t, double i_max,
                                    std::span<const AttackSpec> specs,
                                    std::span<const std::optional<Vector>> stealth_vectors) {
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto& spec = specs[s];
    if (!spec.active(t)) continue;
    double c = 0.0;
    double zeta = 0.0;
    switch (spec.kind) {
      case AttackKind::Fdi:
        if (!spec.targets_agent(agent)) continue;
        c = spec.magnitude;
        break;
      case AttackKind::Hijack:
        if (!spec.targets_agent(agent)) continue;
        c = spec.magnitude;
        zeta = spec.zeta;
        break;
      case AttackKind::Stealth:
        if (s >= stealth_vectors.size() || !stealth_vectors[s]) continue;
        c = (*stealth_vectors[s])[agent];
        break;
      default:
        continue;
    }
    if (spec.signal == SignalKind::Voltage) {
      p.v_bar = inject_hijack(p.v_bar, zeta, c);
      p.dv1 = inject_hijack(p.dv1, zeta, c);
    } else {
      p.i_amp = inject_hijack(p.i_amp, zeta, c);
      p.i_pu = p.i_amp / i_max;
    }
    if (spec.suppress_self_report) {
      p.dm1_prev = 0.0;
      p.dm2_prev = 0.0;
    }
  }
  return p;
}

// A message in flight on a directed channel.
template <class T>
struct Message {
  AgentId from = 0;
  AgentId to = 0;
  double deliver_at = 0.0;
  T body{};
};

struct ChannelFaults {
  double loss_p = 0.0;
  double extra_delay = 0.0;
};

// Accumulated loss probability and extra delay on the (from, to) link at t.
inline ChannelFaults channel_faults(AgentId from, AgentId to, double t, std::span<const AttackSpec> specs) {
  ChannelFaults f;
  double keep = 1.0;
  for (const auto& spec : specs) {
    if (!spec.active(t) || !spec.hits_link(from, to)) continue;
    if (spec.kind == AttackKind::Dos) keep *= 1.0 - spec.magnitude;
    if (spec.kind == AttackKind::Delay) f.extra_delay += spec.magnitude;
  }
  f.loss_p = 1.0 - keep;
  return f;
}

// Drops each message with probability loss_p and shifts survivors by
// extra_delay. One uniform draw per message keeps the stream position
// independent of the outcome.
template <class T, class Rng>
std::vector<Message<T>> apply_channel_faults(std::vector<Message<T>> queue, double loss_p, double extra_delay,
                                             Rng& rng) {
  if (!(loss_p >= 0.0 && loss_p <= 1.0)) throw Error(ErrorKind::InvalidParams, "loss probability");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Message<T>> out;
  out.reserve(queue.size());
  for (auto& m : queue) {
    if (loss_p > 0.0 && u(rng) < loss_p) continue;
    m.deliver_at += extra_delay;
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<Verdict> forge_votes(std::vector<Verdict> verdicts, std::span<const AgentId> controlled,
                                        bool accept) {
  for (auto& v : verdicts) {
    if (std::find(controlled.begin(), controlled.end(), v.voter) == controlled.end()) continue;
    v.decision = accept ? Decision::Accept : Decision::Reject;
    v.reason = accept ? Reason::Ok : Reason::PhysicsViolation;
  }
  return verdicts;
}

}  // namespace mgsim
