#pragma once

// Deterministic co-simulation loop. The plant integrates at dt; every
// communication period one round runs: deliver channel traffic, measure,
// update controllers (with local prediction), publish payloads through
// attacks and self-heal routing, validate and vote blocks, commit, advance
// detection flags and heal sessions.

#include <chrono>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "mgsim/attacks.hpp"
#include "mgsim/control.hpp"
#include "mgsim/detection.hpp"
#include "mgsim/ledger.hpp"
#include "mgsim/plant.hpp"
#include "mgsim/predictor.hpp"
#include "mgsim/scenario.hpp"
#include "mgsim/selfheal.hpp"
#include "mgsim/topology.hpp"

namespace mgsim {

enum class HealPhase { None = 0, Quarantine = 1, Resumed = 2 };

struct AgentSample {
  double v_out = 0.0;
  double i_out = 0.0;
  double i_pu = 0.0;
  double v_bar = 0.0;
  double delta = 0.0;
  double dv1 = 0.0;
  double dv2 = 0.0;
  double v_star = 0.0;
  double dm1 = 0.0;
  double dm2 = 0.0;
  bool flag = false;
  HealPhase heal = HealPhase::None;
  double e_down = 0.0;
  bool trigger = false;
};

struct Sample {
  double t = 0.0;
  std::vector<AgentSample> agents;
};

struct FlagEvent {
  double t = 0.0;
  AgentId agent = 0;
  bool raised = true;
  bool voltage = false;
  bool current = false;
};

struct ResumeEvent {
  double t = 0.0;
  AgentId agent = 0;
  AgentId donor = 0;
  std::size_t hops = 0;
};

struct LinkTraffic {
  std::size_t sent = 0;
  std::size_t exposed = 0;  // sent while a loss fault was active
  std::size_t dropped = 0;
};

struct RunReport {
  std::size_t rounds = 0;
  std::size_t committed = 0;
  std::size_t rejected = 0;
  std::size_t forged_commits = 0;  // committed while an honest majority rejected
  std::vector<FlagEvent> flags;
  std::vector<HealEvent> heals;
  std::vector<ResumeEvent> resumes;
  std::vector<std::string> notes;
  bool all_nodes_compromised = false;
  std::map<Link, LinkTraffic> traffic;  // keyed (min, max)
  std::size_t control_steps = 0;
  std::size_t triggers = 0;
  std::size_t raw_leaks = 0;  // raw payloads of quarantined agents reaching an inbox
  double max_vbar_error = 0.0;  // final round, V
  double max_abs_delta = 0.0;   // final round, pu
  double wall_seconds = 0.0;
};

struct RunResult {
  std::vector<Sample> series;
  std::vector<Replica> replicas;
  RunReport report;
};

class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg) : cfg_(std::move(cfg)) {}

  RunResult run();

 private:
  struct Session {
    AgentId donor = 0;
    std::size_t hops = 1;
    double resume_at = 0.0;
    bool voltage = false;
    bool current = false;
    HealPhase phase = HealPhase::Quarantine;
    bool resume_logged = false;
    EventHold hold_i;
    EventHold hold_dv1;
    EventHold hold_vbar;
    Payload last_trusted;
  };

  struct Pending {
    std::int64_t due = 0;
    AgentId producer = 0;
    std::uint64_t round = 0;
    double t = 0.0;
    Payload published;
    Payload raw;       // the attacked payload, evaluated for flags while healing
    bool healed = false;
  };

  void init();
  void round(std::int64_t step, std::uint64_t r);
  void deliver_due(std::int64_t step);
  void update_controllers(double t, const Vector& y);
  Payload reconstruction(AgentId k, const Payload& attacked) const;
  MetricCheck check_with(AgentId producer, const Payload& p);
  void record_dm(const MetricCheck& m);
  void broadcast(AgentId from, const Payload& p, double t, std::int64_t step, bool reconstructed);
  void process_block(const Pending& tx, double t, std::int64_t step);
  void heal_phase(double t, const std::vector<FlagTransition>& transitions);
  void open_session(AgentId k, double t);
  Sample sample(double t, const Vector& y) const;

  ScenarioConfig cfg_;
  std::size_t n_ = 0;
  std::int64_t steps_per_round_ = 10;
  double tc_ = 1e-3;
  AttackDistribution ad_;
  std::vector<std::optional<Vector>> stealth_;

  PlantState plant_;
  Vector v_cmd_;
  NoiseStream process_noise_;
  NoiseStream sensor_noise_;
  std::mt19937_64 channel_rng_;

  std::vector<AgentControlState> ctl_;
  std::vector<Inbox> inbox_;
  std::vector<OwnHistory> own_;
  std::vector<Predictor> pred_;
  std::vector<PredictorOutput> pred_out_;

  KeyRing keys_;
  std::vector<Replica> replicas_;
  std::vector<std::optional<std::uint64_t>> last_round_;
  std::vector<Payload> view_;  // latest committed payload per producer
  std::vector<Payload> published_;
  std::vector<Payload> raw_;

  std::vector<FlagState> flags_;
  std::vector<bool> violated_;
  std::vector<bool> evaluated_;
  std::vector<bool> saw_voltage_;
  std::vector<bool> saw_current_;
  Vector dm1_round_;
  Vector dm2_round_;
  Vector dm1_prev_;
  Vector dm2_prev_;
  std::vector<bool> committed_now_;
  std::vector<std::optional<Session>> sessions_;

  std::multimap<std::tuple<std::int64_t, AgentId, AgentId, std::uint64_t>, InboxEntry> in_flight_;
  std::uint64_t seq_ = 0;
  std::vector<Pending> pending_;

  RunResult out_;
};

inline void Simulation::init() {
  n_ = cfg_.agents;
  tc_ = cfg_.sim.comm_period;
  steps_per_round_ = static_cast<std::int64_t>(std::llround(tc_ / cfg_.plant.dt));
  ad_ = attack_distribution_matrix(cfg_.graph);
  for (std::size_t s = 0; s < cfg_.attacks.size(); ++s) {
    const auto& a = cfg_.attacks[s];
    if (a.kind != AttackKind::Stealth) {
      stealth_.emplace_back();
      continue;
    }
    auto v = stealth_injection_vector(a, ad_);
    if (!v) {
      out_.report.notes.push_back("attack " + std::to_string(s) + ": no stealth vector exists for this graph");
    } else {
      out_.report.notes.push_back("attack " + std::to_string(s) + ": injection in null space of W = " +
                                  (is_stealth(ad_, *v) ? "true" : "false"));
    }
    stealth_.push_back(std::move(v));
  }

  const auto& p = cfg_.plant;
  const auto& c = cfg_.controller;
  const Vector g0 = p.load_conductance(0.0);
  const Vector sources = cfg_.sim.cold_start ? Vector(n_, c.v_ref) : equilibrium_sources(p, g0, c.v_ref);
  plant_ = initial_state(p, sources);
  v_cmd_ = sources;
  process_noise_ = NoiseStream(cfg_.sim.seed);
  sensor_noise_ = NoiseStream(cfg_.sim.seed ^ 0x9e3779b97f4a7c15ULL);
  channel_rng_.seed(cfg_.sim.seed ^ 0xc2b2ae3d27d4eb4fULL);
  keys_ = KeyRing(0x6d6773696dULL ^ cfg_.sim.seed);

  ctl_.assign(n_, {});
  inbox_.assign(n_, {});
  own_.assign(n_, {});
  pred_.assign(n_, Predictor(cfg_.predictor, c.v_ref));
  pred_out_.assign(n_, {});
  replicas_.assign(cfg_.ledger.enabled ? n_ : 0, Replica{});
  last_round_.assign(n_, std::nullopt);
  view_.assign(n_, {});
  flags_.assign(n_, FlagState(cfg_.detection));
  violated_.assign(n_, false);
  evaluated_.assign(n_, false);
  saw_voltage_.assign(n_, false);
  saw_current_.assign(n_, false);
  dm1_round_.assign(n_, 0.0);
  dm2_round_.assign(n_, 0.0);
  dm1_prev_.assign(n_, 0.0);
  dm2_prev_.assign(n_, 0.0);
  committed_now_.assign(n_, false);
  sessions_.assign(n_, std::nullopt);

  for (AgentId k = 0; k < n_; ++k) {
    auto& s = ctl_[k];
    const double v = plant_.terminal_v(p, k);
    if (!cfg_.sim.cold_start) {
      s.observer_integral = c.v_ref - v;
      s.integ2 = sources[k] - c.v_ref;
    }
    s.v_bar = v + s.observer_integral;
    s.v_star = sources[k];
    const double i_pu = plant_.i_out[k] / c.i_max[k];
    own_[k].record({0.0, s.v_bar, i_pu, false});
    view_[k] = {v, plant_.i_out[k], i_pu, s.v_bar, 0.0, 0.0, 0.0, 0.0};
  }
  for (AgentId k = 0; k < n_; ++k)
    for (AgentId j : cfg_.graph.neighbors(k)) inbox_[k].deliver(j, {0.0, view_[j].v_bar, view_[j].i_pu, false});
  published_ = view_;
  raw_ = view_;
}

inline void Simulation::deliver_due(std::int64_t step) {
  while (!in_flight_.empty() && std::get<0>(in_flight_.begin()->first) <= step) {
    const auto& [key, entry] = *in_flight_.begin();
    inbox_[std::get<1>(key)].deliver(std::get<2>(key), entry);
    in_flight_.erase(in_flight_.begin());
  }
}

inline void Simulation::update_controllers(double t, const Vector& y) {
  const auto& c = cfg_.controller;
  const auto& g = cfg_.graph;
  std::vector<DelayedPair> pv;
  std::vector<DelayedPair> pi;
  for (AgentId k = 0; k < n_; ++k) {
    pv.clear();
    pi.clear();
    for (AgentId j : g.neighbors(k)) {
      const auto e = inbox_[k].read(j, t, c.comm_delay_tau);
      if (!e) continue;
      const auto& mine = own_[k].at(e->stamp);
      pv.push_back({j, e->v_bar, mine.v_bar});
      pi.push_back({j, e->i_pu, mine.i_pu});
    }
    auto& s = ctl_[k];
    const double u_v = consensus_input(g, k, pv);
    const double u_i = current_mismatch(pi, g, k, c.c);
    const double e_volt = (c.v_ref - s.v_bar) / c.v_ref;
    pred_out_[k] = pred_[k].step(e_volt, u_v, u_i, t);
    if (cfg_.predictor.enabled) {
      ++out_.report.control_steps;
      if (pred_out_[k].triggered) ++out_.report.triggers;
    }
    observer_update(s, y[k], pred_out_[k].u_v, tc_);
    s.delta = u_i;
    voltage_corrections(s, tc_, c, pred_out_[k].u_i);
    const auto ref = local_reference(s.dv1, s.dv2, c);
    s.v_star = ref.v_star;
    s.clamped = ref.clamped;
    v_cmd_[k] = ref.v_star;
    own_[k].record({t, s.v_bar, y[n_ + k] / c.i_max[k], false});
    inbox_[k].trim(t, c.comm_delay_tau);
  }
}

inline Payload Simulation::reconstruction(AgentId k, const Payload& attacked) const {
  const auto& s = *sessions_[k];
  // Without a donor block in the previous round, the last trusted own value stands in.
  const bool fresh = committed_now_[s.donor];
  Payload p = attacked;
  const double i_max = cfg_.controller.i_max[k];
  if (s.current) {
    p.i_amp = reconstruct_signal(SignalKind::Current, fresh ? s.hold_i.held() : std::nullopt, s.last_trusted.i_amp,
                                 i_max);
    p.i_pu = p.i_amp / i_max;
  }
  if (s.voltage) {
    p.dv1 = reconstruct_signal(SignalKind::Voltage, fresh ? s.hold_dv1.held() : std::nullopt, s.last_trusted.dv1, i_max);
    p.v_bar =
        reconstruct_signal(SignalKind::Voltage, fresh ? s.hold_vbar.held() : std::nullopt, s.last_trusted.v_bar, i_max);
  }
  return p;
}

inline MetricCheck Simulation::check_with(AgentId producer, const Payload& p) {
  Vector dv1(n_);
  Vector ipu(n_);
  for (AgentId k = 0; k < n_; ++k) {
    dv1[k] = view_[k].dv1;
    ipu[k] = view_[k].i_pu;
  }
  dv1[producer] = p.dv1;
  ipu[producer] = p.i_pu;
  return neighborhood_check(dv1, ipu, cfg_.graph, producer, cfg_.detection);
}

inline void Simulation::record_dm(const MetricCheck& m) {
  for (AgentId k = 0; k < n_; ++k) {
    if (!std::isnan(m.dm1[k])) dm1_round_[k] = std::max(dm1_round_[k], m.dm1[k]);
    if (!std::isnan(m.dm2[k])) dm2_round_[k] = std::max(dm2_round_[k], m.dm2[k]);
  }
}

inline void Simulation::broadcast(AgentId from, const Payload& p, double t, std::int64_t step, bool reconstructed) {
  for (AgentId to : cfg_.graph.neighbors(from)) {
    const auto f = channel_faults(from, to, t, cfg_.attacks);
    std::vector<Message<InboxEntry>> q{{from, to, t, {t, p.v_bar, p.i_pu, reconstructed}}};
    q = apply_channel_faults(std::move(q), f.loss_p, f.extra_delay, channel_rng_);
    auto& traffic = out_.report.traffic[{std::min(from, to), std::max(from, to)}];
    ++traffic.sent;
    if (f.loss_p > 0.0) ++traffic.exposed;
    if (q.empty()) {
      ++traffic.dropped;
      continue;
    }
    if (sessions_[from] && !reconstructed) ++out_.report.raw_leaks;
    const auto due = step + static_cast<std::int64_t>(std::llround((q[0].deliver_at - t) / cfg_.plant.dt));
    in_flight_.emplace(std::make_tuple(due, to, from, seq_++), q[0].body);
  }
}

inline void Simulation::process_block(const Pending& tx, double t, std::int64_t step) {
  const AgentId k = tx.producer;
  const bool detect = cfg_.detection_enabled;
  const bool contract = cfg_.ledger.contract && detect;

  // Flags follow the agent's own (possibly attacked) data even while a
  // reconstruction is published in its place.
  const MetricCheck raw_check = check_with(k, tx.raw);
  const MetricCheck pub_check = tx.healed ? check_with(k, tx.published) : raw_check;
  if (detect) {
    record_dm(raw_check);
    evaluated_[k] = true;
    violated_[k] = raw_check.violation();
    if (raw_check.voltage_violation) saw_voltage_[k] = true;
    if (raw_check.current_violation) saw_current_[k] = true;
  }
  const bool physics_bad = detect && pub_check.violation();

  bool committed = false;
  if (!cfg_.ledger.enabled) {
    committed = !(contract && physics_bad);
  } else {
    const Transaction trx = make_transaction(k, tx.round, tx.t, tx.published, keys_, last_round_[k]);
    last_round_[k] = tx.round;
    const Block block = seal_block({trx}, replicas_[k].tip().hash, replicas_[k].next_height(), k, tx.t,
                                   cfg_.ledger.mining_delay);
    auto contract_fn = [&](const Block&) { return contract && physics_bad; };
    std::vector<Verdict> verdicts;
    for (AgentId v = 0; v < n_; ++v) verdicts.push_back(validate_block(v, block, replicas_[v], keys_, contract_fn));
    const bool honest = commit_round(verdicts, n_).committed;
    for (const auto& a : cfg_.attacks)
      if (a.kind == AttackKind::ForgeVotes && a.active(t)) verdicts = forge_votes(std::move(verdicts), a.targets, a.accept);
    const auto outcome = commit_round(verdicts, n_);
    if (outcome.committed) {
      for (auto& r : replicas_) {
        if (r.check_structure(block, keys_) != Reason::Ok || contract_fn(block)) continue;
        r.append(block);
        committed = true;
      }
    }
    if (committed && !honest) ++out_.report.forged_commits;
  }

  if (committed) {
    ++out_.report.committed;
    view_[k] = tx.published;
    committed_now_[k] = true;
    broadcast(k, tx.published, tx.t, step, tx.healed);
  } else {
    ++out_.report.rejected;
  }

  if (tx.healed && sessions_[k]) {
    auto& s = *sessions_[k];
    if (committed && !s.resume_logged) {
      s.resume_logged = true;
      out_.report.resumes.push_back({t, k, s.donor, s.hops});
    } else if (!committed) {
      s.phase = HealPhase::Quarantine;
      s.resume_at = resume_time(t, cfg_.selfheal.window, s.hops);
    }
  }
}

inline void Simulation::open_session(AgentId k, double t) {
  std::vector<bool> flagged(n_);
  for (AgentId j = 0; j < n_; ++j) flagged[j] = flags_[j].flagged();
  AgentId donor = 0;
  try {
    donor = select_donor(k, flagged, cfg_.graph);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::AllNodesCompromised) throw;
    out_.report.all_nodes_compromised = true;
    out_.report.notes.push_back(std::string(e.what()) + " at t=" + std::to_string(t));
    return;
  }
  Session s{donor,
            cfg_.graph.hops_from(donor)[k],
            0.0,
            saw_voltage_[k],
            saw_current_[k],
            HealPhase::Quarantine,
            false,
            EventHold(cfg_.selfheal.event_threshold),
            EventHold(cfg_.selfheal.event_threshold),
            EventHold(cfg_.selfheal.event_threshold),
            view_[k]};
  s.resume_at = resume_time(t, cfg_.selfheal.window, s.hops);
  const double held = s.current ? view_[donor].i_pu : view_[donor].dv1;
  s.hold_i.offer(view_[donor].i_pu, t);
  s.hold_dv1.offer(view_[donor].dv1, t);
  s.hold_vbar.offer(view_[donor].v_bar, t);
  out_.report.heals.push_back({k, s.current ? SignalKind::Current : SignalKind::Voltage, t, donor,
                               s.current ? held * cfg_.controller.i_max[k] : held, s.resume_at, s.hops});
  sessions_[k] = std::move(s);
}

inline void Simulation::heal_phase(double t, const std::vector<FlagTransition>& transitions) {
  for (AgentId k = 0; k < n_; ++k) {
    if (transitions[k] == FlagTransition::Raised) {
      out_.report.flags.push_back({t, k, true, saw_voltage_[k], saw_current_[k]});
    } else if (transitions[k] == FlagTransition::Cleared) {
      out_.report.flags.push_back({t, k, false, saw_voltage_[k], saw_current_[k]});
      saw_voltage_[k] = saw_current_[k] = false;
      sessions_[k].reset();
    }
  }
  if (!cfg_.selfheal.enabled) return;
  for (AgentId k = 0; k < n_; ++k)
    if (transitions[k] == FlagTransition::Raised) open_session(k, t);
  for (AgentId k = 0; k < n_; ++k) {
    if (!sessions_[k]) continue;
    auto& s = *sessions_[k];
    s.voltage = s.voltage || saw_voltage_[k];
    s.current = s.current || saw_current_[k];
    if (flags_[s.donor].flagged()) {
      sessions_[k].reset();
      open_session(k, t);
      continue;
    }
    if (committed_now_[s.donor]) {
      s.hold_i.offer(view_[s.donor].i_pu, t);
      s.hold_dv1.offer(view_[s.donor].dv1, t);
      s.hold_vbar.offer(view_[s.donor].v_bar, t);
    }
  }
}

inline Sample Simulation::sample(double t, const Vector& y) const {
  Sample row{t, std::vector<AgentSample>(n_)};
  for (AgentId k = 0; k < n_; ++k) {
    const auto& s = ctl_[k];
    auto& a = row.agents[k];
    a.v_out = y[k];
    a.i_out = y[n_ + k];
    a.i_pu = y[n_ + k] / cfg_.controller.i_max[k];
    a.v_bar = s.v_bar;
    a.delta = s.delta;
    a.dv1 = s.dv1;
    a.dv2 = s.dv2;
    a.v_star = s.v_star;
    a.dm1 = dm1_round_[k];
    a.dm2 = dm2_round_[k];
    a.flag = flags_[k].flagged();
    a.heal = sessions_[k] ? sessions_[k]->phase : HealPhase::None;
    a.e_down = pred_[k].e_down();
    a.trigger = pred_out_[k].triggered;
  }
  return row;
}

inline void Simulation::round(std::int64_t step, std::uint64_t r) {
  const double t = static_cast<double>(step) * cfg_.plant.dt;
  const auto& c = cfg_.controller;
  deliver_due(step);
  const Vector y = measure(plant_, cfg_.plant, cfg_.measurement, sensor_noise_);
  update_controllers(t, y);

  std::fill(dm1_round_.begin(), dm1_round_.end(), 0.0);
  std::fill(dm2_round_.begin(), dm2_round_.end(), 0.0);
  std::fill(evaluated_.begin(), evaluated_.end(), false);
  std::fill(violated_.begin(), violated_.end(), false);

  const auto delay_steps = static_cast<std::int64_t>(std::llround(cfg_.ledger.mining_delay / cfg_.plant.dt));
  for (AgentId k = 0; k < n_; ++k) {
    const auto& s = ctl_[k];
    const Payload raw{y[k], y[n_ + k], y[n_ + k] / c.i_max[k], s.v_bar, s.dv1, s.delta, dm1_prev_[k], dm2_prev_[k]};
    const Payload attacked = apply_signal_attacks(raw, k, t, c.i_max[k], cfg_.attacks, stealth_);
    raw_[k] = attacked;
    if (sessions_[k] && sessions_[k]->phase == HealPhase::Quarantine && t >= sessions_[k]->resume_at - 1e-9)
      sessions_[k]->phase = HealPhase::Resumed;
    if (!sessions_[k]) {
      published_[k] = attacked;
      pending_.push_back({step + delay_steps, k, r, t, attacked, attacked, false});
      continue;
    }
    published_[k] = reconstruction(k, attacked);
    if (sessions_[k]->phase == HealPhase::Resumed) {
      pending_.push_back({step + delay_steps, k, r, t, published_[k], attacked, true});
      continue;
    }
    // Quarantined: the reconstruction goes straight to the neighbors and the
    // raw data is only evaluated.
    broadcast(k, published_[k], t, step, true);
    if (cfg_.detection_enabled) {
      const auto m = check_with(k, attacked);
      record_dm(m);
      evaluated_[k] = true;
      violated_[k] = m.violation();
      if (m.voltage_violation) saw_voltage_[k] = true;
      if (m.current_violation) saw_current_[k] = true;
    }
  }

  std::fill(committed_now_.begin(), committed_now_.end(), false);
  std::stable_sort(pending_.begin(), pending_.end(),
                   [](const Pending& a, const Pending& b) { return std::tie(a.due, a.producer) < std::tie(b.due, b.producer); });
  std::size_t done = 0;
  for (; done < pending_.size() && pending_[done].due <= step; ++done) process_block(pending_[done], t, step);
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(done));

  std::vector<FlagTransition> transitions(n_, FlagTransition::None);
  if (cfg_.detection_enabled && cfg_.ledger.contract)
    for (AgentId k = 0; k < n_; ++k)
      if (evaluated_[k]) transitions[k] = flags_[k].update(violated_[k], t);
  heal_phase(t, transitions);

  dm1_prev_ = dm1_round_;
  dm2_prev_ = dm2_round_;
  out_.series.push_back(sample(t, y));
  ++out_.report.rounds;
}

inline RunResult Simulation::run() {
  const auto wall0 = std::chrono::steady_clock::now();
  init();
  const auto total = static_cast<std::int64_t>(std::llround(cfg_.sim.t_end / cfg_.plant.dt));
  out_.series.reserve(static_cast<std::size_t>(total / steps_per_round_ + 1));
  for (std::int64_t step = 0; step <= total; ++step) {
    if (step % steps_per_round_ == 0) round(step, static_cast<std::uint64_t>(step / steps_per_round_));
    if (step < total) plant_ = step_plant(plant_, v_cmd_, cfg_.plant, cfg_.measurement, process_noise_);
  }
  const auto& c = cfg_.controller;
  for (AgentId k = 0; k < n_; ++k) {
    out_.report.max_vbar_error = std::max(out_.report.max_vbar_error, std::abs(ctl_[k].v_bar - c.v_ref));
    out_.report.max_abs_delta = std::max(out_.report.max_abs_delta, std::abs(ctl_[k].delta));
  }
  out_.replicas = std::move(replicas_);
  out_.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return std::move(out_);
}

inline RunResult run_simulation(const ScenarioConfig& cfg) { return Simulation(cfg).run(); }

// Largest relative deviation of per-unit currents from their mean.
inline double sharing_deviation(const Sample& s) {
  double mean = 0.0;
  for (const auto& a : s.agents) mean += a.i_pu;
  mean /= static_cast<double>(s.agents.size());
  double dev = 0.0;
  for (const auto& a : s.agents) dev = std::max(dev, std::abs(a.i_pu - mean));
  return std::abs(mean) > 1e-12 ? dev / std::abs(mean) : dev;
}

// Largest |v_out - v_ref| / v_ref over agents and the samples in [from, to].
inline double voltage_deviation(const std::vector<Sample>& series, double v_ref, double from = 0.0,
                                double to = 1e300) {
  double dev = 0.0;
  for (const auto& s : series) {
    if (s.t < from || s.t > to) continue;
    for (const auto& a : s.agents) dev = std::max(dev, std::abs(a.v_out - v_ref) / v_ref);
  }
  return dev;
}

inline const Sample& sample_at(const std::vector<Sample>& series, double t) {
  auto it = std::lower_bound(series.begin(), series.end(), t - 1e-9,
                             [](const Sample& s, double x) { return s.t < x; });
  if (it == series.end()) return series.back();
  return *it;
}

}  // namespace mgsim
