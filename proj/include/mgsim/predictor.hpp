#pragma once

// Local, model-free compensation for lost or late neighbor data. Each agent
// watches its own voltage-loop error and, when the consensus inputs stop
// explaining it, substitutes a held compensation term.

#include <array>
#include <cmath>
#include <deque>
#include <numeric>
#include <vector>

#include "mgsim/core.hpp"

namespace mgsim {

struct PredictorParams {
  bool enabled = false;
  std::size_t d = 4;   // decimation factor
  std::size_t b = 8;   // impulse-response length
  Vector h;            // weights, empty = rectangular 1/b
  double alpha = 1.2;
  double t_loop = 0.128;  // voltage loop time constant K_P / K_I (s)
  double k1 = 1.0;
  double k2 = 1.0;
  double deadband = 1e-6;  // pu added to the trigger bound

  Vector weights() const { return h.empty() ? Vector(b, 1.0 / static_cast<double>(b)) : h; }

  void validate() const {
    if (d < 1 || b < 1) throw Error(ErrorKind::InvalidParams, "decimation and window must be >= 1");
    if (!(alpha > 0.0)) throw Error(ErrorKind::InvalidParams, "alpha must be > 0");
    if (!(t_loop > 0.0)) throw Error(ErrorKind::InvalidParams, "loop time constant must be > 0");
    if (!(deadband >= 0.0)) throw Error(ErrorKind::InvalidParams, "deadband must be >= 0");
    if (!h.empty()) {
      if (h.size() != b) throw Error(ErrorKind::InvalidParams, "need one weight per window sample");
      if (std::abs(std::accumulate(h.begin(), h.end(), 0.0) - 1.0) > 1e-9)
        throw Error(ErrorKind::InvalidParams, "weights must sum to 1");
    }
  }
};

// Decimated weighted sums: out[n-1] = sum_b e[nD - 1 - b] h[b] for every
// n >= 1 with B <= nD <= len(e).
inline Vector downsample_error(std::span<const double> history, std::size_t d, std::size_t b,
                               std::span<const double> h) {
  if (d < 1 || b < 1) throw Error(ErrorKind::InvalidParams, "decimation and window must be >= 1");
  if (h.size() != b) throw Error(ErrorKind::InvalidParams, "need one weight per window sample");
  if (history.size() < b) throw Error(ErrorKind::InsufficientHistory, "need at least B samples");
  Vector out;
  for (std::size_t end = d; end <= history.size(); end += d) {
    if (end < b) continue;
    double acc = 0.0;
    for (std::size_t i = 0; i < b; ++i) acc += history[end - 1 - i] * h[i];
    out.push_back(acc);
  }
  return out;
}

using Pair = std::array<double, 2>;

inline double norm(const Pair& p) { return std::hypot(p[0], p[1]); }

// ||e_comp|| > alpha * exp(-elapsed / T) * ||e_volt * [1 1]|| + deadband
inline bool prediction_trigger(const Pair& e_comp, double e_volt, double alpha, double t_loop, double elapsed,
                               double deadband = 0.0) {
  const double bound = alpha * std::exp(-elapsed / t_loop) * std::sqrt(2.0) * std::abs(e_volt);
  return norm(e_comp) > bound + deadband;
}

// Candidate compensation pair: e_down broadcast to both loops minus the
// local inputs (voltage input normalized by V_ref, current input in pu).
inline Pair compensation_error(double e_down, const Pair& u_local_pu) {
  return {e_down - u_local_pu[0], e_down - u_local_pu[1]};
}

struct PredictorOutput {
  double u_v = 0.0;   // observer input, V/s
  double u_i = 0.0;   // mismatch input, pu
  bool triggered = false;
};

class Predictor {
 public:
  Predictor() = default;
  Predictor(const PredictorParams& p, double v_ref) : p_(p), w_(p.weights()), v_ref_(v_ref) {}

  // One control step. `e_volt` is the per-unit voltage error (V_ref - v_bar) / V_ref;
  // (u_v, u_i) are the consensus inputs computed from the inbox.
  PredictorOutput step(double e_volt, double u_v, double u_i, double t) {
    if (!p_.enabled) return {u_v, u_i, false};
    history_.push_back(e_volt);
    if (history_.size() > w_.size()) history_.pop_front();
    if (++count_ % p_.d == 0 && history_.size() == w_.size()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < w_.size(); ++i) acc += history_[history_.size() - 1 - i] * w_[i];
      e_down_ = acc;
    }
    const Pair candidate = compensation_error(e_down_, {u_v / v_ref_, u_i});
    const bool fire = prediction_trigger(candidate, e_volt, p_.alpha, p_.t_loop, t - last_trigger_, p_.deadband);
    if (fire) {
      e_comp_ = candidate;
      e_del_ = {p_.k1 * candidate[0], p_.k2 * candidate[1]};
      last_trigger_ = t;
      ++triggers_;
    }
    return {u_v + e_del_[0] * v_ref_, u_i + e_del_[1], fire};
  }

  double e_down() const noexcept { return e_down_; }
  const Pair& e_comp() const noexcept { return e_comp_; }
  const Pair& e_del() const noexcept { return e_del_; }
  std::size_t triggers() const noexcept { return triggers_; }

 private:
  PredictorParams p_;
  Vector w_;
  double v_ref_ = 1.0;
  std::deque<double> history_;
  std::size_t count_ = 0;
  double e_down_ = 0.0;
  Pair e_comp_{0.0, 0.0};
  Pair e_del_{0.0, 0.0};
  double last_trigger_ = 0.0;
  std::size_t triggers_ = 0;
};

// compensate() in its stateless form: apply held e_del to the local inputs.
inline PredictorOutput compensate(const Pair& e_del, double u_v, double u_i, double v_ref, bool enabled) {
  if (!enabled) return {u_v, u_i, false};
  return {u_v + e_del[0] * v_ref, u_i + e_del[1], false};
}

}  // namespace mgsim
