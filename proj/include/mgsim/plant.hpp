#pragma once

// Electrical layer: converters modeled as first-order reference trackers
// feeding an algebraic resistive network, plus the noisy measurement model.

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <vector>

#include "mgsim/core.hpp"

namespace mgsim {

struct Line {
  std::size_t a = 0;
  std::size_t b = 0;
  double resistance = 1.0;  // Ohm
};

struct ConverterParams {
  std::size_t bus = 0;
  double l_se = 3e-3;     // H, carried for reference; the lag model ignores it
  double c_dc = 250e-6;   // F, carried for reference
  double rating = 10e3;   // W
  double i_max = 28.0;    // A
  double i_min = 0.0;     // A
  double v_min = 270.0;   // V
  double v_max = 360.0;   // V
};

// Resistive load at a bus; `at` = 0 gives the initial value, later entries are
// instantaneous steps.
struct LoadStep {
  double at = 0.0;
  std::size_t bus = 0;
  double resistance = 0.0;  // Ohm; <= 0 or inf disconnects
};

struct PlantParams {
  std::size_t n_buses = 0;
  std::vector<Line> lines;
  std::vector<ConverterParams> converters;
  std::vector<LoadStep> loads;
  double tracking_tau = 5e-3;  // s
  double dt = 1e-4;            // s

  std::size_t agents() const noexcept { return converters.size(); }

  void validate() const {
    if (converters.empty()) throw Error(ErrorKind::InvalidParams, "no converters");
    for (const auto& l : lines) {
      if (!(l.resistance > 0.0) || !std::isfinite(l.resistance))
        throw Error(ErrorKind::InvalidParams, "line resistance must be > 0");
      if (l.a >= n_buses || l.b >= n_buses || l.a == l.b)
        throw Error(ErrorKind::InvalidParams, "line references invalid bus");
    }
    for (std::size_t k = 0; k < converters.size(); ++k) {
      const auto& c = converters[k];
      if (c.bus >= n_buses) throw Error(ErrorKind::InvalidParams, "converter bus out of range");
      for (std::size_t j = 0; j < k; ++j)
        if (converters[j].bus == c.bus)
          throw Error(ErrorKind::InvalidParams, "two converters on one bus");
      if (!(c.i_min <= c.i_max) || !(c.i_max > 0.0))
        throw Error(ErrorKind::InvalidParams, "converter current limits invalid");
      if (!(c.v_min < c.v_max)) throw Error(ErrorKind::InvalidParams, "v_min >= v_max");
    }
    for (const auto& s : loads)
      if (s.bus >= n_buses || s.at < 0.0)
        throw Error(ErrorKind::InvalidParams, "load step references invalid bus or time");
    if (!(dt > 0.0) || !(tracking_tau > 0.0))
      throw Error(ErrorKind::InvalidParams, "dt and tracking_tau must be positive");
    if (dt > tracking_tau / 5.0 * (1.0 + 1e-12))
      throw Error(ErrorKind::InvalidParams, "dt must not exceed tracking_tau / 5");
  }

  // Per-bus load conductance in effect at time t.
  Vector load_conductance(double t) const {
    Vector g(n_buses, 0.0);
    std::vector<const LoadStep*> steps;
    for (const auto& s : loads) steps.push_back(&s);
    std::stable_sort(steps.begin(), steps.end(),
                     [](const LoadStep* x, const LoadStep* y) { return x->at < y->at; });
    for (const auto* s : steps) {
      if (s->at > t) break;
      g[s->bus] = (s->resistance > 0.0 && std::isfinite(s->resistance)) ? 1.0 / s->resistance : 0.0;
    }
    return g;
  }
};

struct PlantState {
  Vector v_out;        // converter tracking state (V)
  Vector i_out;        // converter output current (A)
  Vector bus_v;        // every bus (V)
  std::vector<bool> saturated;
  double t = 0.0;

  double terminal_v(const PlantParams& p, AgentId k) const { return bus_v[p.converters[k].bus]; }
};

struct NetworkSolution {
  Vector bus_v;
  Vector i_out;
  std::vector<bool> saturated;
};

namespace detail {

inline Eigen::MatrixXd conductance_matrix(const PlantParams& p, std::span<const double> load_g) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p.n_buses, p.n_buses);
  for (const auto& l : p.lines) {
    const double y = 1.0 / l.resistance;
    g(l.a, l.a) += y;
    g(l.b, l.b) += y;
    g(l.a, l.b) -= y;
    g(l.b, l.a) -= y;
  }
  for (std::size_t b = 0; b < p.n_buses; ++b) g(b, b) += load_g[b];
  return g;
}

}  // namespace detail

// Nodal analysis of the resistive network. Converters act as ideal voltage
// sources unless their current would leave [i_min, i_max], in which case they
// are pinned to the limit as current sources (active-set iteration).
inline NetworkSolution solve_network(const PlantParams& p, std::span<const double> v_sources,
                                     std::span<const double> load_g) {
  const std::size_t n = p.agents();
  if (v_sources.size() != n || load_g.size() != p.n_buses)
    throw Error(ErrorKind::DimensionMismatch, "solve_network input sizes");
  if (!all_finite(v_sources)) throw Error(ErrorKind::NonFiniteState, "non-finite source voltage");

  const Eigen::MatrixXd g = detail::conductance_matrix(p, load_g);

  // 0 = voltage mode, +1 pinned at i_max, -1 pinned at i_min
  std::vector<int> mode(n, 0);
  std::vector<int> src_of_bus(p.n_buses, -1);
  for (std::size_t k = 0; k < n; ++k) src_of_bus[p.converters[k].bus] = static_cast<int>(k);

  NetworkSolution sol;
  for (std::size_t iter = 0; iter <= 2 * n + 1; ++iter) {
    std::vector<std::size_t> unknown;
    std::vector<int> pos(p.n_buses, -1);
    for (std::size_t b = 0; b < p.n_buses; ++b) {
      const int k = src_of_bus[b];
      if (k < 0 || mode[k] != 0) {
        pos[b] = static_cast<int>(unknown.size());
        unknown.push_back(b);
      }
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(p.n_buses);
    for (std::size_t k = 0; k < n; ++k)
      if (mode[k] == 0) v(p.converters[k].bus) = v_sources[k];

    if (!unknown.empty()) {
      const auto m = static_cast<Eigen::Index>(unknown.size());
      Eigen::MatrixXd guu(m, m);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto bi = unknown[i];
        for (Eigen::Index j = 0; j < m; ++j) guu(i, j) = g(bi, unknown[j]);
        for (std::size_t b = 0; b < p.n_buses; ++b)
          if (pos[b] < 0) rhs(i) -= g(bi, b) * v(b);
        const int k = src_of_bus[bi];
        if (k >= 0) rhs(i) += mode[k] > 0 ? p.converters[k].i_max : p.converters[k].i_min;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(guu);
      if (!lu.isInvertible())
        throw Error(ErrorKind::SingularNetwork, "network matrix is singular (isolated bus?)");
      const Eigen::VectorXd vu = lu.solve(rhs);
      for (Eigen::Index i = 0; i < m; ++i) v(unknown[i]) = vu(i);
    }

    const Eigen::VectorXd inj = g * v;
    sol.bus_v.assign(v.data(), v.data() + v.size());
    sol.i_out.assign(n, 0.0);
    sol.saturated.assign(n, false);
    bool changed = false;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& c = p.converters[k];
      const double i = inj(c.bus);
      if (mode[k] == 0) {
        sol.i_out[k] = i;
        if (i > c.i_max + 1e-12) {
          mode[k] = 1;
          changed = true;
        } else if (i < c.i_min - 1e-12) {
          mode[k] = -1;
          changed = true;
        }
      } else {
        sol.i_out[k] = mode[k] > 0 ? c.i_max : c.i_min;
        sol.saturated[k] = true;
        // Release when the source voltage would no longer drive past the limit.
        const double vt = v(c.bus);
        if ((mode[k] > 0 && vt > v_sources[k]) || (mode[k] < 0 && vt < v_sources[k])) {
          mode[k] = 0;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  if (!all_finite(sol.bus_v)) throw Error(ErrorKind::NonFiniteState, "network solution diverged");
  return sol;
}

// Source voltages giving equal per-unit currents with mean voltage v_ref.
// Used to start runs from the operating point rather than from rest.
inline Vector equilibrium_sources(const PlantParams& p, std::span<const double> load_g, double v_ref) {
  const std::size_t n = p.agents();
  PlantParams unlimited = p;
  for (auto& c : unlimited.converters) {
    c.i_max = 1e12;
    c.i_min = -1e12;
  }
  // Column k of the source-to-current map.
  Eigen::MatrixXd y(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    Vector e(n, 0.0);
    e[k] = 1.0;
    const auto s = solve_network(unlimited, e, load_g);
    for (std::size_t r = 0; r < n; ++r) y(r, k) = s.i_out[r];
  }
  Eigen::MatrixXd m(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k + 1 < n; ++k)
    m.row(k) = y.row(k) / p.converters[k].i_max - y.row(k + 1) / p.converters[k + 1].i_max;
  m.row(n - 1).setConstant(1.0 / static_cast<double>(n));
  rhs(n - 1) = v_ref;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible())
    throw Error(ErrorKind::SingularNetwork, "no proportional-sharing operating point");
  const Eigen::VectorXd v = lu.solve(rhs);
  return Vector(v.data(), v.data() + v.size());
}

// Seeded Gaussian stream. Identical seeds give identical sequences.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed = 0) : engine_(seed) {}

  double gaussian(double sigma) {
    // Always draw so the stream position does not depend on sigma.
    const double z = normal_(engine_);
    return sigma > 0.0 ? sigma * z : 0.0;
  }

  double uniform() { return uniform_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

struct MeasurementModel {
  Matrix h;  // empty means identity over [V_1..V_N, I_1..I_N]
  double sigma_w = 0.0;
  double sigma_v = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(sigma_w >= 0.0) || !(sigma_v >= 0.0))
      throw Error(ErrorKind::InvalidParams, "noise standard deviations must be >= 0");
  }
};

inline PlantState initial_state(const PlantParams& p, std::span<const double> v_sources) {
  PlantState s;
  s.v_out.assign(v_sources.begin(), v_sources.end());
  const auto sol = solve_network(p, s.v_out, p.load_conductance(0.0));
  s.bus_v = sol.bus_v;
  s.i_out = sol.i_out;
  s.saturated = sol.saturated;
  return s;
}

// One explicit-Euler step of dv/dt = (v_ref - v)/tau plus process noise,
// followed by the network solve.
inline PlantState step_plant(const PlantState& state, std::span<const double> v_ref,
                             const PlantParams& p, const MeasurementModel& noise,
                             NoiseStream& process) {
  const std::size_t n = p.agents();
  if (v_ref.size() != n) throw Error(ErrorKind::DimensionMismatch, "v_ref size");
  PlantState next = state;
  const double a = p.dt / p.tracking_tau;
  for (std::size_t k = 0; k < n; ++k)
    next.v_out[k] = state.v_out[k] + a * (v_ref[k] - state.v_out[k]) + process.gaussian(noise.sigma_v);
  next.t = state.t + p.dt;
  if (!all_finite(next.v_out))
    throw Error(ErrorKind::NonFiniteState, "converter state at t=" + std::to_string(next.t));
  const auto sol = solve_network(p, next.v_out, p.load_conductance(next.t));
  next.bus_v = sol.bus_v;
  next.i_out = sol.i_out;
  next.saturated = sol.saturated;
  return next;
}

// y = H x + w with x = [terminal V_1..V_N, I_1..I_N].
inline Vector measure(const PlantState& state, const PlantParams& p, const MeasurementModel& model,
                      NoiseStream& stream) {
  const std::size_t n = p.agents();
  Vector x(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = state.terminal_v(p, k);
    x[n + k] = state.i_out[k];
  }
  Vector y = model.h.rows() == 0 ? x : model.h * x;
  for (double& v : y) v += stream.gaussian(model.sigma_w);
  return y;
}

}  // namespace mgsim
