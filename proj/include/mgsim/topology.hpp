#pragma once

// Cyber graph of the microgrid agents: Laplacian, attack-distribution matrix
// and the null space that stealth attack vectors live in.

#include <algorithm>
#include <numeric>
#include <optional>
#include <queue>
#include <tuple>
#include <vector>

#include "mgsim/core.hpp"

namespace mgsim {

struct Edge {
  AgentId a = 0;
  AgentId b = 0;
  double weight = 1.0;
};

class GraphTopology {
 public:
  std::size_t size() const noexcept { return n_; }
  const Matrix& adjacency() const noexcept { return adjacency_; }
  const Matrix& laplacian() const noexcept { return laplacian_; }
  const Vector& in_degree() const noexcept { return in_degree_; }
  const Vector& out_degree() const noexcept { return out_degree_; }
  double weight(AgentId k, AgentId j) const { return adjacency_(k, j); }

  // N_k, ascending.
  const std::vector<AgentId>& neighbors(AgentId k) const { return neighbors_[k]; }

  // Hop distances from `src` over nonzero edges (graph is connected).
  std::vector<std::size_t> hops_from(AgentId src) const {
    std::vector<std::size_t> dist(n_, n_ + 1);
    std::queue<AgentId> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
      AgentId u = q.front();
      q.pop();
      for (AgentId v : neighbors_[u]) {
        if (dist[v] > dist[u] + 1) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
      }
    }
    return dist;
  }

  bool operator==(const GraphTopology&) const = default;

 private:
  friend GraphTopology build_graph(const Matrix& adjacency);

  std::size_t n_ = 0;
  Matrix adjacency_;
  Matrix laplacian_;
  Vector in_degree_;
  Vector out_degree_;
  std::vector<std::vector<AgentId>> neighbors_;
};

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace detail

// Validates the adjacency and derives D_in, D_out and L = D_in - A.
inline GraphTopology build_graph(const Matrix& adjacency) {
  const std::size_t n = adjacency.rows();
  if (!adjacency.square() || n < 2)
    throw Error(ErrorKind::InvalidMatrix, "adjacency must be square with at least 2 agents");
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = adjacency(k, j);
      if (!std::isfinite(w)) throw Error(ErrorKind::InvalidMatrix, "non-finite weight");
      if (w < 0.0)
        throw Error(ErrorKind::NegativeWeight,
                    "a(" + std::to_string(k) + "," + std::to_string(j) + ") < 0");
    }
    if (adjacency(k, k) != 0.0)
      throw Error(ErrorKind::InvalidMatrix, "nonzero diagonal at " + std::to_string(k));
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = k + 1; j < n; ++j)
      if (adjacency(k, j) != adjacency(j, k))
        throw Error(ErrorKind::AsymmetricAdjacency,
                    "a(" + std::to_string(k) + "," + std::to_string(j) + ") != a(" +
                        std::to_string(j) + "," + std::to_string(k) + ")");

  detail::DisjointSets sets(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = k + 1; j < n; ++j)
      if (adjacency(k, j) > 0.0) sets.unite(k, j);
  for (std::size_t k = 1; k < n; ++k)
    if (sets.find(k) != sets.find(0))
      throw Error(ErrorKind::DisconnectedGraph,
                  "agent " + std::to_string(k) + " unreachable from agent 0");

  GraphTopology g;
  g.n_ = n;
  g.adjacency_ = adjacency;
  g.laplacian_ = Matrix(n, n);
  g.in_degree_.assign(n, 0.0);
  g.out_degree_.assign(n, 0.0);
  g.neighbors_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      g.in_degree_[k] += adjacency(k, j);
      g.out_degree_[k] += adjacency(j, k);
      if (adjacency(k, j) > 0.0) g.neighbors_[k].push_back(j);
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      g.laplacian_(k, j) = (k == j ? g.in_degree_[k] : 0.0) - adjacency(k, j);
  return g;
}

inline GraphTopology build_graph(std::size_t n, const std::vector<Edge>& edges) {
  Matrix a(n, n);
  for (const auto& e : edges) {
    if (e.a >= n || e.b >= n)
      throw Error(ErrorKind::DanglingAgentReference, "edge references agent beyond " +
                                                          std::to_string(n - 1));
    if (e.a == e.b) throw Error(ErrorKind::InvalidMatrix, "self-loop edge");
    a(e.a, e.b) = e.weight;
    a(e.b, e.a) = e.weight;
  }
  return build_graph(a);
}

inline GraphTopology ring_graph(std::size_t n, double weight = 1.0) {
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < n; ++k) edges.push_back({k, (k + 1) % n, weight});
  if (n == 2) edges.resize(1);
  return build_graph(n, edges);
}

inline GraphTopology complete_graph(std::size_t n, double weight = 1.0) {
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = k + 1; j < n; ++j) edges.push_back({k, j, weight});
  return build_graph(n, edges);
}

// Pivot tolerance of the rank-revealing elimination, relative to the largest
// entry of the matrix.
inline constexpr double kPivotTolerance = 1e-10;

// Null space basis by Gauss-Jordan elimination with full-column search and
// partial row pivoting. Returns one vector per free column, in column order.
inline std::vector<Vector> null_space(const Matrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  Matrix r = m;
  const double scale = std::max(1.0, [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s = std::max(s, max_abs(r.row(i)));
    return s;
  }());
  const double tol = kPivotTolerance * scale;

  std::vector<std::size_t> pivot_cols;
  std::size_t lead = 0;
  for (std::size_t c = 0; c < cols && lead < rows; ++c) {
    std::size_t best = lead;
    for (std::size_t i = lead + 1; i < rows; ++i)
      if (std::abs(r(i, c)) > std::abs(r(best, c))) best = i;
    if (std::abs(r(best, c)) <= tol) {
      for (std::size_t i = lead; i < rows; ++i) r(i, c) = 0.0;
      continue;
    }
    if (best != lead)
      for (std::size_t j = 0; j < cols; ++j) std::swap(r(best, j), r(lead, j));
    const double p = r(lead, c);
    for (std::size_t j = 0; j < cols; ++j) r(lead, j) /= p;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == lead || r(i, c) == 0.0) continue;
      const double f = r(i, c);
      for (std::size_t j = 0; j < cols; ++j) r(i, j) -= f * r(lead, j);
    }
    pivot_cols.push_back(c);
    ++lead;
  }

  std::vector<bool> is_pivot(cols, false);
  for (auto c : pivot_cols) is_pivot[c] = true;

  std::vector<Vector> basis;
  for (std::size_t free = 0; free < cols; ++free) {
    if (is_pivot[free]) continue;
    Vector v(cols, 0.0);
    v[free] = 1.0;
    for (std::size_t i = 0; i < pivot_cols.size(); ++i) v[pivot_cols[i]] = -r(i, free);
    basis.push_back(std::move(v));
  }
  return basis;
}

struct AttackDistribution {
  Matrix w;
  std::vector<Vector> null_basis;
};

// Row-stochastic W: 1/(|N_k|+1) on each neighbor, remainder on the diagonal.
inline AttackDistribution attack_distribution_matrix(const GraphTopology& g) {
  const std::size_t n = g.size();
  AttackDistribution ad{Matrix(n, n), {}};
  for (std::size_t k = 0; k < n; ++k) {
    const auto& nk = g.neighbors(k);
    const double share = 1.0 / static_cast<double>(nk.size() + 1);
    double off = 0.0;
    for (AgentId j : nk) {
      ad.w(k, j) = share;
      off += share;
    }
    ad.w(k, k) = 1.0 - off;
  }
  ad.null_basis = null_space(ad.w);
  return ad;
}

// True when ||W x||_inf <= 1e-9 * max(1, ||x||_inf).
inline bool is_stealth(const AttackDistribution& ad, std::span<const double> x) {
  return max_abs(ad.w * x) <= 1e-9 * std::max(1.0, max_abs(x));
}

// A null-space attack vector whose largest entry has absolute value
// `magnitude`, or nullopt when W has full rank.
inline std::optional<Vector> stealth_vector(const AttackDistribution& ad, double magnitude) {
  if (!(magnitude > 0.0))
    throw Error(ErrorKind::InvalidParams, "stealth magnitude must be positive");
  if (ad.null_basis.empty()) return std::nullopt;
  Vector v = ad.null_basis.front();
  const double m = max_abs(v);
  for (double& x : v) x *= magnitude / m;
  return v;
}

}  // namespace mgsim
