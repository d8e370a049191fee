#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "mgsim/topology.hpp"

using namespace mgsim;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

// Independent rank oracle.
std::size_t kernel_dim(const Matrix& m) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(to_eigen(m));
  lu.setThreshold(1e-10);
  return static_cast<std::size_t>(lu.dimensionOfKernel());
}

GraphTopology random_connected(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> w(0.1, 5.0);
  std::bernoulli_distribution extra(0.3);
  std::vector<Edge> edges;
  for (std::size_t k = 1; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> parent(0, k - 1);
    edges.push_back({parent(rng), k, w(rng)});
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      bool present = false;
      for (const auto& e : edges) present |= (e.a == i && e.b == j) || (e.a == j && e.b == i);
      if (!present && extra(rng)) edges.push_back({i, j, w(rng)});
    }
  return build_graph(n, edges);
}

}  // namespace

TEST(Laplacian, RingOfFour) {
  const auto g = ring_graph(4);
  const auto& l = g.laplacian();
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(l(k, k), 2.0);
    EXPECT_DOUBLE_EQ(l(k, (k + 1) % 4), -1.0);
    EXPECT_DOUBLE_EQ(l(k, (k + 3) % 4), -1.0);
    EXPECT_DOUBLE_EQ(l(k, (k + 2) % 4), 0.0);
  }
}

TEST(Laplacian, SingleEdge) {
  const auto g = build_graph(2, {{0, 1, 1.0}});
  EXPECT_EQ(g.laplacian(), Matrix::from_rows({{1, -1}, {-1, 1}}));
}

TEST(Laplacian, AsymmetricAdjacencyRejected) {
  Matrix a(2, 2);
  a(0, 1) = 1.0;
  try {
    build_graph(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AsymmetricAdjacency);
  }
}

TEST(Laplacian, DisconnectedRejected) {
  Matrix a(3, 3);
  a(0, 1) = a(1, 0) = 1.0;
  try {
    build_graph(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DisconnectedGraph);
  }
}

TEST(AttackDistribution, RingRowsAreThirds) {
  const auto ad = attack_distribution_matrix(ring_graph(4));
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(ad.w(k, k), 1.0 / 3, 1e-12);
    EXPECT_NEAR(ad.w(k, (k + 1) % 4), 1.0 / 3, 1e-12);
    EXPECT_NEAR(ad.w(k, (k + 3) % 4), 1.0 / 3, 1e-12);
    EXPECT_EQ(ad.w(k, (k + 2) % 4), 0.0);
  }
}

TEST(AttackDistribution, TwoNodeLineIsHalves) {
  const auto ad = attack_distribution_matrix(build_graph(2, {{0, 1, 1.0}}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(ad.w(i, j), 0.5, 1e-12);
}

TEST(AttackDistribution, CompleteGraphNullSpaceIsZeroSumPlane) {
  const auto ad = attack_distribution_matrix(complete_graph(4));
  EXPECT_EQ(kernel_dim(ad.w), 3u);
  ASSERT_EQ(ad.null_basis.size(), 3u);
  for (const auto& v : ad.null_basis) {
    EXPECT_LE(max_abs(ad.w * v), 1e-9);
    double s = 0.0;
    for (double x : v) s += x;
    EXPECT_NEAR(s, 0.0, 1e-9);
  }
}

TEST(AttackDistribution, RingOfFourHasTrivialNullSpace) {
  const auto ad = attack_distribution_matrix(ring_graph(4));
  EXPECT_EQ(kernel_dim(ad.w), 0u);
  EXPECT_TRUE(ad.null_basis.empty());
  EXPECT_FALSE(stealth_vector(ad, 15.0).has_value());
}

TEST(StealthVector, BalancedSetOnCompleteGraph) {
  const auto ad = attack_distribution_matrix(complete_graph(4));
  const Vector balanced{-15, 0, 15, 0};
  EXPECT_LE(max_abs(ad.w * balanced), 1e-9);
  EXPECT_TRUE(is_stealth(ad, balanced));
  const auto v = stealth_vector(ad, 15.0);
  ASSERT_TRUE(v.has_value());
  EXPECT_NEAR(max_abs(*v), 15.0, 1e-9);
  EXPECT_LE(max_abs(ad.w * *v), 1e-9);
}

TEST(StealthVector, ZeroVectorIsAlwaysInNullSpace) {
  for (const auto& g : {ring_graph(4), complete_graph(4), ring_graph(5), complete_graph(3)}) {
    const auto ad = attack_distribution_matrix(g);
    EXPECT_TRUE(is_stealth(ad, Vector(g.size(), 0.0)));
  }
}

TEST(NullSpace, MatchesRankOracleOnRandomGraphs) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 7;
    const auto g = random_connected(rng, n);
    const auto ad = attack_distribution_matrix(g);
    EXPECT_EQ(ad.null_basis.size(), kernel_dim(ad.w));
    for (const auto& v : ad.null_basis) EXPECT_LE(max_abs(ad.w * v), 1e-9);
  }
}

TEST(GraphProperty, LaplacianAnnihilatesOnesAndWIsRowStochastic) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 9;
    const auto g = random_connected(rng, n);
    const Vector ones(n, 1.0);
    EXPECT_LE(max_abs(g.laplacian() * ones), 1e-12);
    const auto ad = attack_distribution_matrix(g);
    for (double r : ad.w * ones) EXPECT_NEAR(r, 1.0, 1e-12);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(g.laplacian()(i, j), g.laplacian()(j, i));
  }
}
