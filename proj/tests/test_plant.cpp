#include <gtest/gtest.h>

#include <cmath>

#include "mgsim/plant.hpp"

using namespace mgsim;

namespace {

ConverterParams converter(std::size_t bus) {
  ConverterParams c;
  c.bus = bus;
  c.v_min = 42.0;
  c.v_max = 54.0;
  return c;
}

PlantParams single_converter(double line_r, double load_r) {
  PlantParams p;
  p.n_buses = 2;
  p.converters = {converter(0)};
  p.lines = {{0, 1, line_r}};
  p.loads = {{0.0, 1, load_r}};
  return p;
}

}  // namespace

TEST(Network, SymmetricPairSharesEqually) {
  PlantParams p;
  p.n_buses = 3;
  p.converters = {converter(0), converter(1)};
  p.lines = {{0, 2, 0.5}, {1, 2, 0.5}};
  p.loads = {{0.0, 2, 4.0}};
  p.validate();
  const Vector v{48.0, 48.0};
  const auto sol = solve_network(p, v, p.load_conductance(0.0));
  EXPECT_NEAR(sol.i_out[0], sol.i_out[1], 1e-9);
  EXPECT_GT(sol.i_out[0], 0.0);
}

TEST(Network, OhmsLawSingleConverter) {
  const auto p = single_converter(0.2, 4.6);
  p.validate();
  const Vector v{48.0};
  const auto sol = solve_network(p, v, p.load_conductance(0.0));
  EXPECT_NEAR(sol.i_out[0], 10.0, 1e-9);
  EXPECT_NEAR(sol.bus_v[1], 46.0, 1e-9);
}

TEST(Network, NonPositiveResistanceRejected) {
  for (double r : {0.0, -1.0}) {
    const auto p = single_converter(r, 4.6);
    try {
      p.validate();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidParams);
    }
  }
}

TEST(Network, CurrentLimitPinsConverter) {
  auto p = single_converter(0.2, 1.0);
  p.converters[0].i_max = 20.0;
  const Vector v{48.0};
  const auto sol = solve_network(p, v, p.load_conductance(0.0));
  EXPECT_NEAR(sol.i_out[0], 20.0, 1e-9);
  EXPECT_TRUE(sol.saturated[0]);
}

TEST(Network, LoadStepTakesEffectAtItsTime) {
  auto p = single_converter(0.2, 4.6);
  p.loads.push_back({2.0, 1, 2.3});
  EXPECT_NEAR(p.load_conductance(1.999)[1], 1.0 / 4.6, 1e-15);
  EXPECT_NEAR(p.load_conductance(2.0)[1], 1.0 / 2.3, 1e-15);
}

TEST(PlantStep, FirstOrderLagEuler) {
  auto p = single_converter(0.2, 4.6);
  p.converters[0].v_min = 270.0;
  p.converters[0].v_max = 360.0;
  p.tracking_tau = 5e-3;
  p.dt = 1e-4;
  const auto s0 = initial_state(p, Vector{300.0});
  NoiseStream noise(1);
  const auto s1 = step_plant(s0, Vector{315.0}, p, MeasurementModel{}, noise);
  EXPECT_NEAR(s1.v_out[0], 300.3, 1e-9);
  EXPECT_NEAR(s1.t, 1e-4, 1e-15);
}

TEST(PlantStep, FixedPointWhenReferenceEqualsState) {
  const auto p = single_converter(0.2, 4.6);
  const auto s0 = initial_state(p, Vector{48.0});
  NoiseStream noise(1);
  const auto s1 = step_plant(s0, Vector{48.0}, p, MeasurementModel{}, noise);
  EXPECT_EQ(s1.v_out, s0.v_out);
  EXPECT_EQ(s1.i_out, s0.i_out);
}

TEST(Measurement, NoiselessIsExact) {
  const auto p = single_converter(0.2, 4.6);
  const auto s = initial_state(p, Vector{48.0});
  NoiseStream stream(3);
  const auto y = measure(s, p, MeasurementModel{}, stream);
  ASSERT_EQ(y.size(), 2u);
  EXPECT_EQ(y[0], s.terminal_v(p, 0));
  EXPECT_EQ(y[1], s.i_out[0]);
}

TEST(Measurement, SameSeedSameSequence) {
  const auto p = single_converter(0.2, 4.6);
  const auto s = initial_state(p, Vector{48.0});
  MeasurementModel m;
  m.sigma_w = 0.5;
  NoiseStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(measure(s, p, m, a), measure(s, p, m, b));
}

TEST(Measurement, NoiseStandardDeviation) {
  NoiseStream stream(2024);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = stream.gaussian(0.1);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(sd, 0.1, 0.002);
}

TEST(Equilibrium, SourcesHoldAverageAtReferenceAndShareProportionally) {
  PlantParams p;
  p.n_buses = 3;
  p.converters = {converter(0), converter(1)};
  p.converters[1].i_max = 14.0;
  p.lines = {{0, 2, 0.3}, {1, 2, 0.6}};
  p.loads = {{0.0, 2, 3.0}};
  const auto g = p.load_conductance(0.0);
  const auto v = equilibrium_sources(p, g, 48.0);
  EXPECT_NEAR((v[0] + v[1]) / 2.0, 48.0, 1e-9);
  const auto sol = solve_network(p, v, g);
  EXPECT_NEAR(sol.i_out[0] / p.converters[0].i_max, sol.i_out[1] / p.converters[1].i_max, 1e-9);
}
