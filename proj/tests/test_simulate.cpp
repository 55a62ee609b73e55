#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "noisemap/basis.hpp"
#include "noisemap/simulate.hpp"

using namespace noisemap;

namespace {

// stationary distribution by repeated multiplication, independent of the LU path
std::array<double, 3> power_iteration(const MobilityParams::Matrix& p)
{
  std::array<double, 3> pi = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int it = 0; it < 10000; ++it) {
    std::array<double, 3> nx{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        nx[j] += pi[i] * p[i][j];
    pi = nx;
  }
  return pi;
}

NoiseProfile flat(std::size_t n_s, std::size_t n_t, double v = 60.0)
{
  Lattice l;
  l.n_s = n_s;
  l.n_t = n_t;
  l.origin.precision_m = 10;
  NoiseProfile p(l);
  std::fill(p.values.begin(), p.values.end(), v);
  return p;
}

} // namespace

TEST(SynthProfile, ConstantWhenSingleCoefficient)
{
  ProfileSpec spec;
  spec.n_s = 3;
  spec.n_t = 10;
  spec.rho = 1.0 / 30.0;
  spec.std = 0.0;
  spec.mean = 58.5;
  const auto sp = synth_profile(spec);
  for (double v : sp.profile.values)
    EXPECT_NEAR(v, 58.5, 1e-9);
}

TEST(SynthProfile, HitsReferenceRows)
{
  struct Row { double mean, std, rho; };
  for (const Row r : {Row{63.05, 3.15, 0.2283}, Row{73.22, 6.79, 0.4391}}) {
    ProfileSpec spec;
    spec.mean = r.mean;
    spec.std = r.std;
    spec.rho = r.rho;
    spec.seed = 3;
    const auto sp = synth_profile(spec);
    const auto rep = compressibility(sp.profile, 1.0);
    EXPECT_NEAR(rep.fractions.at(1.0), r.rho, 0.02);
    EXPECT_NEAR(sp.profile.mean(), r.mean, 1e-9);
    EXPECT_NEAR(sp.profile.stddev(), r.std, 1e-6);
  }
}

TEST(SynthProfile, DeterministicPerSeed)
{
  ProfileSpec spec;
  spec.n_t = 100;
  spec.seed = 9;
  EXPECT_EQ(synth_profile(spec).profile.values, synth_profile(spec).profile.values);
  auto other = spec;
  other.seed = 10;
  EXPECT_NE(synth_profile(spec).profile.values, synth_profile(other).profile.values);
}

TEST(SynthProfile, RejectsBadSpecs)
{
  ProfileSpec s;
  s.rho = 0.0;
  EXPECT_THROW(synth_profile(s), Error);
  s.rho = 0.2;
  s.n_s = 2;
  s.n_t = 2;
  try {
    synth_profile(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "infeasible");
  }
}

TEST(Mobility, IdentityForwardIsMonotone)
{
  MobilityParams p;
  p.transition = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  std::mt19937_64 rng(1);
  AgentState s{MoveState::Forward, 0.0};
  double prev = 0.0;
  for (int i = 0; i < 1000; ++i) {
    s = step_agent(s, p, 1e6, rng);
    EXPECT_GE(s.position, prev);
    prev = s.position;
  }
}

TEST(Mobility, AllStationaryStaysPut)
{
  MobilityParams p;
  p.transition = {{{0, 1, 0}, {0, 1, 0}, {0, 1, 0}}};
  std::mt19937_64 rng(2);
  AgentState s{MoveState::Forward, 12.5};
  for (int i = 0; i < 100; ++i) {
    s = step_agent(s, p, 60.0, rng);
    EXPECT_EQ(s.position, 12.5);
  }
}

TEST(Mobility, ReflectsAtEnds)
{
  MobilityParams p;
  p.transition = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  p.v_min = p.v_max = 1.0;
  std::mt19937_64 rng(3);
  AgentState s{MoveState::Forward, 9.5};
  s = step_agent(s, p, 10.0, rng);
  EXPECT_DOUBLE_EQ(s.position, 9.5);
  EXPECT_EQ(s.state, MoveState::Backward);
}

TEST(Mobility, StationaryDistribution)
{
  MobilityParams p;
  const auto pi = stationary_distribution(p);
  const auto ref = power_iteration(p.transition);
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(pi[i], ref[i], 1e-12);
  EXPECT_NEAR(pi[1], 0.4, 1e-12);

  std::mt19937_64 rng(4);
  AgentState s;
  std::array<double, 3> freq{};
  const int steps = 100000;
  for (int i = 0; i < steps; ++i) {
    s = step_agent(s, p, 1e9, rng);
    freq[static_cast<std::size_t>(s.state)] += 1.0 / steps;
  }
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(freq[i], ref[i], 0.01);
}

TEST(Campaign, CoverageExtremes)
{
  const auto truth = flat(3, 20);
  const auto full = run_campaign(60, truth, {}, 1.0, 7);
  EXPECT_EQ(full.samples.size(), truth.values.size());
  EXPECT_EQ(full.samples.missing_fraction(), 0.0);
  const auto none = run_campaign(5, truth, {}, 0.0, 7);
  EXPECT_TRUE(none.samples.empty());
}

TEST(Campaign, ContributionFraction)
{
  const auto truth = flat(6, 3600);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = run_campaign(1, truth, {}, 0.5, seed);
    const double frac = double(r.contributed_cells) / double(r.visited_cells);
    EXPECT_NEAR(frac, 0.5, 0.05) << "seed " << seed;
  }
}

TEST(Campaign, TraceFeasibleAndDeterministic)
{
  const auto truth = flat(6, 500);
  MobilityParams p;
  const auto a = run_campaign(4, truth, p, 0.6, 42);
  const auto b = run_campaign(4, truth, p, 0.6, 42);
  EXPECT_EQ(a.samples.indices(), b.samples.indices());
  for (const auto& tr : a.traces) {
    for (std::size_t i = 1; i < tr.positions.size(); ++i)
      EXPECT_LE(std::abs(tr.positions[i] - tr.positions[i - 1]), p.v_max * p.period + 1e-12);
    for (auto [g, t] : tr.visited) {
      EXPECT_GE(g, 1u);
      EXPECT_LE(g, 6u);
    }
  }
}

TEST(Campaign, CoverageGrowsWithAgents)
{
  const auto truth = flat(6, 400);
  std::size_t prev = 0;
  for (std::size_t n : {1u, 4u, 16u}) {
    const auto r = run_campaign(n, truth, {}, 0.5, 1);
    EXPECT_GT(r.samples.size(), prev);
    prev = r.samples.size();
  }
}

TEST(Mask, CountsAndDeterminism)
{
  const auto p = flat(10, 10);
  EXPECT_EQ(mask_uniform(p, 0.0, 1).size(), 100u);
  EXPECT_EQ(mask_uniform(p, 0.9, 1).size(), 10u);
  EXPECT_EQ(mask_uniform(p, 0.4, 1).size(), 60u);
  EXPECT_EQ(mask_uniform(p, 0.3, 5).indices(), mask_uniform(p, 0.3, 5).indices());
  EXPECT_THROW(mask_uniform(p, 1.0, 1), Error);
}

TEST(Records, BinBackToSamples)
{
  Lattice l;
  l.n_s = 6;
  l.n_t = 30;
  l.origin = geo::latlon_to_mgrs(51.5074, -0.1278, 10);
  l.t0 = 1.7e9;
  NoiseProfile truth(l);
  for (std::size_t i = 0; i < truth.values.size(); ++i)
    truth.values[i] = 50.0 + double(i % 17);
  const auto s = mask_uniform(truth, 0.4, 8);
  const auto recs = records_from_samples(s, "dev");
  const auto b = bin_samples(recs, l);
  EXPECT_EQ(b.dropped, 0u);
  EXPECT_EQ(b.samples.indices(), s.indices());
  EXPECT_EQ(b.samples.values(), s.values());
}
