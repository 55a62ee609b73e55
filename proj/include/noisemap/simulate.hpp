#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "noisemap/basis.hpp"
#include "noisemap/error.hpp"
#include "noisemap/grid.hpp"

namespace noisemap {

// ---------------------------------------------------------------------------
// Synthetic ground truth

struct ProfileSpec
{
  std::size_t n_s = 6;
  std::size_t n_t = 600;
  double rho = 0.2283; ///< target coefficient fraction at 1 dBA
  double mean = 63.05;
  double std = 3.15;
  std::uint64_t seed = 1;

  void validate() const
  {
    if (n_s < 1 || n_t < 1)
      throw Error("bad_spec", "profile needs at least one cell");
    if (!(rho > 0.0 && rho <= 1.0))
      throw Error("bad_spec", "coefficient fraction must lie in (0, 1]");
    if (!(std >= 0.0) || !std::isfinite(mean))
      throw Error("bad_spec", "std must be non-negative and mean finite");
    if (rho * static_cast<double>(n_s * n_t) < 1.0 - 1e-12)
      throw Error("infeasible", "fraction times cell count is below one coefficient");
  }
};

struct SynthProfile
{
  NoiseProfile profile;
  double head = 0.0;  ///< amplitude of the geometric part
  double floor = 0.0; ///< constant magnitude added to every AC coefficient
  double decay = 1.0; ///< per-rank geometric ratio
  double achieved_rho = 0.0;
};

/**
 * Random profile whose 1 dBA compressibility lands on spec.rho.
 *
 * The DC term carries the mean. The N-1 AC magnitudes, ranked, are
 * c_r = A q^r + B: a geometric head that decays by 10x over the first 1% of
 * ranks plus a flat floor B. B is chosen so the energy left after keeping the
 * ceil(rho N) - 1 largest AC terms sits just under N (1 dBA)^2, and A then
 * fixes the total AC energy at N std^2. Signs and positions are random.
 */
inline SynthProfile synth_profile(const ProfileSpec& spec, const Lattice& lattice_in = {})
{
  spec.validate();
  Lattice lattice = lattice_in;
  lattice.n_s = spec.n_s;
  lattice.n_t = spec.n_t;
  const std::size_t n = spec.n_s * spec.n_t;
  const auto k = static_cast<std::size_t>(std::ceil(spec.rho * static_cast<double>(n) - 1e-9));
  const double nd = static_cast<double>(n);
  const double threshold = 0.9999 * nd; // (1 dBA)^2 per cell

  SynthProfile out;
  std::vector<double> coeff(n, 0.0);
  coeff[0] = spec.mean * std::sqrt(nd);
  std::mt19937_64 rng(spec.seed);

  if (n > 1 && spec.std > 0.0) {
    if (k > 1 && spec.std * spec.std * nd <= threshold)
      throw Error("infeasible", "std is too small for any coefficient beyond the mean to matter");
    const std::size_t l = n - 1;
    const std::size_t head = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.01 * nd)));
    const double q = std::pow(0.1, 1.0 / static_cast<double>(head));
    std::vector<double> g(l);
    for (std::size_t r = 0; r < l; ++r)
      g[r] = std::pow(q, static_cast<double>(r));
    const double sg = std::accumulate(g.begin(), g.end(), 0.0);
    const double sgg = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    const double energy = nd * spec.std * spec.std;
    const auto head_for = [&](double b) {
      const double qa = sgg, qb = 2.0 * b * sg, qc = static_cast<double>(l) * b * b - energy;
      if (qc > 0.0)
        return -1.0;
      return (-qb + std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
    };
    const auto tail = [&](double a, double b) {
      double s = 0.0;
      for (std::size_t r = k - 1; r < l; ++r) {
        const double c = a * g[r] + b;
        s += c * c;
      }
      return s;
    };
    double lo = 0.0, hi = spec.std * std::sqrt(nd / static_cast<double>(l));
    for (int it = 0; it < 200; ++it) {
      const double b = 0.5 * (lo + hi);
      const double a = head_for(b);
      if (a < 0.0 || tail(a, b) > threshold)
        hi = b;
      else
        lo = b;
    }
    out.floor = lo;
    out.head = head_for(lo);
    out.decay = q;

    std::vector<std::size_t> pos(l);
    std::iota(pos.begin(), pos.end(), 1);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::bernoulli_distribution sign(0.5);
    for (std::size_t r = 0; r < l; ++r)
      coeff[pos[r]] = (out.head * g[r] + out.floor) * (sign(rng) ? 1.0 : -1.0);
  }

  const DctBasis basis(n);
  out.profile = devectorize(basis.inverse(coeff), lattice);
  const auto rep = compressibility(out.profile);
  out.achieved_rho = rep.fractions.begin()->second;
  if (std::abs(out.achieved_rho - spec.rho) > 0.02 && !(k <= 1 && spec.std == 0.0))
    throw Error("infeasible", "cannot place the 1 dBA threshold at the requested fraction");
  return out;
}

// ---------------------------------------------------------------------------
// Mobility

enum class MoveState : std::uint8_t { Forward = 0, Stationary = 1, Backward = 2 };

struct MobilityParams
{
  using Matrix = std::array<std::array<double, 3>, 3>;
  /// rows: from Forward, Stationary, Backward
  Matrix transition{{{0.7, 0.2, 0.1}, {0.15, 0.7, 0.15}, {0.1, 0.2, 0.7}}};
  double v_min = 0.0;
  double v_max = 1.31; ///< m/s
  double period = 1.0; ///< seconds per step

  void validate() const
  {
    for (const auto& row : transition) {
      double s = 0.0;
      for (double p : row) {
        if (!(p >= 0.0))
          throw Error("bad_params", "transition probabilities must be non-negative");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9)
        throw Error("bad_params", "transition rows must sum to one");
    }
    if (!(v_min >= 0.0 && v_min <= v_max))
      throw Error("bad_params", "need 0 <= v_min <= v_max");
    if (!(period > 0.0))
      throw Error("bad_params", "step period must be positive");
  }
};

/// Left eigenvector of the transition matrix for eigenvalue 1, normalised to sum 1.
inline std::array<double, 3> stationary_distribution(const MobilityParams& p)
{
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      a(i, j) = p.transition[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] - (i == j ? 1.0 : 0.0);
  a.row(2).setOnes(); // replace one redundant balance equation by sum = 1
  const Eigen::Vector3d pi = a.fullPivLu().solve(Eigen::Vector3d(0, 0, 1));
  return {pi(0), pi(1), pi(2)};
}

struct AgentState
{
  MoveState state = MoveState::Stationary;
  double position = 0.0; ///< metres from the start of the road
};

/**
 * One step: draw the next Markov state, then move by V T with V uniform in
 * the speed range (sign from the state). The road is [0, length]; an agent
 * running past either end is reflected and turns around.
 */
template <class Rng>
AgentState step_agent(AgentState s, const MobilityParams& p, double length, Rng& rng)
{
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto& row = p.transition[static_cast<std::size_t>(s.state)];
  const double r = u01(rng);
  s.state = r < row[0] ? MoveState::Forward : (r < row[0] + row[1] ? MoveState::Stationary : MoveState::Backward);
  if (s.state == MoveState::Stationary)
    return s;
  const double v = p.v_min + (p.v_max - p.v_min) * u01(rng);
  double d = s.position + (s.state == MoveState::Forward ? v : -v) * p.period;
  if (d < 0.0) {
    d = -d;
    s.state = MoveState::Forward;
  } else if (d > length) {
    d = 2.0 * length - d;
    s.state = MoveState::Backward;
  }
  s.position = std::clamp(d, 0.0, length);
  return s;
}

struct AgentTrace
{
  std::vector<double> positions; ///< one per temporal cell
  std::vector<MoveState> states;
  std::vector<std::pair<std::size_t, std::size_t>> visited;     ///< (g, t)
  std::vector<std::pair<std::size_t, std::size_t>> contributed; ///< subset of visited
};

struct CampaignResult
{
  SampleSet samples;
  std::vector<AgentTrace> traces;
  std::size_t visited_cells = 0;     ///< |W| over all agents
  std::size_t contributed_cells = 0; ///< |W~| over all agents
};

/// Independent generator for agent `agent` derived from the master seed.
inline std::mt19937_64 agent_rng(std::uint64_t seed, std::size_t agent)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(agent), 0x5eedu};
  return std::mt19937_64(seq);
}

/**
 * Walks `n_agents` pedestrians over the road for n_t steps (one per temporal
 * cell). A visited cell (g, t) is contributed with probability p and then
 * carries the ground-truth value, optionally with Gaussian sensor noise.
 */
inline CampaignResult run_campaign(std::size_t n_agents, const NoiseProfile& truth,
                                   const MobilityParams& params, double p, std::uint64_t seed,
                                   double noise_std = 0.0)
{
  params.validate();
  if (!(p >= 0.0 && p <= 1.0))
    throw Error("bad_params", "contribution probability must lie in [0, 1]");
  const Lattice& l = truth.lattice;
  const double length = static_cast<double>(l.n_s) * l.omega;
  CampaignResult res;
  std::set<std::size_t> visited, contributed;
  std::map<std::size_t, double> values;
  for (std::size_t a = 0; a < n_agents; ++a) {
    auto rng = agent_rng(seed, a);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
    AgentState s;
    s.position = length * u01(rng);
    s.state = static_cast<MoveState>(std::min<int>(2, static_cast<int>(3.0 * u01(rng))));
    AgentTrace tr;
    for (std::size_t t = 1; t <= l.n_t; ++t) {
      if (t > 1)
        s = step_agent(s, params, length, rng);
      tr.positions.push_back(s.position);
      tr.states.push_back(s.state);
      const auto g = static_cast<std::size_t>(
        std::clamp(std::ceil(s.position / l.omega), 1.0, static_cast<double>(l.n_s)));
      tr.visited.emplace_back(g, t);
      visited.insert(l.index(g, t));
      if (u01(rng) < p) {
        tr.contributed.emplace_back(g, t);
        const std::size_t idx = l.index(g, t);
        contributed.insert(idx);
        double x = truth.values[idx];
        if (noise_std > 0.0)
          x += noise(rng);
        values.emplace(idx, x); // first contributor wins
      }
    }
    res.traces.push_back(std::move(tr));
  }
  std::vector<Sample> s;
  for (const auto& [idx, x] : values) {
    auto [g, t] = l.cell(idx);
    s.push_back({g, t, x});
  }
  res.samples = SampleSet(l, std::move(s));
  res.visited_cells = visited.size();
  res.contributed_cells = contributed.size();
  return res;
}

/// Observes a uniformly random subset of ceil((1 - missing_frac) N) cells.
inline SampleSet mask_uniform(const NoiseProfile& profile, double missing_frac, std::uint64_t seed)
{
  if (!(missing_frac >= 0.0 && missing_frac < 1.0))
    throw Error("bad_fraction", "missing fraction must lie in [0, 1)");
  if (!profile.complete())
    throw Error("undefined_cells", "mask source profile has missing cells");
  const std::size_t n = profile.values.size();
  const auto m = static_cast<std::size_t>(std::ceil((1.0 - missing_frac) * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates; only the first m positions are needed
  for (std::size_t i = 0; i < m && i + 1 < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }
  std::vector<Sample> s;
  s.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto [g, t] = profile.lattice.cell(perm[i]);
    s.push_back({g, t, profile.values[perm[i]]});
  }
  return SampleSet(profile.lattice, std::move(s));
}

/// Records that bin back onto exactly the sampled cells (cell centre, mid-interval).
inline std::vector<SampleRecord> records_from_samples(const SampleSet& s, const std::string& device_id = {})
{
  const Lattice& l = s.lattice();
  std::vector<geo::LatLon> centers;
  for (std::size_t g = 1; g <= l.n_s; ++g)
    centers.push_back(l.cell_center(g));
  std::vector<SampleRecord> out;
  out.reserve(s.size());
  for (const auto& e : s.entries()) {
    SampleRecord r;
    r.timestamp = l.cell_start_time(e.t) + 0.5 * l.period;
    r.lat = centers[e.g - 1].lat;
    r.lon = centers[e.g - 1].lon;
    r.laeq = e.x;
    r.device_id = device_id;
    out.push_back(r);
  }
  return out;
}

} // namespace noisemap
