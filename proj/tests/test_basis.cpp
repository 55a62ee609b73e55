#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "noisemap/basis.hpp"

using namespace noisemap;

namespace {

// dense orthonormal DCT-II matrix, row k = basis function k
std::vector<std::vector<double>> dct_matrix(std::size_t n)
{
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::sqrt((k == 0 ? 1.0 : 2.0) / double(n));
    for (std::size_t i = 0; i < n; ++i)
      m[k][i] = w * std::cos(std::numbers::pi * (2.0 * double(i) + 1.0) * double(k) / (2.0 * double(n)));
  }
  return m;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double sd = 1.0)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v)
    x = nd(rng);
  return v;
}

Lattice lattice(std::size_t n_s, std::size_t n_t)
{
  Lattice l;
  l.n_s = n_s;
  l.n_t = n_t;
  l.origin.precision_m = 10;
  return l;
}

} // namespace

TEST(Dct, MatchesDenseMatrix)
{
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 17u, 64u, 100u, 511u}) {
    const auto m = dct_matrix(n);
    const auto x = random_vec(n, n);
    const auto v = DctBasis(n).forward(x);
    for (std::size_t k = 0; k < n; ++k) {
      double ref = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        ref += m[k][i] * x[i];
      ASSERT_NEAR(v[k], ref, 1e-10) << "n=" << n << " k=" << k;
    }
    const auto back = DctBasis(n).inverse(v);
    for (std::size_t i = 0; i < n; ++i)
      ASSERT_NEAR(back[i], x[i], 1e-10);
  }
}

TEST(Dct, SeparableMatchesKronecker)
{
  const std::size_t ns = 3, nt = 5;
  const auto ms = dct_matrix(ns), mt = dct_matrix(nt);
  const auto x = random_vec(ns * nt, 9);
  const auto v = DctBasis(lattice(ns, nt), DctBasis::Layout::Separable).forward(x);
  for (std::size_t kt = 0; kt < nt; ++kt)
    for (std::size_t ks = 0; ks < ns; ++ks) {
      double ref = 0.0;
      for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t g = 0; g < ns; ++g)
          ref += mt[kt][t] * ms[ks][g] * x[t * ns + g];
      EXPECT_NEAR(v[kt * ns + ks], ref, 1e-10);
    }
}

TEST(Dct, ZeroAndConstant)
{
  const std::vector<double> z(40, 0.0);
  for (double c : DctBasis(40).forward(z))
    EXPECT_EQ(c, 0.0);
  const std::vector<double> k(40, 3.0);
  const auto v = DctBasis(40).forward(k);
  EXPECT_NEAR(v[0], 3.0 * std::sqrt(40.0), 1e-12);
  for (std::size_t i = 1; i < v.size(); ++i)
    EXPECT_NEAR(v[i], 0.0, 1e-12);
}

TEST(TopK, Extremes)
{
  const auto x = random_vec(60, 4, 5.0);
  EXPECT_NEAR(top_k_approx(x, 60).rms_error, 0.0, 1e-12);
  double ms = 0.0;
  for (double v : x)
    ms += v * v;
  EXPECT_NEAR(top_k_approx(x, 0).rms_error, std::sqrt(ms / 60.0), 1e-12);
  EXPECT_THROW(top_k_approx(x, 61), Error);
}

TEST(TopK, ExactlySparse)
{
  const std::size_t n = 256;
  std::vector<double> v(n, 0.0);
  for (std::size_t i : {0u, 3u, 17u, 40u, 41u, 100u, 255u})
    v[i] = 5.0 + double(i);
  const auto x = DctBasis(n).inverse(v);
  EXPECT_LE(top_k_approx(x, 7).rms_error, 1e-9);
}

TEST(Compressibility, SparseProfileFraction)
{
  const auto l = lattice(6, 50);
  const std::size_t n = l.size();
  std::mt19937_64 rng(3);
  for (std::size_t s : {1u, 10u, 45u}) {
    std::vector<double> v(n, 0.0);
    std::vector<std::size_t> pos(n);
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    std::shuffle(pos.begin(), pos.end(), rng);
    for (std::size_t i = 0; i < s; ++i)
      v[pos[i]] = (i % 2 ? -2.0 : 2.0) * std::sqrt(double(n));
    const auto p = devectorize(DctBasis(n).inverse(v), l);
    const auto rep = compressibility(p, 1.0);
    EXPECT_EQ(rep.counts.at(1.0), s);
    EXPECT_DOUBLE_EQ(rep.fractions.at(1.0), double(s) / double(n));
  }
}

TEST(Compressibility, WhiteNoiseNeedsAlmostEverything)
{
  const auto l = lattice(6, 50);
  const auto p = devectorize(random_vec(l.size(), 8, 10.0), l);
  EXPECT_GT(compressibility(p, 0.1).fractions.at(0.1), 0.9);
}

TEST(Compressibility, RejectsHoles)
{
  auto l = lattice(2, 2);
  NoiseProfile p(l);
  EXPECT_THROW(compressibility(p), Error);
}
