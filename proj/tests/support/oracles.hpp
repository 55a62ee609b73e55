#pragma once

// Brute-force reference computations for the interpolators. Deliberately
// written with plain vectors and textbook elimination, no Eigen, so they share
// no code path with the library.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "noisemap/grid.hpp"

namespace noisemap::testing {

using Matrix = std::vector<std::vector<double>>;

/// Solves A x = b by Gaussian elimination with partial pivoting (A copied).
inline std::vector<double> gauss_solve(Matrix a, std::vector<double> b)
{
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c]))
        piv = r;
    if (a[piv][c] == 0.0)
      throw std::runtime_error("singular system");
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k)
        a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k)
      s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Plane coefficients {a, b, c} from the normal equations (X^T X) beta = X^T y.
inline std::vector<double> plane_normal_equations(const SampleSet& s)
{
  Matrix xtx(3, std::vector<double>(3, 0.0));
  std::vector<double> xty(3, 0.0);
  for (const auto& e : s.entries()) {
    const double row[3] = {double(e.g), double(e.t), 1.0};
    for (int i = 0; i < 3; ++i) {
      xty[i] += row[i] * e.x;
      for (int j = 0; j < 3; ++j)
        xtx[i][j] += row[i] * row[j];
    }
  }
  return gauss_solve(xtx, xty);
}

/// Value at (g, t) of the sample nearest under sqrt(a dg^2 + b dt^2),
/// scanning every sample; ties go to the earliest sample in vector order.
inline double voronoi_value(const SampleSet& s, double a, double b, std::size_t g, std::size_t t)
{
  double best = std::numeric_limits<double>::infinity();
  double val = 0.0;
  std::size_t best_idx = std::numeric_limits<std::size_t>::max();
  const auto& l = s.lattice();
  for (const auto& e : s.entries()) {
    const double dg = double(e.g) - double(g), dt = double(e.t) - double(t);
    const double d = std::sqrt(a * dg * dg + b * dt * dt);
    const std::size_t idx = l.index(e.g, e.t);
    if (d < best || (d == best && idx < best_idx)) {
      best = d;
      best_idx = idx;
      val = e.x;
    }
  }
  return val;
}

struct DenseGp
{
  double mean, var;
};

/// Conditional Gaussian at (g, t) for a squared-exponential prior, by explicit
/// inversion of Sigma = K + noise I through Gaussian elimination.
inline DenseGp dense_gp(const SampleSet& s, double lg, double lt, double sf2, double sn2, double mu,
                        std::size_t g, std::size_t t)
{
  const auto e = s.entries();
  const std::size_t n = e.size();
  auto k = [&](double g1, double t1, double g2, double t2) {
    const double a = (g1 - g2) / lg, b = (t1 - t2) / lt;
    return sf2 * std::exp(-0.5 * (a * a + b * b));
  };
  Matrix sigma(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      sigma[i][j] = k(double(e[i].g), double(e[i].t), double(e[j].g), double(e[j].t)) +
                    (i == j ? sn2 : 0.0);
  std::vector<double> kq(n), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    kq[i] = k(double(e[i].g), double(e[i].t), double(g), double(t));
    r[i] = e[i].x - mu;
  }
  const auto w = gauss_solve(sigma, kq); // Sigma^{-1} k
  DenseGp out{mu, sf2};
  for (std::size_t i = 0; i < n; ++i) {
    out.mean += w[i] * r[i];
    out.var -= w[i] * kq[i];
  }
  return out;
}

} // namespace noisemap::testing
