#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "noisemap/error.hpp"
#include "noisemap/fft.hpp"
#include "noisemap/grid.hpp"

namespace noisemap {

/**
 * Orthonormal DCT basis Psi for vectorized profiles. The default is a single
 * 1-D DCT-II over all N = n_s * n_t entries; the separable variant applies a
 * DCT along space and another along time.
 */
class DctBasis
{
public:
  enum class Layout { Flat, Separable };

  explicit DctBasis(std::size_t n) : n_s_(n), n_t_(1), layout_(Layout::Flat) {}
  DctBasis(const Lattice& l, Layout layout = Layout::Flat)
    : n_s_(layout == Layout::Flat ? l.size() : l.n_s),
      n_t_(layout == Layout::Flat ? 1 : l.n_t),
      layout_(layout)
  {}

  std::size_t size() const { return n_s_ * n_t_; }
  Layout layout() const { return layout_; }

  /// v = Psi^T x
  std::vector<double> forward(std::span<const double> x) const
  {
    std::vector<double> v(size());
    forward(x, v);
    return v;
  }

  void forward(std::span<const double> x, std::span<double> v) const
  {
    check(x.size());
    check(v.size());
    if (layout_ == Layout::Flat)
      fft::dct2(x, v);
    else
      separable(x, v, false);
  }

  /// x = Psi v
  std::vector<double> inverse(std::span<const double> v) const
  {
    std::vector<double> x(size());
    inverse(v, x);
    return x;
  }

  void inverse(std::span<const double> v, std::span<double> x) const
  {
    check(v.size());
    check(x.size());
    if (layout_ == Layout::Flat)
      fft::idct2(v, x);
    else
      separable(v, x, true);
  }

private:
  void check(std::size_t n) const
  {
    if (n != size())
      throw Error("length_mismatch", "vector length does not match the basis dimension");
  }

  // rows of length n_s_ (space, contiguous) for each of n_t_ time steps
  void separable(std::span<const double> in, std::span<double> out, bool inverse) const
  {
    std::vector<double> tmp(size());
    std::vector<double> a, b;
    a.resize(n_s_);
    b.resize(n_s_);
    for (std::size_t t = 0; t < n_t_; ++t) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(t * n_s_), n_s_, a.begin());
      inverse ? fft::idct2(a, b) : fft::dct2(a, b);
      std::copy(b.begin(), b.end(), tmp.begin() + static_cast<std::ptrdiff_t>(t * n_s_));
    }
    a.resize(n_t_);
    b.resize(n_t_);
    for (std::size_t g = 0; g < n_s_; ++g) {
      for (std::size_t t = 0; t < n_t_; ++t)
        a[t] = tmp[t * n_s_ + g];
      inverse ? fft::idct2(a, b) : fft::dct2(a, b);
      for (std::size_t t = 0; t < n_t_; ++t)
        out[t * n_s_ + g] = b[t];
    }
  }

  std::size_t n_s_;
  std::size_t n_t_;
  Layout layout_;
};

inline double rms(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size())
    throw Error("length_mismatch", "rms of vectors with different lengths");
  if (a.empty())
    return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

struct TopKApprox
{
  std::vector<double> approx;
  double rms_error = 0.0;
};

/// Keeps the k largest-magnitude coefficients (ties by lower index) and inverts.
inline TopKApprox top_k_approx(std::span<const double> x, std::size_t k, const DctBasis& basis)
{
  if (k > x.size())
    throw Error("bad_k", "k exceeds the signal length");
  auto v = basis.forward(x);
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(v[a]) > std::abs(v[b]); });
  for (std::size_t i = k; i < order.size(); ++i)
    v[order[i]] = 0.0;
  TopKApprox out;
  out.approx = basis.inverse(v);
  out.rms_error = rms(x, out.approx);
  return out;
}

inline TopKApprox top_k_approx(std::span<const double> x, std::size_t k)
{
  return top_k_approx(x, k, DctBasis(x.size()));
}

struct CompressibilityReport
{
  std::map<double, double> fractions;     ///< RMS target (dBA) -> minimal k/N
  std::map<double, std::size_t> counts;   ///< RMS target (dBA) -> minimal k
  std::vector<double> sorted_magnitudes;  ///< |coefficients|, descending
  std::size_t n = 0;
};

/// Smallest k whose top-k approximation is within each RMS target, by bisection on k.
inline CompressibilityReport compressibility(const NoiseProfile& profile,
                                             std::span<const double> targets,
                                             DctBasis::Layout layout = DctBasis::Layout::Flat)
{
  if (!profile.complete())
    throw Error("undefined_cells", "compressibility needs a fully defined profile");
  const DctBasis basis(profile.lattice, layout);
  const auto& x = profile.values;
  CompressibilityReport rep;
  rep.n = x.size();
  auto v = basis.forward(x);
  rep.sorted_magnitudes.resize(v.size());
  std::transform(v.begin(), v.end(), rep.sorted_magnitudes.begin(),
                 [](double c) { return std::abs(c); });
  std::sort(rep.sorted_magnitudes.begin(), rep.sorted_magnitudes.end(), std::greater<>{});

  for (double target : targets) {
    std::size_t lo = 0, hi = x.size(); // error(hi) == 0 <= target
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (top_k_approx(x, mid, basis).rms_error <= target)
        hi = mid;
      else
        lo = mid + 1;
    }
    rep.counts[target] = lo;
    rep.fractions[target] = static_cast<double>(lo) / static_cast<double>(x.size());
  }
  return rep;
}

inline CompressibilityReport compressibility(const NoiseProfile& profile, double target = 1.0,
                                             DctBasis::Layout layout = DctBasis::Layout::Flat)
{
  const double t[] = {target};
  return compressibility(profile, t, layout);
}

} // namespace noisemap
