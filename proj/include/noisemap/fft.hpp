#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include "noisemap/error.hpp"

namespace noisemap::fft {

namespace detail {

// FFTW's planner is not thread safe; execution on new arrays is. Plans are
// created once per (kind, size) under a lock and reused with the new-array API.
// FFTW_ESTIMATE keeps plan choice, and so every rounding, independent of timing.
class PlanCache
{
public:
  enum class Kind { R2c, C2r };

  static PlanCache& instance()
  {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(Kind kind, int n)
  {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(kind, n);
    if (auto it = plans_.find(key); it != plans_.end())
      return it->second;
    std::vector<double> real(static_cast<std::size_t>(n) + 2);
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(n / 2 + 1));
    auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = kind == Kind::R2c ? fftw_plan_dft_r2c_1d(n, real.data(), cplx, flags)
                                       : fftw_plan_dft_c2r_1d(n, cplx, real.data(), flags);
    if (plan == nullptr)
      throw Error("fft_plan", "FFTW could not create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  /// exp(-i pi k / 2n), k = 0..n-1
  const std::vector<std::complex<double>>& twiddles(int n)
  {
    std::lock_guard lock(mutex_);
    auto& w = twiddles_[n];
    if (w.empty()) {
      w.resize(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k)
        w[static_cast<std::size_t>(k)] = std::polar(1.0, -std::numbers::pi * k / (2.0 * n));
    }
    return w;
  }

  ~PlanCache()
  {
    for (auto& [key, plan] : plans_)
      fftw_destroy_plan(plan);
  }

private:
  PlanCache() = default;
  std::mutex mutex_;
  std::map<std::tuple<Kind, int>, fftw_plan> plans_;
  std::map<int, std::vector<std::complex<double>>> twiddles_;
};

} // namespace detail

// Both transforms go through a length-n real FFT of the even/odd reordered
// sequence v = (x0, x2, x4, ..., x5, x3, x1):
//   sum_j x_j cos(pi k (2j+1) / 2n) = Re(exp(-i pi k / 2n) V_k).

/// Orthonormal DCT-II: out = Psi^T in. `in` and `out` may alias.
inline void dct2(std::span<const double> in, std::span<double> out)
{
  const int n = static_cast<int>(in.size());
  if (out.size() != in.size())
    throw Error("length_mismatch", "dct2 buffers differ in length");
  if (n == 0)
    return;
  auto& cache = detail::PlanCache::instance();
  const auto plan = cache.get(detail::PlanCache::Kind::R2c, n);
  const auto& w = cache.twiddles(n);
  thread_local std::vector<double> v;
  thread_local std::vector<std::complex<double>> spec;
  const auto un = static_cast<std::size_t>(n);
  v.resize(un);
  spec.resize(un / 2 + 1);
  for (std::size_t j = 0; 2 * j < un; ++j)
    v[j] = in[2 * j];
  for (std::size_t j = 0; 2 * j + 1 < un; ++j)
    v[un - 1 - j] = in[2 * j + 1];
  fftw_execute_dft_r2c(plan, v.data(), reinterpret_cast<fftw_complex*>(spec.data()));
  const double s0 = std::sqrt(1.0 / n);
  const double s = std::sqrt(2.0 / n);
  out[0] = s0 * spec[0].real();
  for (std::size_t k = 1; k < un; ++k) {
    const auto vk = k <= un / 2 ? spec[k] : std::conj(spec[un - k]);
    out[k] = s * (w[k].real() * vk.real() - w[k].imag() * vk.imag());
  }
}

/// Orthonormal DCT-III, the inverse of dct2: out = Psi in. `in` and `out` may alias.
inline void idct2(std::span<const double> in, std::span<double> out)
{
  const int n = static_cast<int>(in.size());
  if (out.size() != in.size())
    throw Error("length_mismatch", "idct2 buffers differ in length");
  if (n == 0)
    return;
  auto& cache = detail::PlanCache::instance();
  const auto plan = cache.get(detail::PlanCache::Kind::C2r, n);
  const auto& w = cache.twiddles(n);
  thread_local std::vector<double> v;
  thread_local std::vector<std::complex<double>> spec;
  const auto un = static_cast<std::size_t>(n);
  v.resize(un + 2);
  spec.resize(un / 2 + 1);
  // C_k = Re(w_k V_k) and C_{n-k} = -Im(w_k V_k), so V_k = conj(w_k) (C_k - i C_{n-k}).
  const double s0 = std::sqrt(static_cast<double>(n));
  const double s = std::sqrt(n / 2.0);
  const auto c = [&](std::size_t k) { return k == 0 ? s0 * in[0] : (k < un ? s * in[k] : 0.0); };
  for (std::size_t k = 0; k <= un / 2; ++k)
    spec[k] = std::conj(w[k]) * std::complex<double>(c(k), -c(un - k)) / static_cast<double>(n);
  spec[0] = {c(0) / static_cast<double>(n), 0.0};
  fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(spec.data()), v.data());
  for (std::size_t j = 0; 2 * j < un; ++j)
    out[2 * j] = v[j];
  for (std::size_t j = 0; 2 * j + 1 < un; ++j)
    out[2 * j + 1] = v[un - 1 - j];
}

/// Magnitudes of the non-negative frequency bins (n/2 + 1 values) of a real signal.
inline std::vector<double> rfft_magnitude(std::span<const double> in)
{
  const int n = static_cast<int>(in.size());
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
  auto plan = detail::PlanCache::instance().get(detail::PlanCache::Kind::R2c, n);
  fftw_execute_dft_r2c(plan, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
  std::vector<double> mag(out.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    mag[k] = std::abs(out[k]);
  return mag;
}

} // namespace noisemap::fft
