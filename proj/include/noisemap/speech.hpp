#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "noisemap/acoustics.hpp"
#include "noisemap/error.hpp"
#include "noisemap/fft.hpp"

namespace noisemap::speech {

inline constexpr int kFftSize = 1024;
inline constexpr int kHop = kFftSize / 2;
inline constexpr double kMaxFrequency = 4000.0;
inline constexpr double kWindowSeconds = 60.0;

struct SpectralFeature
{
  double median_amp = 0.0; ///< median spectrogram magnitude over 0-4 kHz
  double window_start = 0.0;
  double window_len = 0.0;
};

enum class Label { Voiced, NoiseOnly };

inline const char* to_string(Label l)
{
  return l == Label::Voiced ? "voiced" : "noise";
}

struct SpeechThreshold
{
  double theta = 0.0;
  std::size_t trained_voiced = 0;
  std::size_t trained_noise = 0;
};

inline double median_inplace(std::vector<double>& v)
{
  if (v.empty())
    throw Error("empty_window", "median of an empty set");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0)
    m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

/**
 * Median magnitude of the short-time spectrum over every time-frequency bin
 * whose centre frequency is at most 4 kHz. Hann-windowed 1024-point frames with
 * 50% overlap; magnitudes are scaled so a full-scale sine peaks near 1.
 */
inline SpectralFeature spectral_median(const PcmFrame& frame)
{
  if (frame.samples.size() < static_cast<std::size_t>(kFftSize))
    throw Error("frame_too_short", "speech feature needs at least one 1024-sample FFT window");

  std::vector<double> window(kFftSize);
  double wsum = 0.0;
  for (int i = 0; i < kFftSize; ++i) {
    window[static_cast<std::size_t>(i)] =
      0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / kFftSize);
    wsum += window[static_cast<std::size_t>(i)];
  }
  const double scale = 2.0 / wsum;
  const auto max_bin = static_cast<std::size_t>(
    std::floor(kMaxFrequency * kFftSize / frame.sample_rate + 1e-9));

  std::vector<double> mags;
  std::vector<double> buf(kFftSize);
  for (std::size_t start = 0; start + kFftSize <= frame.samples.size(); start += kHop) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(kFftSize); ++i)
      buf[i] = frame.samples[start + i] * window[i];
    const auto spec = fft::rfft_magnitude(buf);
    const std::size_t top = std::min(max_bin, spec.size() - 1);
    for (std::size_t k = 0; k <= top; ++k)
      mags.push_back(spec[k] * scale);
  }
  SpectralFeature f;
  f.median_amp = median_inplace(mags);
  f.window_start = frame.start_time;
  f.window_len = frame.duration();
  return f;
}

/// Splits a recording into consecutive windows (60 s by default); a short tail is dropped.
inline std::vector<PcmFrame> split_windows(const PcmFrame& frame, double window_s = kWindowSeconds)
{
  const auto len = static_cast<std::size_t>(std::llround(window_s * frame.sample_rate));
  std::vector<PcmFrame> out;
  for (std::size_t s = 0; s + len <= frame.samples.size(); s += len) {
    PcmFrame w;
    w.sample_rate = frame.sample_rate;
    w.start_time = frame.start_time + static_cast<double>(s) / frame.sample_rate;
    w.samples.assign(frame.samples.begin() + static_cast<std::ptrdiff_t>(s),
                     frame.samples.begin() + static_cast<std::ptrdiff_t>(s + len));
    out.push_back(std::move(w));
  }
  return out;
}

inline Label classify(const SpectralFeature& f, const SpeechThreshold& th)
{
  return f.median_amp >= th.theta ? Label::Voiced : Label::NoiseOnly;
}

/// Strategy mapping the two training classes to a threshold value.
using ThresholdRule =
  std::function<double(std::span<const SpectralFeature>, std::span<const SpectralFeature>)>;

inline double class_mean(std::span<const SpectralFeature> fs)
{
  double s = 0.0;
  for (const auto& f : fs)
    s += f.median_amp;
  return s / static_cast<double>(fs.size());
}

inline double midpoint_rule(std::span<const SpectralFeature> voiced,
                            std::span<const SpectralFeature> noise)
{
  return 0.5 * (class_mean(voiced) + class_mean(noise));
}

inline SpeechThreshold train_threshold(std::span<const SpectralFeature> voiced,
                                       std::span<const SpectralFeature> noise,
                                       const ThresholdRule& rule = midpoint_rule)
{
  if (voiced.empty() || noise.empty())
    throw Error("empty_training_set", "speech threshold needs both voiced and noise examples");
  const double mv = class_mean(voiced);
  const double mn = class_mean(noise);
  if (!(mv > mn))
    throw Error("untrainable", "voiced windows do not have a larger median amplitude than noise");

  SpeechThreshold th;
  th.theta = rule(voiced, noise);
  th.trained_voiced = voiced.size();
  th.trained_noise = noise.size();

  std::size_t miss_v = 0, miss_n = 0;
  for (const auto& f : voiced)
    miss_v += classify(f, th) != Label::Voiced;
  for (const auto& f : noise)
    miss_n += classify(f, th) != Label::NoiseOnly;
  if (2 * miss_v > voiced.size() || 2 * miss_n > noise.size())
    throw Error("untrainable", "threshold misclassifies more than half of a training class");
  return th;
}

struct Confusion
{
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
};

inline Confusion evaluate(std::span<const SpectralFeature> voiced,
                          std::span<const SpectralFeature> noise, const SpeechThreshold& th)
{
  Confusion c;
  for (const auto& f : voiced)
    (classify(f, th) == Label::Voiced ? c.tp : c.fn)++;
  for (const auto& f : noise)
    (classify(f, th) == Label::Voiced ? c.fp : c.tn)++;
  return c;
}

} // namespace noisemap::speech
