#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "noisemap/error.hpp"

namespace noisemap {

/// Block of mono audio samples in [-1, 1].
struct PcmFrame
{
  std::vector<double> samples;
  int sample_rate = 16000;
  double start_time = 0.0; ///< seconds since epoch

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const
  {
    if (samples.empty())
      throw Error("empty_frame", "PCM frame has no samples");
    if (sample_rate <= 0)
      throw Error("bad_sample_rate", "sample rate must be positive");
    for (double s : samples)
      if (!(std::abs(s) <= 1.0))
        throw Error("sample_out_of_range", "PCM samples must lie in [-1, 1]");
  }
};

/**
 * Tenth-order IIR approximation of the A-weighting curve designed for 16 kHz
 * audio. The recurrence is
 *
 *   y[n] = sum_{l=0..10} b[l] x[n-l] + sum_{l=1..10} a[l] y[n-l]
 *
 * i.e. past outputs enter with a plus sign, and a[0] is implicitly 1.
 * The filter carries its delay lines between calls so a long recording can be
 * processed frame by frame.
 */
class AWeightFilter
{
public:
  static constexpr int kOrder = 10;
  static constexpr int kDesignRate = 16000;

  static constexpr std::array<double, kOrder + 1> kDefaultB = {
    0.9299, -2.1889, 0.7541, 1.3229, -0.7728, 0.1025,
    -0.2398, -0.0098, 0.1154, -0.0103, -0.0033};
  // index 0 unused
  static constexpr std::array<double, kOrder + 1> kDefaultA = {
    0.0, 2.1856, -0.7403, -1.0831, 0.6863, -0.2274,
    0.2507, -0.0058, -0.0821, 0.0153, 0.0004};

  AWeightFilter() = default;
  AWeightFilter(const std::array<double, kOrder + 1>& b,
                const std::array<double, kOrder + 1>& a,
                int design_rate = kDesignRate)
    : b_(b), a_(a), design_rate_(design_rate)
  {
    a_[0] = 0.0;
  }

  const std::array<double, kOrder + 1>& b() const { return b_; }
  const std::array<double, kOrder + 1>& a() const { return a_; }
  int design_rate() const { return design_rate_; }

  void reset()
  {
    x_hist_.fill(0.0);
    y_hist_.fill(0.0);
    pos_ = 0;
  }

  double step(double x)
  {
    // circular buffers: hist[(pos_ - l) mod kOrder] holds the sample l steps back
    double y = b_[0] * x;
    for (int l = 1; l <= kOrder; ++l) {
      const int idx = (pos_ - l + kOrder) % kOrder;
      y += b_[l] * x_hist_[idx] + a_[l] * y_hist_[idx];
    }
    x_hist_[pos_] = x;
    y_hist_[pos_] = y;
    pos_ = (pos_ + 1) % kOrder;
    return y;
  }

  /// Complex response H(e^{jw}) at frequency `hz` for sample rate `rate`.
  std::complex<double> response(double hz, double rate = kDesignRate) const
  {
    const double w = 2.0 * std::numbers::pi * hz / rate;
    std::complex<double> num{0.0, 0.0};
    std::complex<double> den{1.0, 0.0};
    for (int l = 0; l <= kOrder; ++l) {
      const auto z = std::polar(1.0, -w * l);
      num += b_[l] * z;
      if (l > 0)
        den -= a_[l] * z;
    }
    return num / den;
  }

  double gain_db(double hz, double rate = kDesignRate) const
  {
    return 20.0 * std::log10(std::abs(response(hz, rate)));
  }

private:
  std::array<double, kOrder + 1> b_ = kDefaultB;
  std::array<double, kOrder + 1> a_ = kDefaultA;
  int design_rate_ = kDesignRate;
  std::array<double, kOrder> x_hist_{};
  std::array<double, kOrder> y_hist_{};
  int pos_ = 0;
};

/// Analytic IEC 61672 A-weighting magnitude in dB (0 dB at 1 kHz).
inline double iec_a_weighting_db(double hz)
{
  const double f2 = hz * hz;
  const double c1 = 20.598997 * 20.598997;
  const double c2 = 107.65265 * 107.65265;
  const double c3 = 737.86223 * 737.86223;
  const double c4 = 12194.217 * 12194.217;
  const double ra = c4 * f2 * f2 / ((f2 + c1) * std::sqrt((f2 + c2) * (f2 + c3)) * (f2 + c4));
  return 20.0 * std::log10(ra) + 2.0;
}

/// Runs `frame` through `filter`, updating its state. Rejects foreign sample rates.
inline PcmFrame a_weight(const PcmFrame& frame, AWeightFilter& filter)
{
  if (frame.sample_rate != filter.design_rate())
    throw Error("sample_rate_mismatch",
                "frame sample rate " + std::to_string(frame.sample_rate) +
                  " Hz does not match filter design rate " +
                  std::to_string(filter.design_rate()) + " Hz");
  PcmFrame out;
  out.sample_rate = frame.sample_rate;
  out.start_time = frame.start_time;
  out.samples.resize(frame.samples.size());
  std::transform(frame.samples.begin(), frame.samples.end(), out.samples.begin(),
                 [&](double x) { return filter.step(x); });
  return out;
}

struct CalibrationOffset
{
  double delta = 0.0; ///< dBA added to 10 log10(mean power)
  double estimated_at = 0.0;
  std::string tone_version = "1khz-5seg-v1";
  std::string device_id;
  // diagnostics from estimate_offset
  double spread_db = 0.0;
  bool failed = false;
};

struct LeqReading
{
  double timestamp = 0.0;
  double laeq = 0.0;
  double interval_s = 1.0;
  double mean_power = 0.0;
  bool silence = false;
};

inline constexpr double kSilencePowerFloor = 1e-12;
inline constexpr double kSilenceLevelDb = -120.0;

/// Level from an already accumulated mean square.
inline LeqReading leq_from_power(double mean_power, double interval_s, double delta,
                                 double timestamp = 0.0)
{
  LeqReading r;
  r.timestamp = timestamp;
  r.interval_s = interval_s;
  r.mean_power = mean_power;
  if (mean_power < kSilencePowerFloor) {
    r.silence = true;
    r.laeq = kSilenceLevelDb + delta;
  } else {
    r.laeq = 10.0 * std::log10(mean_power) + delta;
  }
  return r;
}

/// Equivalent level of an A-weighted frame: mean of squares, in dB, plus offset.
inline LeqReading leq(const PcmFrame& weighted, const CalibrationOffset& offset)
{
  if (weighted.samples.empty())
    throw Error("empty_frame", "cannot compute Leq of an empty frame");
  const double energy = std::transform_reduce(
    weighted.samples.begin(), weighted.samples.end(), 0.0, std::plus<>{},
    [](double v) { return v * v; });
  const double mean_power = energy / static_cast<double>(weighted.samples.size());
  return leq_from_power(mean_power, weighted.duration(), offset.delta, weighted.start_time);
}

/// Pools readings over a longer interval by duration-weighted mean power.
inline LeqReading pool(std::span<const LeqReading> readings, double delta)
{
  if (readings.empty())
    throw Error("empty_window", "no readings to pool");
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& r : readings) {
    weighted += r.mean_power * r.interval_s;
    total += r.interval_s;
  }
  return leq_from_power(weighted / total, total, delta, readings.front().timestamp);
}

/**
 * Streams a recording through the A-weighting filter and returns one reading
 * per `interval_s` block. A trailing partial block is dropped.
 */
inline std::vector<LeqReading> leq_series(const PcmFrame& frame, const CalibrationOffset& offset,
                                          double interval_s = 1.0)
{
  frame.validate();
  AWeightFilter filter;
  const auto block = static_cast<std::size_t>(std::llround(interval_s * frame.sample_rate));
  if (block == 0)
    throw Error("bad_interval", "interval shorter than one sample");
  std::vector<LeqReading> out;
  PcmFrame chunk;
  chunk.sample_rate = frame.sample_rate;
  for (std::size_t start = 0; start + block <= frame.samples.size(); start += block) {
    chunk.samples.assign(frame.samples.begin() + static_cast<std::ptrdiff_t>(start),
                         frame.samples.begin() + static_cast<std::ptrdiff_t>(start + block));
    chunk.start_time = frame.start_time + static_cast<double>(start) / frame.sample_rate;
    out.push_back(leq(a_weight(chunk, filter), offset));
  }
  return out;
}

// Calibration tone layout: five one-minute segments, each 30 s of 1 kHz sine
// followed by 30 s of silence; the amplitude steps 0.2, 0.4, ..., 1.0.
inline constexpr int kToneSegments = 5;
inline constexpr double kToneSegmentSeconds = 60.0;
inline constexpr double kToneOnSeconds = 30.0;
inline constexpr double kToneFrequency = 1000.0;

inline double tone_amplitude_at(double t)
{
  if (t < 0.0 || t >= kToneSegments * kToneSegmentSeconds)
    return 0.0;
  const int seg = static_cast<int>(t / kToneSegmentSeconds);
  const double within = t - seg * kToneSegmentSeconds;
  return within < kToneOnSeconds ? 0.2 * (seg + 1) : 0.0;
}

inline PcmFrame generate_calibration_tone(int sample_rate = AWeightFilter::kDesignRate)
{
  if (sample_rate < 8000)
    throw Error("bad_sample_rate", "calibration tone needs at least 8 kHz");
  PcmFrame tone;
  tone.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(kToneSegments * kToneSegmentSeconds * sample_rate);
  tone.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    tone.samples[i] =
      tone_amplitude_at(t) * std::sin(2.0 * std::numbers::pi * kToneFrequency * t);
  }
  return tone;
}

/// True for seconds of the tone that carry signal.
inline bool tone_active_second(double t)
{
  return tone_amplitude_at(t) > 0.0;
}

inline constexpr double kMaxCalibrationSpreadDb = 6.0;

/**
 * Offset that maps uncalibrated readings onto the reference meter: the mean of
 * (reference - recorded) over aligned seconds. `recorded` must be computed with
 * a zero offset and already restricted to the tone's active seconds.
 */
inline CalibrationOffset estimate_offset(std::span<const LeqReading> recorded,
                                         std::span<const double> reference)
{
  if (recorded.empty() || recorded.size() != reference.size())
    throw Error("empty_alignment",
                "calibration needs equally long, non-empty recorded and reference series");
  std::vector<double> diff(recorded.size());
  for (std::size_t i = 0; i < recorded.size(); ++i)
    diff[i] = reference[i] - recorded[i].laeq;
  const double n = static_cast<double>(diff.size());
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
  double var = 0.0;
  for (double d : diff)
    var += (d - mean) * (d - mean);
  CalibrationOffset out;
  out.delta = mean;
  out.spread_db = std::sqrt(var / n);
  out.failed = out.spread_db > kMaxCalibrationSpreadDb;
  return out;
}

} // namespace noisemap
