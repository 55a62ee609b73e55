#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "noisemap/acoustics.hpp"

using namespace noisemap;

namespace {

// Gain of the published filter at 1 kHz / 16 kHz, evaluated offline with
// scipy.signal.freqz(b, [1, -a1, ..., -a10], worN=[1000], fs=16000).
constexpr double kGain1k = 0.9696712235160292;

PcmFrame sine(double hz, double amp, double seconds, int rate = 16000)
{
  PcmFrame f;
  f.sample_rate = rate;
  f.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < f.samples.size(); ++i)
    f.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return f;
}

double rms_tail(const std::vector<double>& v, std::size_t skip)
{
  double s = 0.0;
  for (std::size_t i = skip; i < v.size(); ++i)
    s += v[i] * v[i];
  return std::sqrt(s / static_cast<double>(v.size() - skip));
}

} // namespace

TEST(AWeight, ZeroInZeroOut)
{
  PcmFrame f;
  f.samples.assign(4000, 0.0);
  AWeightFilter filt;
  const auto out = a_weight(f, filt);
  for (double v : out.samples)
    EXPECT_EQ(v, 0.0);
}

TEST(AWeight, ImpulseFirstSampleIsB0)
{
  PcmFrame f;
  f.samples.assign(32, 0.0);
  f.samples[0] = 1.0;
  AWeightFilter filt;
  const auto out = a_weight(f, filt);
  EXPECT_DOUBLE_EQ(out.samples[0], 0.9299);
  // second tap by hand: b1 + a1*b0
  EXPECT_NEAR(out.samples[1], -2.1889 + 2.1856 * 0.9299, 1e-12);
}

TEST(AWeight, RejectsForeignRate)
{
  auto f = sine(1000.0, 0.5, 0.1, 44100);
  AWeightFilter filt;
  try {
    a_weight(f, filt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "sample_rate_mismatch");
  }
}

TEST(AWeight, SteadyStateSineAt1k)
{
  const auto f = sine(1000.0, 0.5, 2.0);
  AWeightFilter filt;
  const auto out = a_weight(f, filt);
  const double ratio_db = 20.0 * std::log10(rms_tail(out.samples, 8000) / rms_tail(f.samples, 8000));
  EXPECT_NEAR(ratio_db, 20.0 * std::log10(kGain1k), 0.01);
  EXPECT_LE(std::abs(ratio_db), 0.5);
}

TEST(AWeight, TransferFunctionMatchesOracle)
{
  EXPECT_NEAR(std::abs(AWeightFilter{}.response(1000.0)), kGain1k, 1e-12);
}

TEST(AWeight, FramewiseEqualsWhole)
{
  const auto f = sine(440.0, 0.3, 0.5);
  AWeightFilter a, b;
  const auto whole = a_weight(f, a);
  PcmFrame h1, h2;
  h1.samples.assign(f.samples.begin(), f.samples.begin() + 3000);
  h2.samples.assign(f.samples.begin() + 3000, f.samples.end());
  auto o1 = a_weight(h1, b);
  auto o2 = a_weight(h2, b);
  o1.samples.insert(o1.samples.end(), o2.samples.begin(), o2.samples.end());
  ASSERT_EQ(o1.samples.size(), whole.samples.size());
  for (std::size_t i = 0; i < whole.samples.size(); ++i)
    EXPECT_EQ(o1.samples[i], whole.samples[i]);
}

TEST(IecCurve, ReferencePoints)
{
  EXPECT_NEAR(iec_a_weighting_db(1000.0), 0.0, 0.01);
  EXPECT_NEAR(iec_a_weighting_db(125.0), -16.1, 0.1);
  EXPECT_NEAR(iec_a_weighting_db(4000.0), 1.0, 0.1);
}

TEST(Leq, ConstantSignal)
{
  PcmFrame f;
  f.samples.assign(16000, 1.0);
  EXPECT_NEAR(leq(f, {}).laeq, 0.0, 1e-12);
  CalibrationOffset off;
  off.delta = 35.0;
  EXPECT_NEAR(leq(f, off).laeq, 35.0, 1e-12);
}

TEST(Leq, SilenceIsFlagged)
{
  PcmFrame f;
  f.samples.assign(16000, 0.0);
  const auto r = leq(f, {});
  EXPECT_TRUE(r.silence);
  EXPECT_EQ(r.laeq, kSilenceLevelDb);
}

TEST(Leq, FullScaleSine)
{
  // integer number of periods per second; skip the first second (transient)
  const auto f = sine(1000.0, 1.0, 3.0);
  const auto series = leq_series(f, {});
  ASSERT_EQ(series.size(), 3u);
  const double expect = 10.0 * std::log10(kGain1k * kGain1k / 2.0);
  EXPECT_NEAR(series[1].laeq, expect, 0.01);
  EXPECT_NEAR(series[2].laeq, expect, 0.01);
}

TEST(Leq, PoolIsEnergetic)
{
  std::vector<LeqReading> r(2);
  r[0].mean_power = 1e-4;
  r[1].mean_power = 1e-2;
  const auto p = pool(r, 0.0);
  EXPECT_NEAR(p.laeq, 10.0 * std::log10(0.00505), 1e-12);
  EXPECT_DOUBLE_EQ(p.interval_s, 2.0);
}

TEST(Tone, Layout)
{
  EXPECT_DOUBLE_EQ(tone_amplitude_at(15.0), 0.2);
  EXPECT_DOUBLE_EQ(tone_amplitude_at(45.0), 0.0);
  EXPECT_DOUBLE_EQ(tone_amplitude_at(255.0), 1.0);
  const auto tone = generate_calibration_tone();
  EXPECT_EQ(tone.samples.size(), 300u * 16000u);
  // t = 15.00025 s lands a quarter period into a cycle
  EXPECT_NEAR(tone.samples[240004], 0.2, 1e-9);
  EXPECT_EQ(tone.samples[45 * 16000 + 4], 0.0);
  EXPECT_NEAR(tone.samples[255 * 16000 + 4], 1.0, 1e-9);
}

TEST(Offset, Examples)
{
  auto readings = [](std::vector<double> l) {
    std::vector<LeqReading> r(l.size());
    for (std::size_t i = 0; i < l.size(); ++i)
      r[i].laeq = l[i];
    return r;
  };
  const std::vector<double> ref = {60, 66, 72};
  EXPECT_EQ(estimate_offset(readings(ref), ref).delta, 0.0);
  EXPECT_NEAR(estimate_offset(readings({48, 54, 60}), ref).delta, 12.0, 1e-12);
  EXPECT_NEAR(estimate_offset(readings({58, 63, 70}), ref).delta, 7.0 / 3.0, 1e-12);
  EXPECT_THROW(estimate_offset(readings({}), std::vector<double>{}), Error);
  const auto bad = estimate_offset(readings({0, 66, 90}), ref);
  EXPECT_TRUE(bad.failed);
}

TEST(Offset, RecoveredFromShiftedTone)
{
  const auto tone = generate_calibration_tone();
  const auto series = leq_series(tone, {});
  std::vector<LeqReading> active;
  std::vector<double> reference;
  for (const auto& r : series)
    if (tone_active_second(r.timestamp)) {
      active.push_back(r);
      reference.push_back(r.laeq + 17.25);
    }
  ASSERT_EQ(active.size(), 150u);
  const auto off = estimate_offset(active, reference);
  EXPECT_NEAR(off.delta, 17.25, 1e-9);
  EXPECT_FALSE(off.failed);
}
