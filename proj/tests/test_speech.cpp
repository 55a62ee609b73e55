#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "noisemap/speech.hpp"
#include "support/synthetic_corpus.hpp"

using namespace noisemap;
using namespace noisemap::speech;

namespace {

SpectralFeature feat(double m)
{
  SpectralFeature f;
  f.median_amp = m;
  return f;
}

PcmFrame tone(double hz, double amp, double seconds)
{
  PcmFrame f;
  f.samples.resize(static_cast<std::size_t>(seconds * f.sample_rate));
  for (std::size_t i = 0; i < f.samples.size(); ++i)
    f.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / f.sample_rate);
  return f;
}

} // namespace

TEST(SpectralMedian, ZeroFrame)
{
  PcmFrame f;
  f.samples.assign(16000, 0.0);
  EXPECT_EQ(spectral_median(f).median_amp, 0.0);
}

TEST(SpectralMedian, TooShort)
{
  PcmFrame f;
  f.samples.assign(1000, 0.1);
  EXPECT_THROW(spectral_median(f), Error);
}

TEST(SpectralMedian, HalvesWithAmplitude)
{
  const double full = spectral_median(tone(2000.0, 0.8, 2.0)).median_amp;
  const double half = spectral_median(tone(2000.0, 0.4, 2.0)).median_amp;
  ASSERT_GT(full, 0.0);
  EXPECT_NEAR(half / full, 0.5, 1e-9);
}

TEST(SpectralMedian, VoicedAbovePinkNoise)
{
  noisemap::testing::SpeechCorpusParams p;
  p.window_s = 10.0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const double v = spectral_median(noisemap::testing::synth_audio_window(true, seed, p)).median_amp;
    const double n = spectral_median(noisemap::testing::synth_audio_window(false, seed, p)).median_amp;
    EXPECT_GT(v, n) << "seed " << seed;
  }
}

TEST(Threshold, Midpoint)
{
  const std::vector<SpectralFeature> v = {feat(10)}, n = {feat(2)};
  EXPECT_DOUBLE_EQ(train_threshold(v, n).theta, 6.0);
}

TEST(Threshold, IdenticalClassesUntrainable)
{
  const std::vector<SpectralFeature> v = {feat(3), feat(4)};
  try {
    train_threshold(v, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "untrainable");
  }
}

TEST(Threshold, OverlapFlagged)
{
  // midpoint 5.5 misclassifies 2 of 3 voiced windows
  const std::vector<SpectralFeature> v = {feat(1), feat(2), feat(30)}, n = {feat(1), feat(0)};
  EXPECT_THROW(train_threshold(v, n), Error);
}

TEST(Classify, TieAndMonotone)
{
  SpeechThreshold th;
  th.theta = 0.01;
  EXPECT_EQ(classify(feat(0.01), th), Label::Voiced);
  EXPECT_EQ(classify(feat(0.0), th), Label::NoiseOnly);
  EXPECT_EQ(classify(feat(0.02), th), Label::Voiced);
  bool seen_voiced = false;
  for (int i = 0; i <= 100; ++i) {
    const bool v = classify(feat(i * 0.0005), th) == Label::Voiced;
    EXPECT_TRUE(!seen_voiced || v);
    seen_voiced = seen_voiced || v;
  }
}

TEST(Windows, SplitDropsTail)
{
  PcmFrame f;
  f.samples.assign(16000 * 130, 0.0);
  const auto w = split_windows(f);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_DOUBLE_EQ(w[1].start_time, 60.0);
}
