#pragma once

// Synthetic stand-ins for field recordings: speech/noise audio windows and
// hand/pocket sensor windows. Test-only.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "noisemap/acoustics.hpp"
#include "noisemap/context.hpp"

namespace noisemap::testing {

/// Pink-ish noise (Paul Kellet's economy filter) at unit-ish RMS.
class PinkNoise
{
public:
  explicit PinkNoise(std::uint64_t seed) : rng_(seed) {}

  double next()
  {
    const double w = white_(rng_);
    b0_ = 0.99765 * b0_ + w * 0.0990460;
    b1_ = 0.96300 * b1_ + w * 0.2965164;
    b2_ = 0.57000 * b2_ + w * 1.0526913;
    return 0.25 * (b0_ + b1_ + b2_ + w * 0.1848);
  }

private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> white_{0.0, 1.0};
  double b0_ = 0, b1_ = 0, b2_ = 0;
};

struct SpeechCorpusParams
{
  int sample_rate = 16000;
  double window_s = 60.0;
  double noise_db_lo = -31.0; ///< per-window pink noise RMS range, dBFS
  double noise_db_hi = -27.0;
  double snr_db_lo = 10.0; ///< per-window talker RMS over noise RMS, dB
  double snr_db_hi = 16.0;
  double breath_fraction = 0.5; ///< share of talker power in the broadband part
  int harmonics = 12;
};

/**
 * One window of traffic-like pink noise; when `voiced`, a talker is mixed in:
 * harmonics of a 100-300 Hz fundamental with vibrato plus a flat broadband
 * (fricative/breath) part, gated by a ~4 Hz syllable envelope and short pauses.
 */
inline PcmFrame synth_audio_window(bool voiced, std::uint64_t seed, const SpeechCorpusParams& p = {})
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  PinkNoise pink(seed ^ 0x9e3779b97f4a7c15ull);
  const double noise_rms = std::pow(10.0, (p.noise_db_lo + (p.noise_db_hi - p.noise_db_lo) * u01(rng)) / 20.0);
  const double f0 = 100.0 + 200.0 * u01(rng);
  const double vib_rate = 4.0 + 2.0 * u01(rng);
  const double syl_rate = 3.0 + 2.0 * u01(rng);
  const double snr_db = p.snr_db_lo + (p.snr_db_hi - p.snr_db_lo) * u01(rng);
  const double speech_rms = noise_rms * std::pow(10.0, snr_db / 20.0);
  // sum of `harmonics` unit sines with 1/k amplitude has this RMS
  double hsum = 0.0;
  for (int k = 1; k <= p.harmonics; ++k)
    hsum += 1.0 / (k * k);
  const double h_scale = speech_rms * std::sqrt(1.0 - p.breath_fraction) / std::sqrt(0.5 * hsum);
  const double b_scale = speech_rms * std::sqrt(p.breath_fraction);
  std::normal_distribution<double> white(0.0, 1.0);

  PcmFrame f;
  f.sample_rate = p.sample_rate;
  const auto n = static_cast<std::size_t>(p.window_s * p.sample_rate);
  f.samples.resize(n);
  const double dt = 1.0 / p.sample_rate;
  double phase = 0.0;
  bool talking = true;
  double next_switch = 0.5 + 2.0 * u01(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    double x = noise_rms * pink.next() / 0.747; // long-run RMS of PinkNoise::next()
    if (voiced) {
      if (t >= next_switch) {
        talking = !talking;
        next_switch = t + (talking ? 2.0 + 3.0 * u01(rng) : 0.2 + 0.6 * u01(rng));
      }
      const double f_inst = f0 * (1.0 + 0.03 * std::sin(2.0 * std::numbers::pi * vib_rate * t));
      phase += 2.0 * std::numbers::pi * f_inst * dt;
      if (phase > 2.0 * std::numbers::pi)
        phase -= 2.0 * std::numbers::pi;
      if (talking) {
        const double env = 0.65 - 0.35 * std::cos(2.0 * std::numbers::pi * syl_rate * t);
        // sin(k phase) by the Chebyshev recurrence
        const double c2 = 2.0 * std::cos(phase);
        double s_prev = 0.0, s = std::sin(phase), h = 0.0;
        for (int k = 1; k <= p.harmonics; ++k) {
          h += s / k;
          const double s_next = c2 * s - s_prev;
          s_prev = s;
          s = s_next;
        }
        x += env * (h_scale * h + b_scale * white(rng));
      }
    }
    f.samples[i] = x;
  }
  return f;
}

struct ContextCorpusParams
{
  double hand_mean = 9.0;   ///< cluster centres of the per-window z mean, m/s^2
  double pocket_mean = 7.0;
  double cluster_sd = 0.7;  ///< spread of window means within a context
  double within_sd_lo = 2.0; ///< handling shakes the phone; spread varies by window
  double within_sd_hi = 12.0;
  int samples_per_window = 60;
  double hand_prox_rate = 9.0;   ///< Poisson mean of far->near triggers per window
  double pocket_prox_rate = 2.0;
};

/**
 * Labelled windows from two contexts. Each window draws its own mean from the
 * context's Normal cluster and a random within-window spread, then 1 Hz
 * z-axis samples around it; proximity triggers are Poisson.
 */
inline std::vector<context::LabelledWindow> synth_context_dataset(std::size_t per_class, std::uint64_t seed,
                                                                  const ContextCorpusParams& p = {})
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<context::LabelledWindow> out;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool hand = i % 2 == 0;
    context::LabelledWindow lw;
    lw.label = hand ? context::Label::Hand : context::Label::PocketOrBag;
    std::normal_distribution<double> centre(hand ? p.hand_mean : p.pocket_mean, p.cluster_sd);
    const double m = centre(rng);
    const double sd = p.within_sd_lo + (p.within_sd_hi - p.within_sd_lo) * u01(rng);
    std::normal_distribution<double> z(m, sd);
    for (int k = 0; k < p.samples_per_window; ++k)
      lw.window.z_axis.push_back(z(rng));
    std::poisson_distribution<int> prox(hand ? p.hand_prox_rate : p.pocket_prox_rate);
    lw.window.prox_triggers = prox(rng);
    lw.window.delta_s = 60.0;
    lw.window.start = 60.0 * static_cast<double>(i);
    out.push_back(std::move(lw));
  }
  return out;
}

} // namespace noisemap::testing
