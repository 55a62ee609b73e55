#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisemap/error.hpp"

namespace noisemap::context {

enum class Label { Hand, PocketOrBag, Unknown };

inline const char* to_string(Label l)
{
  switch (l) {
    case Label::Hand: return "hand";
    case Label::PocketOrBag: return "pocket_or_bag";
    default: return "unknown";
  }
}

inline Label label_from_string(const std::string& s)
{
  if (s == "hand") return Label::Hand;
  if (s == "pocket_or_bag") return Label::PocketOrBag;
  if (s == "unknown") return Label::Unknown;
  throw Error("bad_label", "unknown context label '" + s + "'");
}

enum class FeatureKind { Mean, Median, P75 };

inline const char* to_string(FeatureKind k)
{
  switch (k) {
    case FeatureKind::Mean: return "mean";
    case FeatureKind::Median: return "median";
    default: return "p75";
  }
}

inline FeatureKind feature_from_string(const std::string& s)
{
  if (s == "mean") return FeatureKind::Mean;
  if (s == "median") return FeatureKind::Median;
  if (s == "p75") return FeatureKind::P75;
  throw Error("bad_feature", "unknown accelerometer feature '" + s + "'");
}

struct SensorWindow
{
  std::vector<double> z_axis;  ///< accelerometer z readings, m/s^2
  int prox_triggers = 0;       ///< far -> near transitions of the proximity sensor
  double delta_s = 60.0;
  double start = 0.0;
};

/// Linear-interpolation percentile (the "type 7" definition), p in [0, 100].
inline double percentile(std::vector<double> v, double p)
{
  if (v.empty())
    throw Error("empty_window", "percentile of an empty window");
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double accel_feature(const SensorWindow& w, FeatureKind kind)
{
  if (w.z_axis.empty())
    throw Error("empty_window", "accelerometer window has no samples");
  switch (kind) {
    case FeatureKind::Mean:
      return std::accumulate(w.z_axis.begin(), w.z_axis.end(), 0.0) /
             static_cast<double>(w.z_axis.size());
    case FeatureKind::Median:
      return percentile(w.z_axis, 50.0);
    default:
      return percentile(w.z_axis, 75.0);
  }
}

struct TrainingPoint
{
  double feature = 0.0;
  Label label = Label::Hand;
};

struct KnnModel
{
  std::vector<TrainingPoint> training;
  int k = 5;
  FeatureKind feature_kind = FeatureKind::Mean;

  void validate() const
  {
    if (k <= 0 || k % 2 == 0)
      throw Error("bad_k", "k must be a positive odd number");
    if (static_cast<std::size_t>(k) > training.size())
      throw Error("bad_k", "k exceeds the number of training points");
  }
};

/**
 * Majority vote among the k training features closest to `feature` in absolute
 * distance. Equal distances are ordered by training index.
 */
inline Label knn_classify(const KnnModel& model, double feature)
{
  model.validate();
  std::vector<std::size_t> order(model.training.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto dist = [&](std::size_t i) { return std::abs(model.training[i].feature - feature); };
  std::partial_sort(order.begin(), order.begin() + model.k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double da = dist(a), db = dist(b);
                      return da < db || (da == db && a < b);
                    });
  int hand = 0;
  for (int i = 0; i < model.k; ++i)
    hand += model.training[order[static_cast<std::size_t>(i)]].label == Label::Hand;
  return 2 * hand > model.k ? Label::Hand : Label::PocketOrBag;
}

inline constexpr int kDefaultProximityThreshold = 10;

/// Proximity bursts can only promote a window to Hand, never demote it.
inline Label fuse(Label knn_label, int prox_triggers, int threshold = kDefaultProximityThreshold)
{
  if (threshold <= 0)
    throw Error("bad_threshold", "proximity threshold must be positive");
  return prox_triggers >= threshold ? Label::Hand : knn_label;
}

struct ClassifierConfig
{
  int k = 5;
  FeatureKind feature_kind = FeatureKind::Mean;
  bool use_proximity = true;
  int prox_threshold = kDefaultProximityThreshold;
  double delta_s = 60.0;
};

struct LabelledWindow
{
  SensorWindow window;
  Label label = Label::Hand;
};

inline KnnModel build_model(std::span<const LabelledWindow> data, const ClassifierConfig& cfg)
{
  KnnModel m;
  m.k = cfg.k;
  m.feature_kind = cfg.feature_kind;
  m.training.reserve(data.size());
  for (const auto& d : data)
    m.training.push_back({accel_feature(d.window, cfg.feature_kind), d.label});
  return m;
}

inline Label classify_window(const KnnModel& model, const SensorWindow& w,
                             const ClassifierConfig& cfg)
{
  const Label l = knn_classify(model, accel_feature(w, model.feature_kind));
  return cfg.use_proximity ? fuse(l, w.prox_triggers, cfg.prox_threshold) : l;
}

/// Leave-one-out accuracy in percent.
inline double loo_accuracy(std::span<const LabelledWindow> data, const ClassifierConfig& cfg)
{
  if (data.size() < 2 || data.size() < static_cast<std::size_t>(cfg.k) + 1)
    throw Error("dataset_too_small", "leave-one-out needs more than k windows");
  std::vector<double> features(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    features[i] = accel_feature(data[i].window, cfg.feature_kind);

  std::size_t correct = 0;
  KnnModel model;
  model.k = cfg.k;
  model.feature_kind = cfg.feature_kind;
  model.training.reserve(data.size() - 1);
  for (std::size_t held = 0; held < data.size(); ++held) {
    model.training.clear();
    for (std::size_t i = 0; i < data.size(); ++i)
      if (i != held)
        model.training.push_back({features[i], data[i].label});
    Label l = knn_classify(model, features[held]);
    if (cfg.use_proximity)
      l = fuse(l, data[held].window.prox_triggers, cfg.prox_threshold);
    correct += l == data[held].label;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

/// One row of a raw sensor trace.
struct TraceSample
{
  double t = 0.0;
  double z = 0.0;
  int prox_state = 0; ///< 1 = near (covered), 0 = far
};

/// Cuts a trace into consecutive windows of `delta_s` seconds starting at the
/// first sample. Windows with no samples come back empty (a gap).
inline std::vector<std::optional<SensorWindow>> window_trace(std::span<const TraceSample> trace,
                                                             double delta_s)
{
  std::vector<std::optional<SensorWindow>> out;
  if (trace.empty())
    return out;
  const double t0 = trace.front().t;
  int prev_prox = trace.front().prox_state;
  for (const auto& s : trace) {
    if (s.t < t0)
      throw Error("unordered_trace", "trace timestamps must be non-decreasing");
    const auto idx = static_cast<std::size_t>(std::floor((s.t - t0) / delta_s));
    if (idx >= out.size())
      out.resize(idx + 1);
    auto& w = out[idx];
    if (!w) {
      w.emplace();
      w->delta_s = delta_s;
      w->start = t0 + static_cast<double>(idx) * delta_s;
    }
    w->z_axis.push_back(s.z);
    if (prev_prox == 0 && s.prox_state == 1)
      ++w->prox_triggers;
    prev_prox = s.prox_state;
  }
  return out;
}

/**
 * Streaming context detector: one label per window, and a recording gate that
 * is open only while the most recent label is Hand.
 */
class SwitchDetector
{
public:
  SwitchDetector(KnnModel model, ClassifierConfig cfg)
    : model_(std::move(model)), cfg_(cfg)
  {
    model_.validate();
  }

  Label push(const std::optional<SensorWindow>& w)
  {
    if (!w || w->z_axis.empty())
      latest_ = Label::Unknown;
    else
      latest_ = classify_window(model_, *w, cfg_);
    return latest_;
  }

  bool gate_open() const { return latest_ == Label::Hand; }
  Label latest() const { return latest_; }

private:
  KnnModel model_;
  ClassifierConfig cfg_;
  Label latest_ = Label::Unknown;
};

inline std::vector<Label> detect_switch(const KnnModel& model, const ClassifierConfig& cfg,
                                        std::span<const std::optional<SensorWindow>> windows)
{
  SwitchDetector det(model, cfg);
  std::vector<Label> out;
  out.reserve(windows.size());
  for (const auto& w : windows)
    out.push_back(det.push(w));
  return out;
}

} // namespace noisemap::context
