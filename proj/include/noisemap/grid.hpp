#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisemap/error.hpp"
#include "noisemap/mgrs.hpp"

namespace noisemap {

/**
 * Spatio-temporal lattice over a straight road segment. Spatial cell i
 * (1-based) is the MGRS square `i-1` squares east of `origin`; temporal cell j
 * covers [t0 + (j-1) T, t0 + j T).
 */
struct Lattice
{
  std::size_t n_s = 1;
  std::size_t n_t = 1;
  int omega = 10;      ///< spatial width in metres (MGRS precision)
  double period = 1.0; ///< temporal width T in seconds
  double t0 = 0.0;
  geo::MgrsIndex origin{};

  std::size_t size() const { return n_s * n_t; }

  void validate() const
  {
    if (n_s < 1 || n_t < 1)
      throw Error("bad_lattice", "lattice needs at least one spatial and one temporal cell");
    if (omega != 1 && omega != 10 && omega != 100)
      throw Error("bad_lattice", "spatial width must be 1, 10 or 100 m");
    if (!(period > 0.0))
      throw Error("bad_lattice", "temporal width must be positive");
    if (origin.precision_m != omega)
      throw Error("bad_lattice", "origin precision differs from the spatial width");
  }

  /// Vector position of 1-based cell (g, t): element (t-1) n_s + g, 0-based here.
  std::size_t index(std::size_t g, std::size_t t) const { return (t - 1) * n_s + (g - 1); }
  std::pair<std::size_t, std::size_t> cell(std::size_t idx) const
  {
    return {idx % n_s + 1, idx / n_s + 1};
  }

  bool same_shape(const Lattice& o) const { return n_s == o.n_s && n_t == o.n_t; }

  /// UTM south-west corner of spatial cell g.
  geo::Utm cell_utm(std::size_t g) const
  {
    geo::Utm u = geo::mgrs_to_utm(origin);
    u.easting += static_cast<double>((g - 1) * static_cast<std::size_t>(omega));
    return u;
  }

  geo::LatLon cell_center(std::size_t g) const
  {
    geo::Utm u = cell_utm(g);
    u.easting += 0.5 * omega;
    u.northing += 0.5 * omega;
    return geo::utm_to_latlon(u);
  }

  geo::MgrsIndex cell_mgrs(std::size_t g) const
  {
    geo::Utm u = cell_utm(g);
    u.easting += 0.5 * omega;
    u.northing += 0.5 * omega;
    return geo::utm_to_mgrs(u, geo::utm_to_latlon(u).lat, omega);
  }

  /// Spatial cell holding a position, if it lies on the lattice's row of squares.
  std::optional<std::size_t> spatial_cell(double lat, double lon) const
  {
    const geo::Utm base = geo::mgrs_to_utm(origin);
    const geo::Utm u = geo::latlon_to_utm(lat, lon, origin.zone);
    if (u.south != base.south)
      return std::nullopt;
    const double de = std::floor((u.easting - base.easting) / omega);
    const double dn = std::floor((u.northing - base.northing) / omega);
    if (dn != 0.0 || de < 0.0 || de >= static_cast<double>(n_s))
      return std::nullopt;
    return static_cast<std::size_t>(de) + 1;
  }

  std::optional<std::size_t> temporal_cell(double t) const
  {
    const double j = std::floor((t - t0) / period);
    if (j < 0.0 || j >= static_cast<double>(n_t))
      return std::nullopt;
    return static_cast<std::size_t>(j) + 1;
  }

  double cell_start_time(std::size_t t) const { return t0 + static_cast<double>(t - 1) * period; }
};

/// Dense n_s x n_t map of dBA values; NaN marks a missing cell.
struct NoiseProfile
{
  Lattice lattice;
  std::vector<double> values; ///< vectorized, see Lattice::index

  NoiseProfile() = default;
  explicit NoiseProfile(const Lattice& l)
    : lattice(l), values(l.size(), std::numeric_limits<double>::quiet_NaN())
  {}

  double& at(std::size_t g, std::size_t t) { return values[lattice.index(g, t)]; }
  double at(std::size_t g, std::size_t t) const { return values[lattice.index(g, t)]; }
  bool defined(std::size_t idx) const { return !std::isnan(values[idx]); }

  bool complete() const
  {
    return std::none_of(values.begin(), values.end(), [](double v) { return std::isnan(v); });
  }

  double mean() const
  {
    double s = 0.0;
    std::size_t n = 0;
    for (double v : values)
      if (!std::isnan(v)) { s += v; ++n; }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }

  double stddev() const
  {
    const double m = mean();
    double s = 0.0;
    std::size_t n = 0;
    for (double v : values)
      if (!std::isnan(v)) { s += (v - m) * (v - m); ++n; }
    return n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
  }
};

inline std::vector<double> vectorize(const NoiseProfile& p)
{
  return p.values;
}

inline NoiseProfile devectorize(std::span<const double> v, const Lattice& lattice)
{
  if (v.size() != lattice.size())
    throw Error("length_mismatch", "vector length does not match the lattice");
  NoiseProfile p(lattice);
  std::copy(v.begin(), v.end(), p.values.begin());
  return p;
}

/// Adjacent spatial cells (same time) differing by more than `limit_db`.
struct AdjacencyWarning
{
  std::size_t g = 0, t = 0;
  double difference = 0.0;
};

inline std::vector<AdjacencyWarning> adjacent_cell_warnings(const NoiseProfile& p,
                                                            double limit_db = 5.0)
{
  std::vector<AdjacencyWarning> out;
  const auto& l = p.lattice;
  for (std::size_t t = 1; t <= l.n_t; ++t)
    for (std::size_t g = 1; g < l.n_s; ++g) {
      const double a = p.at(g, t), b = p.at(g + 1, t);
      if (!std::isnan(a) && !std::isnan(b) && std::abs(a - b) > limit_db)
        out.push_back({g, t, a - b});
    }
  return out;
}

/// Power-domain accumulator for pooling levels: 10 log10(mean 10^(L/10)).
/// A single contribution is returned unchanged.
class EnergeticMean
{
public:
  void add(double level_db)
  {
    if (count_ == 0)
      first_ = level_db;
    power_sum_ += std::pow(10.0, level_db / 10.0);
    ++count_;
  }

  void merge(const EnergeticMean& o)
  {
    if (o.count_ == 0)
      return;
    if (count_ == 0)
      first_ = o.first_;
    power_sum_ += o.power_sum_;
    count_ += o.count_;
  }

  std::size_t count() const { return count_; }

  double value() const
  {
    if (count_ == 0)
      throw Error("empty_cell", "no levels accumulated");
    if (count_ == 1)
      return first_;
    return 10.0 * std::log10(power_sum_ / static_cast<double>(count_));
  }

private:
  double power_sum_ = 0.0;
  double first_ = 0.0;
  std::size_t count_ = 0;
};

inline double energetic_mean(std::span<const double> levels)
{
  EnergeticMean m;
  for (double l : levels)
    m.add(l);
  return m.value();
}

struct SampleRecord
{
  double timestamp = 0.0;
  double lat = 0.0;
  double lon = 0.0;
  double laeq = 0.0;
  std::string device_id;

  void validate() const
  {
    if (!(std::abs(lat) <= 90.0) || !(std::abs(lon) <= 180.0))
      throw Error("bad_coordinate", "record latitude/longitude out of range");
    if (!std::isfinite(laeq) || !std::isfinite(timestamp))
      throw Error("bad_record", "record fields must be finite");
  }
};

struct Sample
{
  std::size_t g = 1; ///< spatial cell, 1-based
  std::size_t t = 1; ///< temporal cell, 1-based
  double x = 0.0;    ///< dBA
};

/**
 * Sparse observations on a lattice, kept sorted by vector index so that every
 * consumer sees the same canonical order regardless of how the set was built.
 */
class SampleSet
{
public:
  SampleSet() = default;
  SampleSet(const Lattice& lattice, std::vector<Sample> entries)
    : lattice_(lattice), entries_(std::move(entries))
  {
    std::sort(entries_.begin(), entries_.end(), [&](const Sample& a, const Sample& b) {
      return lattice_.index(a.g, a.t) < lattice_.index(b.g, b.t);
    });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.g < 1 || e.g > lattice_.n_s || e.t < 1 || e.t > lattice_.n_t)
        throw Error("bad_sample", "sample index outside the lattice");
      if (!std::isfinite(e.x))
        throw Error("bad_sample", "sample value must be finite");
      if (i > 0 && lattice_.index(e.g, e.t) == lattice_.index(entries_[i - 1].g, entries_[i - 1].t))
        throw Error("duplicate_sample", "two samples share one lattice cell");
    }
  }

  const Lattice& lattice() const { return lattice_; }
  std::span<const Sample> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::vector<std::size_t> indices() const
  {
    std::vector<std::size_t> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_)
      out.push_back(lattice_.index(e.g, e.t));
    return out;
  }

  std::vector<double> values() const
  {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_)
      out.push_back(e.x);
    return out;
  }

  /// Profile with observed cells filled and the rest missing.
  NoiseProfile to_profile() const
  {
    NoiseProfile p(lattice_);
    for (const auto& e : entries_)
      p.at(e.g, e.t) = e.x;
    return p;
  }

  double missing_fraction() const
  {
    return 1.0 - static_cast<double>(entries_.size()) / static_cast<double>(lattice_.size());
  }

private:
  Lattice lattice_;
  std::vector<Sample> entries_;
};

inline SampleSet sample_set_from_profile(const NoiseProfile& p)
{
  std::vector<Sample> s;
  for (std::size_t idx = 0; idx < p.values.size(); ++idx)
    if (p.defined(idx)) {
      auto [g, t] = p.lattice.cell(idx);
      s.push_back({g, t, p.values[idx]});
    }
  return SampleSet(p.lattice, std::move(s));
}

struct BinResult
{
  SampleSet samples;
  std::size_t dropped = 0;
};

/// Assigns records to lattice cells; several records in one cell are pooled by energetic mean.
inline BinResult bin_samples(std::span<const SampleRecord> records, const Lattice& lattice)
{
  lattice.validate();
  std::map<std::size_t, EnergeticMean> cells;
  std::size_t dropped = 0;
  for (const auto& r : records) {
    r.validate();
    std::optional<std::size_t> g;
    try {
      g = lattice.spatial_cell(r.lat, r.lon);
    } catch (const Error&) {
      g.reset();
    }
    const auto t = lattice.temporal_cell(r.timestamp);
    if (!g || !t) {
      ++dropped;
      continue;
    }
    cells[lattice.index(*g, *t)].add(r.laeq);
  }
  std::vector<Sample> s;
  s.reserve(cells.size());
  for (const auto& [idx, acc] : cells) {
    auto [g, t] = lattice.cell(idx);
    s.push_back({g, t, acc.value()});
  }
  return {SampleSet(lattice, std::move(s)), dropped};
}

} // namespace noisemap
