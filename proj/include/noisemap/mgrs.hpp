#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "noisemap/error.hpp"

// WGS-84 geodetic <-> UTM <-> MGRS conversions.
//
// UTM uses the 6th-order Krueger series (Karney 2011), accurate to well under
// a millimetre inside a zone. MGRS strings use the "AA" lettering scheme that
// applies to WGS-84. Polar (UPS) areas are rejected.

namespace noisemap::geo {

struct LatLon
{
  double lat = 0.0;
  double lon = 0.0;
};

struct Utm
{
  int zone = 1;
  bool south = false;
  double easting = 0.0;
  double northing = 0.0;
};

namespace wgs84 {
inline constexpr double a = 6378137.0;
inline constexpr double f = 1.0 / 298.257223563;
inline constexpr double k0 = 0.9996;
inline constexpr double false_easting = 500000.0;
inline constexpr double false_northing_south = 10000000.0;
} // namespace wgs84

namespace detail {

struct Krueger
{
  double e;  // first eccentricity
  double A;  // rectifying radius
  std::array<double, 7> alpha{};
  std::array<double, 7> beta{};

  Krueger()
  {
    using namespace wgs84;
    const double n = f / (2.0 - f);
    const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
    e = std::sqrt(f * (2.0 - f));
    A = a / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
    alpha = {0.0,
             n / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180 - 127 * n5 / 288 + 7891 * n6 / 37800,
             13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440 + 281 * n5 / 630 - 1983433 * n6 / 1935360,
             61 * n3 / 240 - 103 * n4 / 140 + 15061 * n5 / 26880 + 167603 * n6 / 181440,
             49561 * n4 / 161280 - 179 * n5 / 168 + 6601661 * n6 / 7257600,
             34729 * n5 / 80640 - 3418889 * n6 / 1995840,
             212378941 * n6 / 319334400};
    beta = {0.0,
            n / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360 - 81 * n5 / 512 + 96199 * n6 / 604800,
            n2 / 48 + n3 / 15 - 437 * n4 / 1440 + 46 * n5 / 105 - 1118711 * n6 / 3870720,
            17 * n3 / 480 - 37 * n4 / 840 - 209 * n5 / 4480 + 5569 * n6 / 90720,
            4397 * n4 / 161280 - 11 * n5 / 504 - 830251 * n6 / 7257600,
            4583 * n5 / 161280 - 108847 * n6 / 3991680,
            20648693 * n6 / 638668800};
  }

  static const Krueger& get()
  {
    static const Krueger k;
    return k;
  }
};

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline constexpr std::string_view kBands = "CDEFGHJKLMNPQRSTUVWX";
inline constexpr std::array<std::string_view, 3> kColumnSets = {"ABCDEFGH", "JKLMNPQR", "STUVWXYZ"};
inline constexpr std::string_view kRowLetters = "ABCDEFGHJKLMNPQRSTUV";

} // namespace detail

inline constexpr double kMinLat = -80.0;
inline constexpr double kMaxLat = 84.0;

inline void check_utm_latitude(double lat, double lon)
{
  if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0))
    throw Error("bad_coordinate", "latitude/longitude out of range");
  if (lat < kMinLat || lat > kMaxLat)
    throw Error("polar_latitude", "latitude outside the UTM/MGRS range [-80, 84]");
}

/// Latitude band letter, C..X; X spans 72..84 degrees.
inline char band_letter(double lat)
{
  int idx = static_cast<int>(std::floor((lat - kMinLat) / 8.0));
  idx = std::clamp(idx, 0, 19);
  return detail::kBands[static_cast<std::size_t>(idx)];
}

/// Standard zone including the Norway (32V) and Svalbard (31X..37X) exceptions.
inline int utm_zone(double lat, double lon)
{
  double l = lon;
  if (l >= 180.0)
    l -= 360.0;
  int zone = static_cast<int>(std::floor((l + 180.0) / 6.0)) + 1;
  if (lat >= 56.0 && lat < 64.0 && l >= 3.0 && l < 12.0)
    zone = 32;
  if (lat >= 72.0 && lat <= 84.0 && l >= 0.0 && l < 42.0) {
    if (l < 9.0) zone = 31;
    else if (l < 21.0) zone = 33;
    else if (l < 33.0) zone = 35;
    else zone = 37;
  }
  return zone;
}

/// Projects into `zone` (defaults to the standard zone of the point).
inline Utm latlon_to_utm(double lat, double lon, std::optional<int> zone = std::nullopt)
{
  check_utm_latitude(lat, lon);
  const auto& k = detail::Krueger::get();
  const int z = zone.value_or(utm_zone(lat, lon));
  if (z < 1 || z > 60)
    throw Error("bad_zone", "UTM zone must be in 1..60");
  const double lon0 = -183.0 + 6.0 * z;
  double dlon = lon - lon0;
  if (dlon > 180.0) dlon -= 360.0;
  if (dlon < -180.0) dlon += 360.0;

  const double phi = detail::deg2rad(lat);
  const double lam = detail::deg2rad(dlon);
  const double tau = std::tan(phi);
  const double sigma = std::sinh(k.e * std::atanh(k.e * tau / std::sqrt(1.0 + tau * tau)));
  const double taup = tau * std::sqrt(1.0 + sigma * sigma) - sigma * std::sqrt(1.0 + tau * tau);
  const double xip = std::atan2(taup, std::cos(lam));
  const double etap = std::asinh(std::sin(lam) / std::sqrt(taup * taup + std::cos(lam) * std::cos(lam)));

  double xi = xip, eta = etap;
  for (int j = 1; j <= 6; ++j) {
    xi += k.alpha[j] * std::sin(2 * j * xip) * std::cosh(2 * j * etap);
    eta += k.alpha[j] * std::cos(2 * j * xip) * std::sinh(2 * j * etap);
  }
  Utm u;
  u.zone = z;
  u.south = lat < 0.0;
  u.easting = wgs84::false_easting + wgs84::k0 * k.A * eta;
  u.northing = wgs84::k0 * k.A * xi + (u.south ? wgs84::false_northing_south : 0.0);
  return u;
}

inline LatLon utm_to_latlon(const Utm& u)
{
  const auto& k = detail::Krueger::get();
  const double x = u.easting - wgs84::false_easting;
  const double y = u.northing - (u.south ? wgs84::false_northing_south : 0.0);
  const double xi = y / (wgs84::k0 * k.A);
  const double eta = x / (wgs84::k0 * k.A);
  double xip = xi, etap = eta;
  for (int j = 1; j <= 6; ++j) {
    xip -= k.beta[j] * std::sin(2 * j * xi) * std::cosh(2 * j * eta);
    etap -= k.beta[j] * std::cos(2 * j * xi) * std::sinh(2 * j * eta);
  }
  const double sinh_etap = std::sinh(etap);
  const double taup = std::sin(xip) / std::sqrt(sinh_etap * sinh_etap + std::cos(xip) * std::cos(xip));

  const double e2 = k.e * k.e;
  double tau = taup;
  for (int it = 0; it < 20; ++it) {
    const double sigma = std::sinh(k.e * std::atanh(k.e * tau / std::sqrt(1.0 + tau * tau)));
    const double taui = tau * std::sqrt(1.0 + sigma * sigma) - sigma * std::sqrt(1.0 + tau * tau);
    const double dtau = (taup - taui) / std::sqrt(1.0 + taui * taui) * (1.0 + (1.0 - e2) * tau * tau) /
                        ((1.0 - e2) * std::sqrt(1.0 + tau * tau));
    tau += dtau;
    if (std::abs(dtau) < 1e-14)
      break;
  }
  LatLon out;
  out.lat = detail::rad2deg(std::atan(tau));
  const double lon0 = -183.0 + 6.0 * u.zone;
  out.lon = lon0 + detail::rad2deg(std::atan2(sinh_etap, std::cos(xip)));
  if (out.lon > 180.0) out.lon -= 360.0;
  if (out.lon < -180.0) out.lon += 360.0;
  return out;
}

/// A grid square at 1, 10 or 100 m resolution. `easting`/`northing` count
/// squares of `precision_m` inside the 100 km square `column``row`.
struct MgrsIndex
{
  int zone = 1;
  char band = 'N';
  char column = 'A';
  char row = 'A';
  long easting = 0;
  long northing = 0;
  int precision_m = 10;

  bool south() const { return band < 'N'; }

  std::string to_string() const
  {
    const int digits = precision_m == 1 ? 5 : precision_m == 10 ? 4 : 3;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d%c%c%c%0*ld%0*ld", zone, band, column, row, digits,
                  easting, digits, northing);
    return buf;
  }

  friend bool operator==(const MgrsIndex&, const MgrsIndex&) = default;
};

inline void check_precision(int precision_m)
{
  if (precision_m != 1 && precision_m != 10 && precision_m != 100)
    throw Error("bad_precision", "MGRS precision must be 1, 10 or 100 m");
}

/// Truncates a UTM position to its MGRS square; `lat` only selects the band letter.
inline MgrsIndex utm_to_mgrs(const Utm& u, double lat, int precision_m)
{
  check_precision(precision_m);
  const auto e = static_cast<long>(std::floor(u.easting));
  const auto n = static_cast<long>(std::floor(u.northing));
  const long col = e / 100000;
  if (col < 1 || col > 8)
    throw Error("bad_coordinate", "easting outside the zone's 100 km columns");
  const long row = (n / 100000) % 20;

  MgrsIndex idx;
  idx.zone = u.zone;
  idx.band = band_letter(lat);
  idx.column = detail::kColumnSets[static_cast<std::size_t>((u.zone - 1) % 3)][static_cast<std::size_t>(col - 1)];
  idx.row = detail::kRowLetters[static_cast<std::size_t>((row + (u.zone % 2 == 0 ? 5 : 0)) % 20)];
  idx.easting = (e % 100000) / precision_m;
  idx.northing = (n % 100000) / precision_m;
  idx.precision_m = precision_m;
  return idx;
}

inline MgrsIndex latlon_to_mgrs(double lat, double lon, int precision_m = 10)
{
  check_precision(precision_m);
  const Utm u = latlon_to_utm(lat, lon);
  return utm_to_mgrs(u, lat, precision_m);
}

/// South-west corner of the square in UTM metres; resolves the 2000 km row
/// ambiguity with the latitude band.
inline Utm mgrs_to_utm(const MgrsIndex& idx)
{
  check_precision(idx.precision_m);
  if (idx.zone < 1 || idx.zone > 60)
    throw Error("bad_mgrs", "zone must be in 1..60");
  const auto band_pos = detail::kBands.find(idx.band);
  if (band_pos == std::string_view::npos)
    throw Error("bad_mgrs", "invalid latitude band");
  const auto& cols = detail::kColumnSets[static_cast<std::size_t>((idx.zone - 1) % 3)];
  const auto col_pos = cols.find(idx.column);
  const auto row_pos = detail::kRowLetters.find(idx.row);
  if (col_pos == std::string_view::npos || row_pos == std::string_view::npos)
    throw Error("bad_mgrs", "invalid 100 km square letters for this zone");

  const long row = (static_cast<long>(row_pos) - (idx.zone % 2 == 0 ? 5 : 0) + 20) % 20;
  Utm u;
  u.zone = idx.zone;
  u.south = idx.south();
  u.easting = static_cast<double>((static_cast<long>(col_pos) + 1) * 100000 + idx.easting * idx.precision_m);
  const double within = static_cast<double>(row * 100000 + idx.northing * idx.precision_m);

  const double band_south = kMinLat + 8.0 * static_cast<double>(band_pos);
  const double band_north = idx.band == 'X' ? kMaxLat : band_south + 8.0;
  const double band_mid = 0.5 * (band_south + band_north);
  double best = -1.0;
  double best_miss = 1e9;
  for (int k = 0; k < 6; ++k) {
    Utm cand = u;
    cand.northing = within + 2000000.0 * k;
    if (cand.northing > (u.south ? 10000000.0 : 9400000.0))
      break;
    const double lat = utm_to_latlon(cand).lat;
    double miss = 0.0;
    if (lat < band_south) miss = band_south - lat;
    else if (lat > band_north) miss = lat - band_north;
    miss += 1e-6 * std::abs(lat - band_mid);
    if (miss < best_miss) {
      best_miss = miss;
      best = cand.northing;
    }
  }
  if (best < 0.0 || best_miss > 1.0)
    throw Error("bad_mgrs", "square does not fall inside its latitude band");
  u.northing = best;
  return u;
}

/// Centre of the square.
inline LatLon mgrs_to_latlon(const MgrsIndex& idx)
{
  Utm u = mgrs_to_utm(idx);
  u.easting += 0.5 * idx.precision_m;
  u.northing += 0.5 * idx.precision_m;
  return utm_to_latlon(u);
}

inline MgrsIndex parse_mgrs(std::string_view s)
{
  std::string t;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c)))
      t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  std::size_t p = 0;
  while (p < t.size() && p < 2 && std::isdigit(static_cast<unsigned char>(t[p])))
    ++p;
  if (p == 0 || t.size() < p + 3)
    throw Error("bad_mgrs", "malformed MGRS reference '" + std::string(s) + "'");
  MgrsIndex idx;
  idx.zone = std::stoi(t.substr(0, p));
  idx.band = t[p];
  idx.column = t[p + 1];
  idx.row = t[p + 2];
  const std::string digits = t.substr(p + 3);
  for (char c : digits)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw Error("bad_mgrs", "malformed MGRS reference '" + std::string(s) + "'");
  switch (digits.size()) {
    case 10: idx.precision_m = 1; break;
    case 8: idx.precision_m = 10; break;
    case 6: idx.precision_m = 100; break;
    default: throw Error("bad_mgrs", "MGRS reference must carry 6, 8 or 10 digits");
  }
  const std::size_t half = digits.size() / 2;
  idx.easting = std::stol(digits.substr(0, half));
  idx.northing = std::stol(digits.substr(half));
  mgrs_to_utm(idx); // validates letters and band
  return idx;
}

/// Geodesic distance on the ellipsoid-free sphere approximation (haversine, mean radius).
inline double haversine_m(const LatLon& p, const LatLon& q)
{
  constexpr double r = 6371008.8;
  const double dlat = detail::deg2rad(q.lat - p.lat);
  const double dlon = detail::deg2rad(q.lon - p.lon);
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(detail::deg2rad(p.lat)) * std::cos(detail::deg2rad(q.lat)) *
                     std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * r * std::asin(std::min(1.0, std::sqrt(h)));
}

} // namespace noisemap::geo
