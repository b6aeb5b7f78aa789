#include "solarcast/solarpos.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "solarcast/error.hpp"

namespace solarcast {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap360(double x) {
  x = std::fmod(x, 360.0);
  return x < 0.0 ? x + 360.0 : x;
}

// Refraction correction in degrees for a geometric elevation in degrees.
double refraction(double elevation) {
  if (elevation > 85.0) return 0.0;
  double arcsec = 0.0;
  if (elevation > 5.0) {
    const double te = std::tan(elevation * kDeg);
    arcsec = 58.1 / te - 0.07 / (te * te * te) + 0.000086 / std::pow(te, 5);
  } else if (elevation > -0.575) {
    const double e = elevation;
    arcsec = 1735.0 + e * (-518.2 + e * (103.4 + e * (-12.79 + e * 0.711)));
  } else {
    arcsec = -20.772 / std::tan(elevation * kDeg);
  }
  return arcsec / 3600.0;
}

}  // namespace

double julian_time(const Timestamp& t) {
  return static_cast<double>(t.unix_seconds()) / 86400.0 + 2440587.5;
}

SolarPosition solar_position(const Timestamp& t, const GeoCoordinate& loc) {
  loc.validate();
  const int year = civil_year(std::chrono::floor<std::chrono::days>(t.utc));
  if (year < 1900 || year > 2100)
    throw OutOfRangeError("solar position is only valid for years 1900-2100, got " +
                          std::to_string(year));

  const double jd = julian_time(t);
  const double T = (jd - 2451545.0) / 36525.0;

  const double mean_long = wrap360(280.46646 + T * (36000.76983 + T * 0.0003032));
  const double mean_anom = 357.52911 + T * (35999.05029 - 0.0001537 * T);
  const double ecc = 0.016708634 - T * (0.000042037 + 0.0000001267 * T);
  const double m = mean_anom * kDeg;
  const double center = std::sin(m) * (1.914602 - T * (0.004817 + 0.000014 * T)) +
                        std::sin(2 * m) * (0.019993 - 0.000101 * T) + std::sin(3 * m) * 0.000289;
  const double true_long = mean_long + center;
  const double omega = (125.04 - 1934.136 * T) * kDeg;
  const double app_long = (true_long - 0.00569 - 0.00478 * std::sin(omega)) * kDeg;

  const double obliq_mean =
      23.0 + (26.0 + (21.448 - T * (46.815 + T * (0.00059 - T * 0.001813))) / 60.0) / 60.0;
  const double obliq = (obliq_mean + 0.00256 * std::cos(omega)) * kDeg;
  const double decl = std::asin(std::sin(obliq) * std::sin(app_long));

  const double y = std::pow(std::tan(obliq / 2.0), 2);
  const double l0 = mean_long * kDeg;
  const double eot_min =
      4.0 / kDeg *
      (y * std::sin(2 * l0) - 2 * ecc * std::sin(m) + 4 * ecc * y * std::sin(m) * std::cos(2 * l0) -
       0.5 * y * y * std::sin(4 * l0) - 1.25 * ecc * ecc * std::sin(2 * m));

  // Minutes since 00:00 UTC.
  const double utc_minutes = static_cast<double>((t.unix_seconds() % 86400 + 86400) % 86400) / 60.0;
  const double solar_time = std::fmod(utc_minutes + eot_min + 4.0 * loc.lon + 2880.0, 1440.0);
  const double hour_angle = (solar_time / 4.0 - 180.0) * kDeg;

  const double lat = loc.lat * kDeg;
  double cos_zen =
      std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
  cos_zen = std::clamp(cos_zen, -1.0, 1.0);
  const double zenith_geo = std::acos(cos_zen) / kDeg;
  const double zenith = std::clamp(zenith_geo - refraction(90.0 - zenith_geo), 0.0, 180.0);

  // Meeus: azimuth measured westward from south.
  const double az = std::atan2(std::sin(hour_angle), std::cos(hour_angle) * std::sin(lat) -
                                                          std::tan(decl) * std::cos(lat)) /
                    kDeg;
  double azimuth = wrap360(az);
  if (azimuth >= 360.0) azimuth = 0.0;
  return {zenith, azimuth};
}

GeoCoordinate reference_coordinate(std::span<const GeoCoordinate> grid) {
  if (grid.empty()) throw ValidationError("reference coordinate of an empty grid");
  double lon = 0.0, lat = 0.0;
  for (const auto& c : grid) {
    c.validate();
    lon += c.lon;
    lat += c.lat;
  }
  const double n = static_cast<double>(grid.size());
  return {lon / n, lat / n};
}

}  // namespace solarcast
