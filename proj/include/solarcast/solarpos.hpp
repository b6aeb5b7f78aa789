#pragma once

#include <span>

#include "solarcast/geo.hpp"
#include "solarcast/timestamp.hpp"

namespace solarcast {

/// Apparent solar position in degrees.
///
/// `zenith` is measured from the local vertical and includes atmospheric
/// refraction, in [0, 180]. `azimuth` is measured clockwise from due south
/// (south = 0, west = 90, north = 180, east = 270), in [0, 360).
struct SolarPosition {
  double zenith = 0.0;
  double azimuth = 0.0;
};

/// Continuous Julian day of the instant (J2000.0 = 2451545.0 at 2000-01-01 12:00 UTC).
double julian_time(const Timestamp& t);

/// Sun position at `t` seen from `loc`.
///
/// NOAA/Meeus low-precision ephemeris (about 0.01 deg over 1900-2100) with
/// the NOAA refraction model. The ephemeris yields a north-referenced
/// azimuth; it is rotated by 180 deg to the south-referenced convention.
/// Throws OutOfRangeError outside years 1900-2100, ValidationError on a bad coordinate.
SolarPosition solar_position(const Timestamp& t, const GeoCoordinate& loc);

/// Arithmetic mean of longitudes and latitudes.
GeoCoordinate reference_coordinate(std::span<const GeoCoordinate> grid);

}  // namespace solarcast
