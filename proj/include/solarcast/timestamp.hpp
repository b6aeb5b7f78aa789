#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace solarcast {

using Date = std::chrono::sys_days;

/// An instant plus the UTC offset of the wall clock it was recorded on.
///
/// Ordering and equality are on the instant only; two labels for the
/// same instant with different offsets compare equal.
struct Timestamp {
  std::chrono::sys_seconds utc{};
  int offset_minutes = 0;

  static Timestamp from_utc(std::chrono::sys_seconds utc, int offset_minutes = 0) {
    return Timestamp{utc, offset_minutes};
  }

  /// Builds a timestamp from wall-clock fields and an offset.
  static Timestamp from_local(int year, unsigned month, unsigned day, int hour, int minute,
                              int second, int offset_minutes);

  std::chrono::sys_seconds local_seconds() const {
    return utc + std::chrono::minutes(offset_minutes);
  }
  Date local_date() const { return std::chrono::floor<std::chrono::days>(local_seconds()); }
  int local_hour() const;

  std::int64_t unix_seconds() const { return utc.time_since_epoch().count(); }

  Timestamp operator+(std::chrono::seconds d) const { return Timestamp{utc + d, offset_minutes}; }

  friend bool operator==(const Timestamp& a, const Timestamp& b) { return a.utc == b.utc; }
  friend std::strong_ordering operator<=>(const Timestamp& a, const Timestamp& b) {
    return a.utc <=> b.utc;
  }
};

/// Parses `YYYY-MM-DDTHH:MM[:SS](Z|±HH:MM)`; a space may replace `T`.
/// Throws ValidationError on anything else.
Timestamp parse_timestamp(std::string_view text);

/// ISO-8601 with explicit offset, e.g. `2021-05-07T12:00:00+02:00`.
std::string format_timestamp(const Timestamp& t);

Date parse_date(std::string_view text);
std::string format_date(Date d);

int civil_year(Date d);
unsigned civil_month(Date d);
Date make_date(int year, unsigned month, unsigned day);
Date first_of_month(Date d);

}  // namespace solarcast
