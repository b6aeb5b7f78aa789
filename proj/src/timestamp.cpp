#include "solarcast/timestamp.hpp"

#include <charconv>
#include <cstdio>

#include "solarcast/error.hpp"

namespace solarcast {

namespace {

using namespace std::chrono;

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  const char* first = text.data() + pos;
  const char* last = first + len;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

[[noreturn]] void bad_timestamp(std::string_view text) {
  throw ValidationError("unparseable timestamp '" + std::string(text) + "'");
}

}  // namespace

Timestamp Timestamp::from_local(int year, unsigned month, unsigned day, int hour, int minute,
                                int second, int offset_minutes) {
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok()) throw ValidationError("invalid calendar date");
  const sys_seconds local = sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second};
  return Timestamp{local - minutes{offset_minutes}, offset_minutes};
}

int Timestamp::local_hour() const {
  const auto since_midnight = local_seconds() - local_date();
  return static_cast<int>(duration_cast<hours>(since_midnight).count());
}

Timestamp parse_timestamp(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (text.size() < 16 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':')
    bad_timestamp(text);
  if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, mo) || !read_int(text, 8, 2, d) ||
      !read_int(text, 11, 2, h) || !read_int(text, 14, 2, mi))
    bad_timestamp(text);
  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    if (!read_int(text, pos + 1, 2, s)) bad_timestamp(text);
    pos += 3;
  }
  int offset = 0;
  if (pos >= text.size()) bad_timestamp(text);  // offset is mandatory
  if (text[pos] == 'Z') {
    ++pos;
  } else if (text[pos] == '+' || text[pos] == '-') {
    int oh = 0, om = 0;
    if (!read_int(text, pos + 1, 2, oh)) bad_timestamp(text);
    std::size_t mpos = pos + 3;
    if (mpos < text.size() && text[mpos] == ':') ++mpos;
    if (!read_int(text, mpos, 2, om)) bad_timestamp(text);
    offset = (oh * 60 + om) * (text[pos] == '-' ? -1 : 1);
    pos = mpos + 2;
  } else {
    bad_timestamp(text);
  }
  if (pos != text.size() || h > 23 || mi > 59 || s > 60) bad_timestamp(text);
  try {
    return Timestamp::from_local(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi,
                                 s, offset);
  } catch (const ValidationError&) {
    bad_timestamp(text);
  }
}

std::string format_timestamp(const Timestamp& t) {
  const auto local = t.local_seconds();
  const auto day = floor<days>(local);
  const year_month_day ymd{day};
  const hh_mm_ss tod{local - day};
  const int off = t.offset_minutes;
  const int aoff = off < 0 ? -off : off;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d%c%02d:%02d",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(tod.hours().count()),
                static_cast<int>(tod.minutes().count()), static_cast<int>(tod.seconds().count()),
                off < 0 ? '-' : '+', aoff / 60, aoff % 60);
  return buf;
}

Date parse_date(std::string_view text) {
  int y = 0, mo = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !read_int(text, 0, 4, y) ||
      !read_int(text, 5, 2, mo) || !read_int(text, 8, 2, d))
    throw ValidationError("unparseable date '" + std::string(text) + "'");
  const year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                           std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw ValidationError("invalid date '" + std::string(text) + "'");
  return sys_days{ymd};
}

std::string format_date(Date d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int civil_year(Date d) { return static_cast<int>(year_month_day{d}.year()); }
unsigned civil_month(Date d) { return static_cast<unsigned>(year_month_day{d}.month()); }

Date make_date(int year, unsigned month, unsigned day) {
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok()) throw ValidationError("invalid calendar date");
  return sys_days{ymd};
}

Date first_of_month(Date d) {
  const year_month_day ymd{d};
  return sys_days{ymd.year() / ymd.month() / std::chrono::day{1}};
}

}  // namespace solarcast
