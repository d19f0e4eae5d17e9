#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "newsalpha/core/error.hpp"

namespace newsalpha {

using Timestamp = std::chrono::sys_seconds;

// A calendar day. Ordered, hashable through `serial()`.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days d) : days_(d) {}
  constexpr Date(int y, unsigned m, unsigned d)
      : days_(std::chrono::year_month_day{std::chrono::year{y},
                                          std::chrono::month{m},
                                          std::chrono::day{d}}) {}

  constexpr std::chrono::sys_days sys() const { return days_; }
  constexpr std::int64_t serial() const { return days_.time_since_epoch().count(); }
  constexpr std::chrono::year_month_day ymd() const { return {days_}; }

  // 0 = Sunday ... 6 = Saturday
  unsigned weekday() const { return std::chrono::weekday{days_}.c_encoding(); }
  bool is_weekend() const {
    const unsigned w = weekday();
    return w == 0 || w == 6;
  }

  Date plus_days(int n) const { return Date(days_ + std::chrono::days{n}); }

  std::string iso() const {
    const auto d = ymd();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()),
                  unsigned(d.month()), unsigned(d.day()));
    return buf;
  }

  static Date parse(std::string_view s) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    const std::string str(s);
    if (str.size() != 10 ||
        std::sscanf(str.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
      throw ConfigError("bad ISO date '" + str + "'");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw ConfigError("invalid calendar date '" + str + "'");
    return Date(std::chrono::sys_days{ymd});
  }

  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

namespace detail {

inline std::chrono::sys_days nth_sunday(int year, unsigned month, unsigned n) {
  using namespace std::chrono;
  return sys_days{year_month_weekday{std::chrono::year{year},
                                     std::chrono::month{month},
                                     weekday_indexed{Sunday, n}}};
}

}  // namespace detail

// US Eastern daylight time: second Sunday of March through the day before the
// first Sunday of November (rules in force since 2007).
inline bool us_eastern_dst(Date d) {
  const int y = int(d.ymd().year());
  return d.sys() >= detail::nth_sunday(y, 3, 2) &&
         d.sys() < detail::nth_sunday(y, 11, 1);
}

// 16:00 America/New_York on `d`, expressed in UTC.
inline Timestamp market_close_utc(Date d) {
  const int utc_hour = us_eastern_dst(d) ? 20 : 21;
  return Timestamp{d.sys()} + std::chrono::hours{utc_hour};
}

inline std::string format_rfc3339(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ",
                int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                int(hms.hours().count()), int(hms.minutes().count()),
                int(hms.seconds().count()));
  return buf;
}

// Accepts "YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)". Fractional seconds
// are truncated.
inline Timestamp parse_rfc3339(std::string_view text) {
  const std::string s(text);
  auto fail = [&]() -> Timestamp {
    throw ConfigError("bad RFC 3339 timestamp '" + s + "'");
  };
  if (s.size() < 20) return fail();
  const Date date = [&] {
    try {
      return Date::parse(s.substr(0, 10));
    } catch (const ConfigError&) {
      fail();
    }
    return Date{};
  }();
  if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return fail();
  int hh = 0, mm = 0, ss = 0;
  if (std::sscanf(s.c_str() + 11, "%2d:%2d:%2d", &hh, &mm, &ss) != 3 ||
      s[13] != ':' || s[16] != ':') {
    return fail();
  }
  if (hh > 23 || mm > 59 || ss > 60) return fail();
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  if (pos >= s.size()) return fail();
  int offset_minutes = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    if (pos + 1 != s.size()) return fail();
  } else if (s[pos] == '+' || s[pos] == '-') {
    int oh = 0, om = 0;
    if (s.size() != pos + 6 || s[pos + 3] != ':' ||
        std::sscanf(s.c_str() + pos + 1, "%2d:%2d", &oh, &om) != 2) {
      return fail();
    }
    offset_minutes = (s[pos] == '+' ? 1 : -1) * (oh * 60 + om);
  } else {
    return fail();
  }
  using namespace std::chrono;
  return Timestamp{date.sys()} + hours{hh} + minutes{mm - offset_minutes} +
         seconds{ss};
}

// Inclusive range of calendar days.
struct DayRange {
  Date first;
  Date last;

  bool contains(Date d) const { return first <= d && d <= last; }
  friend bool operator==(const DayRange&, const DayRange&) = default;
};

}  // namespace newsalpha
