#include <set>

#include <gtest/gtest.h>

#include "newsalpha/core/calendar.hpp"
#include "newsalpha/core/date.hpp"
#include "newsalpha/core/hash.hpp"
#include "newsalpha/core/io.hpp"
#include "newsalpha/core/rng.hpp"
#include "support.hpp"

using namespace newsalpha;

TEST(Date, ParsesAndFormatsIso) {
  const Date d = Date::parse("2025-01-02");
  EXPECT_EQ(d.iso(), "2025-01-02");
  EXPECT_EQ(d, Date(2025, 1, 2));
  EXPECT_THROW(Date::parse("2025-02-30"), ConfigError);
  EXPECT_THROW(Date::parse("2025-1-2"), ConfigError);
}

TEST(Date, MarketCloseFollowsUsDaylightSaving) {
  // 16:00 New York: EST is UTC-5, EDT is UTC-4.
  EXPECT_EQ(format_rfc3339(market_close_utc(Date(2025, 1, 2))), "2025-01-02T21:00:00Z");
  EXPECT_EQ(format_rfc3339(market_close_utc(Date(2025, 7, 1))), "2025-07-01T20:00:00Z");
  // DST starts second Sunday of March 2025 (the 9th), ends first Sunday of November (the 2nd).
  EXPECT_EQ(format_rfc3339(market_close_utc(Date(2025, 3, 7))), "2025-03-07T21:00:00Z");
  EXPECT_EQ(format_rfc3339(market_close_utc(Date(2025, 3, 10))), "2025-03-10T20:00:00Z");
  EXPECT_EQ(format_rfc3339(market_close_utc(Date(2025, 10, 31))), "2025-10-31T20:00:00Z");
  EXPECT_EQ(format_rfc3339(market_close_utc(Date(2025, 11, 3))), "2025-11-03T21:00:00Z");
}

TEST(Date, Rfc3339RoundTripAndOffsets) {
  const Timestamp t = parse_rfc3339("2025-01-02T15:30:00Z");
  EXPECT_EQ(format_rfc3339(t), "2025-01-02T15:30:00Z");
  EXPECT_EQ(parse_rfc3339("2025-01-02T10:30:00-05:00"), t);
  EXPECT_EQ(parse_rfc3339("2025-01-02T15:30:00.123Z"), t);
  EXPECT_THROW(parse_rfc3339("2025-01-02 garbage"), ConfigError);
  EXPECT_THROW(parse_rfc3339("2025-01-02T15:30:00"), ConfigError);
}

TEST(Calendar, WeekdaysSkipWeekends) {
  const auto cal = TradingCalendar::weekdays(Date(2025, 1, 3), 3);  // Friday
  ASSERT_EQ(cal.size(), 3u);
  EXPECT_EQ(cal[1], Date(2025, 1, 6));
  EXPECT_FALSE(cal.contains(Date(2025, 1, 4)));
  EXPECT_EQ(cal.in_range({Date(2025, 1, 4), Date(2025, 1, 7)}).size(), 2u);
}

TEST(Calendar, CsvRoundTripAndParseErrorLine) {
  const auto cal = TradingCalendar::weekdays(Date(2025, 1, 1), 10);
  EXPECT_EQ(TradingCalendar::from_csv(cal.to_csv()).days(), cal.days());
  try {
    TradingCalendar::from_csv("date\n2025-01-02\nnot-a-date\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Hash, FieldSeparationMatters) {
  EXPECT_NE(Fnv1a{}.field("ab").field("c").digest(), Fnv1a{}.field("a").field("bc").digest());
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(parse_hex64(hex64(0x0123456789abcdefULL)), 0x0123456789abcdefULL);
}

TEST(Rng, DeterministicAndUnitInterval) {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_EQ(derive_seed(9, "x", 3), derive_seed(9, "x", 3));
}

TEST(Rng, NormalMoments) {
  Rng r(123);
  double s = 0.0, ss = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}

TEST(Io, AtomicWriteAndRead) {
  testing_support::TempDir dir;
  const auto p = dir / "sub/out.txt";
  io::write_atomic(p, "hello\n");
  EXPECT_EQ(io::read_file(p), "hello\n");
  io::write_atomic(p, "again");
  EXPECT_EQ(io::read_file(p), "again");
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(p.parent_path()),
                          std::filesystem::directory_iterator{}),
            1);
}

TEST(Io, ShortestRoundTripDoubles) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0}) {
    EXPECT_EQ(io::parse_double(io::fmt_double(v)), v);
  }
  EXPECT_EQ(io::fmt_double(0.5), "0.5");
  EXPECT_THROW(io::parse_double("abc"), ConfigError);
  EXPECT_EQ(io::split_lines("a\r\nb\n").size(), 2u);
}
