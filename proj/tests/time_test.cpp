#include <gtest/gtest.h>

#include "solarchain/time.hpp"

using solarchain::CalendarDate;
using solarchain::ParseError;
using solarchain::Timestamp;

TEST(Timestamp, ParsesOffsetAndRoundTrips) {
  const auto t = Timestamp::parse("2026-05-01T06:00:00+08:00");
  EXPECT_EQ(t.offset_minutes(), 480);
  EXPECT_EQ(t.to_iso(), "2026-05-01T06:00:00+08:00");
  EXPECT_DOUBLE_EQ(t.utc_hour(), 22.0);  // previous UTC day
  EXPECT_EQ(t.utc_day_of_year(), 120);   // 30 April
}

TEST(Timestamp, SameInstantDifferentOffsetsCompareEqual) {
  EXPECT_EQ(Timestamp::parse("2026-05-01T08:00:00+08:00"),
            Timestamp::parse("2026-05-01T00:00:00Z"));
}

TEST(Timestamp, RejectsMissingOffset) {
  EXPECT_THROW(Timestamp::parse("2026-05-01T06:00:00"), ParseError);
  EXPECT_THROW(Timestamp::parse("2026-05-01 06:00"), ParseError);
  EXPECT_THROW(Timestamp::parse("2026-13-01T06:00:00+08:00"), ParseError);
}

TEST(Timestamp, NegativeOffsetFormatting) {
  const auto t = Timestamp::from_local(CalendarDate{2026, 1, 1}, 0, 30, 0, -330);
  EXPECT_EQ(t.to_iso(), "2026-01-01T00:30:00-05:30");
}

TEST(CalendarDate, ParseAndValidate) {
  EXPECT_EQ(CalendarDate::parse("2022-03-29").to_string(), "2022-03-29");
  EXPECT_THROW(CalendarDate::parse("2022-02-30"), ParseError);
  EXPECT_THROW(CalendarDate::parse("22-02-03"), ParseError);
}
