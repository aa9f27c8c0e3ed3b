#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace solarchain {

/// Thrown when a timestamp or date string cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Calendar date without time of day.
struct CalendarDate {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;

  static CalendarDate parse(std::string_view text);  // YYYY-MM-DD
  std::string to_string() const;
  std::chrono::sys_days to_sys_days() const;
  static CalendarDate from_sys_days(std::chrono::sys_days d);

  auto operator<=>(const CalendarDate&) const = default;
};

/// An instant plus the fixed UTC offset it is displayed in.
///
/// Ordering and equality consider the instant only; the offset is presentation.
class Timestamp {
 public:
  Timestamp() = default;
  Timestamp(std::int64_t utc_seconds, int offset_minutes)
      : utc_seconds_(utc_seconds), offset_minutes_(offset_minutes) {}

  /// Local wall-clock date and time in the given offset.
  static Timestamp from_local(CalendarDate date, int hour, int minute, int second,
                              int offset_minutes);

  /// ISO 8601 with mandatory offset, e.g. 2026-05-01T06:00:00+08:00 or ...Z.
  static Timestamp parse(std::string_view text);

  std::string to_iso() const;

  std::int64_t utc_seconds() const { return utc_seconds_; }
  int offset_minutes() const { return offset_minutes_; }

  /// Fractional day-of-year (1-based) and hour of the UTC instant.
  int utc_day_of_year() const;
  double utc_hour() const;

  Timestamp plus_seconds(std::int64_t s) const {
    return {utc_seconds_ + s, offset_minutes_};
  }

  friend bool operator==(const Timestamp& a, const Timestamp& b) {
    return a.utc_seconds_ == b.utc_seconds_;
  }
  friend auto operator<=>(const Timestamp& a, const Timestamp& b) {
    return a.utc_seconds_ <=> b.utc_seconds_;
  }

 private:
  std::int64_t utc_seconds_ = 0;
  int offset_minutes_ = 0;
};

/// Parses "+08:00", "-05:30" or "Z".
int parse_utc_offset(std::string_view text);
std::string format_utc_offset(int offset_minutes);

}  // namespace solarchain
