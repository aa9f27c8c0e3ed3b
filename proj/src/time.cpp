#include "solarchain/time.hpp"

#include <charconv>
#include <cstdlib>

#include <fmt/format.h>

namespace solarchain {

namespace {

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len,
                std::string_view what) {
  if (pos + len > text.size()) {
    throw ParseError(fmt::format("truncated {} in '{}'", what, text));
  }
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') {
      throw ParseError(fmt::format("bad {} in '{}'", what, text));
    }
    value = value * 10 + (c - '0');
  }
  return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw ParseError(fmt::format("expected '{}' at position {} in '{}'", c, pos, text));
  }
}

}  // namespace

CalendarDate CalendarDate::parse(std::string_view text) {
  if (text.size() != 10) {
    throw ParseError(fmt::format("date must be YYYY-MM-DD, got '{}'", text));
  }
  CalendarDate d;
  d.year = parse_fixed(text, 0, 4, "year");
  expect_char(text, 4, '-');
  d.month = static_cast<unsigned>(parse_fixed(text, 5, 2, "month"));
  expect_char(text, 7, '-');
  d.day = static_cast<unsigned>(parse_fixed(text, 8, 2, "day"));
  const std::chrono::year_month_day ymd{std::chrono::year{d.year}, std::chrono::month{d.month},
                                        std::chrono::day{d.day}};
  if (!ymd.ok()) {
    throw ParseError(fmt::format("invalid calendar date '{}'", text));
  }
  return d;
}

std::string CalendarDate::to_string() const {
  return fmt::format("{:04d}-{:02d}-{:02d}", year, month, day);
}

std::chrono::sys_days CalendarDate::to_sys_days() const {
  return std::chrono::sys_days{std::chrono::year{year} / std::chrono::month{month} /
                               std::chrono::day{day}};
}

CalendarDate CalendarDate::from_sys_days(std::chrono::sys_days d) {
  const std::chrono::year_month_day ymd{d};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<unsigned>(ymd.day())};
}

int parse_utc_offset(std::string_view text) {
  if (text == "Z" || text == "z") return 0;
  if (text.size() != 6 || (text[0] != '+' && text[0] != '-')) {
    throw ParseError(fmt::format("missing or malformed UTC offset '{}'", text));
  }
  const int hh = parse_fixed(text, 1, 2, "offset hours");
  expect_char(text, 3, ':');
  const int mm = parse_fixed(text, 4, 2, "offset minutes");
  if (hh > 18 || mm > 59) throw ParseError(fmt::format("offset out of range '{}'", text));
  const int total = hh * 60 + mm;
  return text[0] == '-' ? -total : total;
}

std::string format_utc_offset(int offset_minutes) {
  const char sign = offset_minutes < 0 ? '-' : '+';
  const int a = std::abs(offset_minutes);
  return fmt::format("{}{:02d}:{:02d}", sign, a / 60, a % 60);
}

Timestamp Timestamp::from_local(CalendarDate date, int hour, int minute, int second,
                                int offset_minutes) {
  const auto days = date.to_sys_days().time_since_epoch().count();
  const std::int64_t local = static_cast<std::int64_t>(days) * 86400 + hour * 3600 +
                             minute * 60 + second;
  return {local - static_cast<std::int64_t>(offset_minutes) * 60, offset_minutes};
}

Timestamp Timestamp::parse(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS then offset; fractional seconds are not accepted.
  if (text.size() < 20) {
    throw ParseError(fmt::format("timestamp '{}' lacks a UTC offset", text));
  }
  const CalendarDate date = CalendarDate::parse(text.substr(0, 10));
  if (text[10] != 'T' && text[10] != ' ') {
    throw ParseError(fmt::format("expected 'T' separator in '{}'", text));
  }
  const int hh = parse_fixed(text, 11, 2, "hour");
  expect_char(text, 13, ':');
  const int mi = parse_fixed(text, 14, 2, "minute");
  expect_char(text, 16, ':');
  const int ss = parse_fixed(text, 17, 2, "second");
  if (hh > 23 || mi > 59 || ss > 60) {
    throw ParseError(fmt::format("time of day out of range in '{}'", text));
  }
  const int offset = parse_utc_offset(text.substr(19));
  return from_local(date, hh, mi, ss, offset);
}

std::string Timestamp::to_iso() const {
  const std::int64_t local = utc_seconds_ + static_cast<std::int64_t>(offset_minutes_) * 60;
  std::int64_t days = local / 86400;
  std::int64_t sod = local % 86400;
  if (sod < 0) {
    sod += 86400;
    --days;
  }
  const CalendarDate d =
      CalendarDate::from_sys_days(std::chrono::sys_days{std::chrono::days{days}});
  const auto offset = offset_minutes_ == 0 ? std::string("+00:00")
                                           : format_utc_offset(offset_minutes_);
  return fmt::format("{}T{:02d}:{:02d}:{:02d}{}", d.to_string(), sod / 3600, (sod / 60) % 60,
                     sod % 60, offset);
}

int Timestamp::utc_day_of_year() const {
  std::int64_t days = utc_seconds_ / 86400;
  if (utc_seconds_ % 86400 < 0) --days;
  const std::chrono::sys_days today{std::chrono::days{days}};
  const std::chrono::year_month_day ymd{today};
  const std::chrono::sys_days jan1{ymd.year() / std::chrono::January / 1};
  return static_cast<int>((today - jan1).count()) + 1;
}

double Timestamp::utc_hour() const {
  std::int64_t sod = utc_seconds_ % 86400;
  if (sod < 0) sod += 86400;
  return static_cast<double>(sod) / 3600.0;
}

}  // namespace solarchain
