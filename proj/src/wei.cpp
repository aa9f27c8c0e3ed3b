#include "solarchain/wei.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace solarchain {

namespace {
constexpr Wei::rep kMax = std::numeric_limits<Wei::rep>::max();
constexpr Wei::rep kTokenScale = 1'000'000'000'000'000'000ULL;
}  // namespace

Wei Wei::tokens(std::uint64_t whole_tokens) {
  return Wei(static_cast<rep>(whole_tokens) * kTokenScale);
}

Wei Wei::parse(std::string_view digits) {
  if (digits.empty()) throw std::invalid_argument("empty wei amount");
  rep v = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') {
      throw std::invalid_argument("wei amount must be a non-negative integer string");
    }
    const rep d = static_cast<rep>(c - '0');
    if (v > (kMax - d) / 10) throw std::invalid_argument("wei amount overflows 128 bits");
    v = v * 10 + d;
  }
  return Wei(v);
}

Wei Wei::parse_tokens(std::string_view decimal) {
  const auto dot = decimal.find('.');
  const std::string_view whole = decimal.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : decimal.substr(dot + 1);
  if (frac.size() > 18) throw std::invalid_argument("more than 18 fractional digits");
  if (whole.empty() && frac.empty()) throw std::invalid_argument("empty token amount");
  const Wei w = whole.empty() ? Wei() : parse(whole);
  std::string padded(frac);
  padded.append(18 - frac.size(), '0');
  const auto scaled = w.checked_mul(kTokenScale);
  if (!scaled) throw std::invalid_argument("token amount overflows 128 bits");
  const auto sum = scaled->checked_add(parse(padded));
  if (!sum) throw std::invalid_argument("token amount overflows 128 bits");
  return *sum;
}

std::string Wei::to_string() const {
  if (value_ == 0) return "0";
  std::string out;
  rep v = value_;
  while (v != 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::string Wei::to_token_string() const {
  std::string frac = Wei(value_ % kTokenScale).to_string();
  frac.insert(0, 18 - frac.size(), '0');
  return Wei(value_ / kTokenScale).to_string() + "." + frac;
}

std::string Wei::to_token_string(int places) const {
  if (places < 0 || places > 18) throw std::invalid_argument("places must be in [0, 18]");
  rep unit = 1;
  for (int i = 0; i < 18 - places; ++i) unit *= 10;
  rep scaled = value_ / unit;
  if (unit > 1 && value_ % unit >= unit / 2) ++scaled;
  rep denom = 1;
  for (int i = 0; i < places; ++i) denom *= 10;
  std::string whole = Wei(scaled / denom).to_string();
  if (places == 0) return whole;
  std::string frac = Wei(scaled % denom).to_string();
  frac.insert(0, static_cast<std::size_t>(places) - frac.size(), '0');
  return whole + "." + frac;
}

double Wei::to_tokens() const {
  return static_cast<double>(value_ / kTokenScale) +
         static_cast<double>(value_ % kTokenScale) / 1e18;
}

std::optional<Wei> Wei::checked_add(Wei other) const {
  if (value_ > kMax - other.value_) return std::nullopt;
  return Wei(value_ + other.value_);
}

std::optional<Wei> Wei::checked_sub(Wei other) const {
  if (other.value_ > value_) return std::nullopt;
  return Wei(value_ - other.value_);
}

std::optional<Wei> Wei::checked_mul(rep factor) const {
  if (factor != 0 && value_ > kMax / factor) return std::nullopt;
  return Wei(value_ * factor);
}

}  // namespace solarchain
