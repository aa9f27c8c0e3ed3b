#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace solarchain {

/// Smallest token denomination. 1 SOLR = 10^18 wei.
///
/// Backed by an unsigned 128-bit integer so the default cap (10^27 wei) and
/// intermediate products fit. Arithmetic is explicit and checked: callers get
/// an empty optional on overflow or underflow instead of a wrapped value.
class Wei {
 public:
  using rep = unsigned __int128;

  constexpr Wei() = default;
  constexpr explicit Wei(rep v) : value_(v) {}

  static constexpr Wei from_u64(std::uint64_t v) { return Wei(static_cast<rep>(v)); }
  static constexpr Wei one_token() { return Wei(static_cast<rep>(1'000'000'000'000'000'000ULL)); }
  static Wei tokens(std::uint64_t whole_tokens);

  /// Decimal digits only; throws std::invalid_argument on anything else or overflow.
  static Wei parse(std::string_view digits);
  /// Decimal token amount such as "12.3450" (at most 18 fractional digits).
  static Wei parse_tokens(std::string_view decimal);

  constexpr rep raw() const { return value_; }
  constexpr bool is_zero() const { return value_ == 0; }

  std::string to_string() const;
  /// Token amount with all 18 fractional digits, e.g. "1.000000000000000000".
  std::string to_token_string() const;
  /// Token amount rounded half-up to `places` decimals.
  std::string to_token_string(int places) const;
  double to_tokens() const;

  std::optional<Wei> checked_add(Wei other) const;
  std::optional<Wei> checked_sub(Wei other) const;
  std::optional<Wei> checked_mul(rep factor) const;

  constexpr auto operator<=>(const Wei&) const = default;

 private:
  rep value_ = 0;
};

}  // namespace solarchain
