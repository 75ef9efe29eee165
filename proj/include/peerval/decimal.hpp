#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace peerval {

/// Exact base-10 fixed-point value: mantissa * 10^-scale.
///
/// Used for monetary amounts so that ledger totals are exact. Values are
/// kept normalized (no trailing zeros in the mantissa), so two equal amounts
/// always have identical representations and compare with ==.
class Decimal {
 public:
  constexpr Decimal() = default;
  static Decimal from_int(std::int64_t v);

  /// Parses "12", "-0.25", "1.0", "4e-3". Throws ParseError on anything else.
  static Decimal parse(std::string_view text);

  Decimal operator+(const Decimal& o) const;
  Decimal operator-(const Decimal& o) const;
  Decimal operator*(const Decimal& o) const;
  Decimal& operator+=(const Decimal& o) { return *this = *this + o; }

  /// Exact division by 10^n.
  Decimal shifted_down(int n) const;

  bool is_negative() const { return mantissa_ < 0; }
  bool is_zero() const { return mantissa_ == 0; }

  /// Shortest exact rendering, always with at least one fractional digit
  /// ("1.0", "41.0", "0.000123").
  std::string to_string() const;
  double to_double() const;

  std::strong_ordering operator<=>(const Decimal& o) const;
  bool operator==(const Decimal& o) const = default;

 private:
  Decimal(__int128 mantissa, int scale);
  void normalize();

  __int128 mantissa_ = 0;
  int scale_ = 0;
};

}  // namespace peerval
