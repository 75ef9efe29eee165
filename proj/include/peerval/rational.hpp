#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "peerval/error.hpp"

namespace peerval {

/// Normalized fraction of two 64-bit integers (denominator > 0).
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) {
    if (den_ == 0) throw UndefinedMetric("rational with zero denominator");
    normalize();
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  Rational operator+(const Rational& o) const { return {mul(num_, o.den_) + mul(o.num_, den_), mul(den_, o.den_)}; }
  Rational operator-(const Rational& o) const { return {mul(num_, o.den_) - mul(o.num_, den_), mul(den_, o.den_)}; }
  Rational operator*(const Rational& o) const { return {mul(num_, o.num_), mul(den_, o.den_)}; }
  Rational operator/(const Rational& o) const {
    if (o.num_ == 0) throw UndefinedMetric("division by zero");
    return {mul(num_, o.den_), mul(den_, o.num_)};
  }

  bool operator==(const Rational&) const = default;
  auto operator<=>(const Rational& o) const { return static_cast<__int128>(num_) * o.den_ <=> static_cast<__int128>(o.num_) * den_; }

  int sign() const { return (num_ > 0) - (num_ < 0); }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// Decimal rendering with `digits` fractional digits, rounded half away
  /// from zero. Exact for any representable value.
  std::string to_fixed(int digits) const {
    __int128 scale = 1;
    for (int i = 0; i < digits; ++i) scale *= 10;
    const bool neg = num_ < 0;
    const __int128 n = (neg ? -static_cast<__int128>(num_) : num_) * scale;
    __int128 q = n / den_;
    if ((n % den_) * 2 >= den_) ++q;
    std::string frac;
    for (int i = 0; i < digits; ++i) {
      frac.insert(frac.begin(), static_cast<char>('0' + static_cast<int>(q % 10)));
      q /= 10;
    }
    std::string whole;
    do {
      whole.insert(whole.begin(), static_cast<char>('0' + static_cast<int>(q % 10)));
      q /= 10;
    } while (q > 0);
    std::string out = (neg && (whole != "0" || frac.find_first_not_of('0') != std::string::npos)) ? "-" : "";
    out += whole;
    if (digits > 0) out += "." + frac;
    return out;
  }

 private:
  static std::int64_t mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw RangeError("rational overflow");
    return r;
  }
  void normalize() {
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    const std::int64_t g = std::gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace peerval
