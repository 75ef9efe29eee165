#include "peerval/decimal.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "peerval/error.hpp"

namespace peerval {
namespace {

constexpr int kMaxScale = 30;

__int128 checked_mul(__int128 a, __int128 b) {
  __int128 r;
  if (__builtin_mul_overflow(a, b, &r)) throw RangeError("decimal overflow");
  return r;
}

__int128 checked_add(__int128 a, __int128 b) {
  __int128 r;
  if (__builtin_add_overflow(a, b, &r)) throw RangeError("decimal overflow");
  return r;
}

__int128 pow10(int n) {
  __int128 r = 1;
  for (int i = 0; i < n; ++i) r = checked_mul(r, 10);
  return r;
}

}  // namespace

Decimal::Decimal(__int128 mantissa, int scale) : mantissa_(mantissa), scale_(scale) { normalize(); }

void Decimal::normalize() {
  if (mantissa_ == 0) {
    scale_ = 0;
    return;
  }
  while (scale_ > 0 && mantissa_ % 10 == 0) {
    mantissa_ /= 10;
    --scale_;
  }
  while (scale_ < 0) {
    mantissa_ = checked_mul(mantissa_, 10);
    ++scale_;
  }
  if (scale_ > kMaxScale) throw RangeError("decimal scale exceeds 30 fractional digits");
}

Decimal Decimal::from_int(std::int64_t v) { return Decimal(v, 0); }

Decimal Decimal::parse(std::string_view text) {
  auto fail = [&]() -> Decimal { throw ParseError("invalid decimal literal '" + std::string(text) + "'"); };
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) negative = text[i++] == '-';
  __int128 mantissa = 0;
  int scale = 0;
  bool any_digit = false;
  bool in_fraction = false;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.') {
      if (in_fraction) return fail();
      in_fraction = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      any_digit = true;
      mantissa = checked_add(checked_mul(mantissa, 10), c - '0');
      if (in_fraction) ++scale;
    } else if (c == 'e' || c == 'E') {
      break;
    } else {
      return fail();
    }
  }
  if (!any_digit) return fail();
  if (i < text.size()) {
    int exponent = 0;
    const auto rest = text.substr(i + 1);
    const char* begin = rest.data();
    if (!rest.empty() && rest.front() == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, rest.data() + rest.size(), exponent);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || begin == ptr) return fail();
    scale -= exponent;
  }
  return Decimal(negative ? -mantissa : mantissa, scale);
}

Decimal Decimal::operator+(const Decimal& o) const {
  const int scale = std::max(scale_, o.scale_);
  return Decimal(checked_add(checked_mul(mantissa_, pow10(scale - scale_)),
                             checked_mul(o.mantissa_, pow10(scale - o.scale_))),
                 scale);
}

Decimal Decimal::operator-(const Decimal& o) const { return *this + Decimal(-o.mantissa_, o.scale_); }

Decimal Decimal::operator*(const Decimal& o) const {
  return Decimal(checked_mul(mantissa_, o.mantissa_), scale_ + o.scale_);
}

Decimal Decimal::shifted_down(int n) const { return Decimal(mantissa_, scale_ + n); }

std::strong_ordering Decimal::operator<=>(const Decimal& o) const {
  const Decimal diff = *this - o;
  if (diff.mantissa_ < 0) return std::strong_ordering::less;
  if (diff.mantissa_ > 0) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::string Decimal::to_string() const {
  __int128 m = mantissa_ < 0 ? -mantissa_ : mantissa_;
  std::string digits;
  do {
    digits.push_back(static_cast<char>('0' + static_cast<int>(m % 10)));
    m /= 10;
  } while (m > 0);
  while (static_cast<int>(digits.size()) <= scale_) digits.push_back('0');
  std::reverse(digits.begin(), digits.end());
  std::string out = mantissa_ < 0 ? "-" : "";
  const std::size_t int_len = digits.size() - static_cast<std::size_t>(scale_);
  out += digits.substr(0, int_len);
  out += '.';
  out += scale_ == 0 ? "0" : digits.substr(int_len);
  return out;
}

double Decimal::to_double() const { return std::stod(to_string()); }

}  // namespace peerval
