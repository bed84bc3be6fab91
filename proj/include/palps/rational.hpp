#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <string>

namespace palps {

// Exact rational over 64-bit words. Arithmetic runs through 128-bit
// intermediates and reports overflow instead of wrapping; Value (below)
// degrades to double when exactness is lost.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;  // > 0, gcd(|num|, den) == 1

  constexpr Rational() = default;
  constexpr Rational(std::int64_t n) : num(n), den(1) {}

  static std::optional<Rational> make(__int128 n, __int128 d) {
    if (d == 0) return std::nullopt;
    if (d < 0) { n = -n; d = -d; }
    __int128 g = gcd128(n < 0 ? -n : n, d);
    if (g > 1) { n /= g; d /= g; }
    if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX) return std::nullopt;
    Rational r;
    r.num = static_cast<std::int64_t>(n);
    r.den = static_cast<std::int64_t>(d);
    return r;
  }

  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator!=(const Rational& o) const { return !(*this == o); }

  // exact three-way compare
  int compare(const Rational& o) const {
    __int128 l = static_cast<__int128>(num) * o.den;
    __int128 r = static_cast<__int128>(o.num) * den;
    return l < r ? -1 : l > r ? 1 : 0;
  }

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  bool is_integer() const { return den == 1; }

  std::string str() const {
    std::string s = std::to_string(num);
    if (den != 1) s += "/" + std::to_string(den);
    return s;
  }

  static std::optional<Rational> add(const Rational& a, const Rational& b) {
    return make(static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den,
                static_cast<__int128>(a.den) * b.den);
  }
  static std::optional<Rational> sub(const Rational& a, const Rational& b) {
    return make(static_cast<__int128>(a.num) * b.den - static_cast<__int128>(b.num) * a.den,
                static_cast<__int128>(a.den) * b.den);
  }
  static std::optional<Rational> mul(const Rational& a, const Rational& b) {
    return make(static_cast<__int128>(a.num) * b.num, static_cast<__int128>(a.den) * b.den);
  }
  static std::optional<Rational> div(const Rational& a, const Rational& b) {
    if (b.num == 0) return std::nullopt;
    return make(static_cast<__int128>(a.num) * b.den, static_cast<__int128>(a.den) * b.num);
  }

 private:
  static constexpr __int128 gcd128(__int128 a, __int128 b) {
    while (b != 0) { __int128 t = a % b; a = b; b = t; }
    return a < 0 ? -a : a;
  }
};

// A numeric value that stays an exact rational as long as the arithmetic
// permits (probability products, weight sums) and otherwise carries a double.
class Value {
 public:
  Value() : exact_(true), rat_(0), approx_(0.0) {}
  Value(const Rational& r) : exact_(true), rat_(r), approx_(r.to_double()) {}
  static Value integer(std::int64_t n) { return Value(Rational(n)); }
  static Value real(double d) {
    Value v;
    v.exact_ = false;
    v.approx_ = d;
    return v;
  }

  bool exact() const { return exact_; }
  const Rational& rat() const { return rat_; }  // meaningful only when exact()
  double to_double() const { return exact_ ? rat_.to_double() : approx_; }

  friend Value operator+(const Value& a, const Value& b) { return combine(a, b, Rational::add, std::plus<double>()); }
  friend Value operator-(const Value& a, const Value& b) { return combine(a, b, Rational::sub, std::minus<double>()); }
  friend Value operator*(const Value& a, const Value& b) { return combine(a, b, Rational::mul, std::multiplies<double>()); }
  friend Value operator/(const Value& a, const Value& b) {
    if (!b.exact_ || b.rat_.num != 0)
      return combine(a, b, Rational::div, std::divides<double>());
    return real(a.to_double() / 0.0);  // surfaced as ArithmeticDomain by eval
  }
  Value operator-() const {
    if (exact_) {
      Rational r;
      r.num = -rat_.num;
      r.den = rat_.den;
      return Value(r);
    }
    return real(-approx_);
  }

  // a^b; exact when the base is exact and b is a small integer
  Value pow(const Value& e) const {
    if (exact_ && e.exact_ && e.rat_.is_integer() && std::llabs(e.rat_.num) <= 64) {
      std::int64_t n = e.rat_.num;
      bool invert = n < 0;
      if (invert) n = -n;
      Rational acc(1);
      bool ok = true;
      for (std::int64_t i = 0; i < n && ok; ++i) {
        auto m = Rational::mul(acc, rat_);
        if (m) acc = *m; else ok = false;
      }
      if (ok) {
        if (!invert) return Value(acc);
        auto inv = Rational::div(Rational(1), acc);
        if (inv) return Value(*inv);
      }
    }
    return real(std::pow(to_double(), e.to_double()));
  }

  // -1 / 0 / 1; exact when both sides are
  int compare(const Value& o) const {
    if (exact_ && o.exact_) return rat_.compare(o.rat_);
    double a = to_double(), b = o.to_double();
    return a < b ? -1 : a > b ? 1 : 0;
  }

  bool is_zero() const { return exact_ ? rat_.num == 0 : approx_ == 0.0; }

  // structural sameness; an exact and an inexact value are the same when
  // they denote the same double (a printed double reparses as a rational)
  bool identical(const Value& o) const {
    if (exact_ && o.exact_) return rat_ == o.rat_;
    return to_double() == o.to_double();
  }

  // shortest round-tripping literal; exact rationals print as n or n/d
  std::string str() const {
    if (exact_) return rat_.str();
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, approx_);
    return std::string(buf, r.ptr);
  }

 private:
  template <typename FR, typename FD>
  static Value combine(const Value& a, const Value& b, FR fr, FD fd) {
    if (a.exact_ && b.exact_) {
      if (auto r = fr(a.rat_, b.rat_)) return Value(*r);
    }
    return real(fd(a.to_double(), b.to_double()));
  }

  bool exact_;
  Rational rat_;
  double approx_;
};

// "3", "0.25" and the like; no exponent notation.
inline std::optional<Value> parse_number(const std::string& text) {
  if (text.empty()) return std::nullopt;
  auto dot = text.find('.');
  std::string digits = text;
  int frac = 0;
  if (dot != std::string::npos) {
    digits = text.substr(0, dot) + text.substr(dot + 1);
    frac = static_cast<int>(text.size() - dot - 1);
    if (frac == 0) return std::nullopt;
  }
  if (digits.empty()) return std::nullopt;
  __int128 n = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    n = n * 10 + (c - '0');
    if (n > static_cast<__int128>(INT64_MAX) * 1000) return std::nullopt;
  }
  __int128 d = 1;
  for (int i = 0; i < frac; ++i) d *= 10;
  auto r = Rational::make(n, d);
  if (!r) return std::nullopt;
  return Value(*r);
}

}  // namespace palps
