#include <catch2/catch.hpp>

#include "palps/rational.hpp"

using palps::Rational;
using palps::Value;

TEST_CASE("rational normalization and arithmetic") {
  auto r = Rational::make(2, 8);
  REQUIRE(r);
  CHECK(r->num == 1);
  CHECK(r->den == 4);

  auto neg = Rational::make(3, -6);
  REQUIRE(neg);
  CHECK(neg->num == -1);
  CHECK(neg->den == 2);

  auto sum = Rational::add(*Rational::make(1, 4), *Rational::make(1, 4));
  REQUIRE(sum);
  CHECK(*sum == *Rational::make(1, 2));

  CHECK(!Rational::div(Rational(1), Rational(0)));
  CHECK(Rational(1).compare(*Rational::make(3, 4)) > 0);
}

TEST_CASE("rational overflow is detected, not wrapped") {
  Rational big;
  big.num = INT64_MAX / 2;
  big.den = 1;
  CHECK(!Rational::mul(big, Rational(8)));
}

TEST_CASE("values stay exact through products and sums") {
  Value quarter(*Rational::make(1, 4));
  Value joint = quarter * quarter * quarter;
  REQUIRE(joint.exact());
  CHECK(joint.rat() == *Rational::make(1, 64));

  Value one = quarter + quarter + Value(*Rational::make(1, 2));
  REQUIRE(one.exact());
  CHECK(one.rat() == Rational(1));
}

TEST_CASE("integer powers of exact values are exact") {
  Value base = Value(*Rational::make(3, 2));
  Value cube = base.pow(Value::integer(3));
  REQUIRE(cube.exact());
  CHECK(cube.rat() == *Rational::make(27, 8));

  // negative exponent inverts exactly: (1 + 1*1)^-1 = 1/2
  Value inv = Value::integer(2).pow(Value::integer(-1));
  REQUIRE(inv.exact());
  CHECK(inv.rat() == *Rational::make(1, 2));

  // fractional exponent falls back to floating point
  Value root = Value::integer(2).pow(Value(*Rational::make(1, 2)));
  CHECK(!root.exact());
  CHECK(root.to_double() == Approx(std::sqrt(2.0)));
}

TEST_CASE("number literals parse to exact rationals") {
  auto v = palps::parse_number("0.25");
  REQUIRE(v);
  REQUIRE(v->exact());
  CHECK(v->rat() == *Rational::make(1, 4));

  auto i = palps::parse_number("42");
  REQUIRE(i);
  CHECK(i->rat() == Rational(42));

  CHECK(!palps::parse_number(""));
  CHECK(!palps::parse_number("1."));
  CHECK(!palps::parse_number("x"));
}

TEST_CASE("value printing round-trips") {
  Value v(*Rational::make(9, 10));
  CHECK(v.str() == "9/10");
  Value d = Value::real(0.1234567890123);
  auto back = palps::parse_number(d.str());
  REQUIRE(back);
  CHECK(back->to_double() == d.to_double());
  CHECK(back->identical(d));
}
