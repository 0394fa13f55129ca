#include <catch2/catch_amalgamated.hpp>

#include "ppsim/rational.hpp"

using ppsim::Rat;

TEST_CASE("construction normalizes sign and gcd") {
  CHECK(Rat(6, 4) == Rat(3, 2));
  CHECK(Rat(-6, 4) == Rat(-3, 2));
  CHECK(Rat(6, -4) == Rat(-3, 2));
  CHECK(Rat(-6, -4) == Rat(3, 2));
  CHECK(Rat(0, 7) == Rat(0));
  CHECK(Rat(0, -7).den() == 1);
  CHECK_THROWS_AS(Rat(1, 0), std::domain_error);
}

TEST_CASE("arithmetic is exact") {
  CHECK(Rat(1, 3) + Rat(1, 6) == Rat(1, 2));
  CHECK(Rat(1, 2) - Rat(1, 3) == Rat(1, 6));
  CHECK(Rat(2, 3) * Rat(9, 4) == Rat(3, 2));
  CHECK(Rat(2, 3) / Rat(4, 9) == Rat(3, 2));
  CHECK(-Rat(5, 7) == Rat(-5, 7));
  CHECK_THROWS_AS(Rat(1) / Rat(0), std::domain_error);

  // Sum telescopes back exactly, no drift.
  Rat acc(0);
  for (int i = 0; i < 1000; ++i) acc += Rat(1, 7);
  CHECK(acc == Rat(1000, 7));
  for (int i = 0; i < 1000; ++i) acc -= Rat(1, 7);
  CHECK(acc == Rat(0));
}

TEST_CASE("ordering") {
  CHECK(Rat(1, 3) < Rat(1, 2));
  CHECK(Rat(-1, 2) < Rat(-1, 3));
  CHECK(Rat(2, 4) <= Rat(1, 2));
  CHECK(Rat(1, 2) >= Rat(2, 4));
  CHECK(Rat(7, 3) > Rat(2));
  CHECK(ppsim::min(Rat(1, 3), Rat(1, 4)) == Rat(1, 4));
  CHECK(ppsim::max(Rat(1, 3), Rat(1, 4)) == Rat(1, 3));
}

TEST_CASE("floor") {
  CHECK(Rat(7, 2).floor() == 3);
  CHECK(Rat(-7, 2).floor() == -4);
  CHECK(Rat(6, 2).floor() == 3);
  CHECK(Rat(-6, 2).floor() == -3);
  CHECK(Rat(0).floor() == 0);
  CHECK(Rat(2, 1).floor() == 2);   // preload arithmetic: floor(2/1) = 2
  CHECK(Rat(3, 2).floor() == 1);   // floor(3/2) = 1
}

TEST_CASE("parse and print round-trip") {
  CHECK(Rat::parse("7") == Rat(7));
  CHECK(Rat::parse("-7") == Rat(-7));
  CHECK(Rat::parse("3/4") == Rat(3, 4));
  CHECK(Rat::parse("-3/4") == Rat(-3, 4));
  CHECK(Rat::parse("6/4") == Rat(3, 2));
  CHECK(Rat(3, 7).str() == "3/7");
  CHECK(Rat(-3, 7).str() == "-3/7");
  CHECK(Rat(21).str() == "21");
  CHECK(Rat::parse(Rat(355, 113).str()) == Rat(355, 113));
  CHECK_THROWS(Rat::parse("1/2/3"));
  CHECK_THROWS(Rat::parse("abc"));
  CHECK_THROWS(Rat::parse("1.5"));
}

TEST_CASE("overflow throws instead of wrapping") {
  Rat big(INT64_MAX / 2 + 1);
  CHECK_THROWS_AS(big + big, std::overflow_error);
  CHECK_THROWS_AS(big * Rat(3), std::overflow_error);
  // Cross-reduction keeps representable results representable.
  Rat a(INT64_MAX, 2);
  CHECK(a * Rat(2, INT64_MAX) == Rat(1));
}

TEST_CASE("to_double sanity") {
  CHECK(Rat(1, 2).to_double() == 0.5);
  CHECK(Rat(3, 7).to_double() == Catch::Approx(3.0 / 7.0));
}
