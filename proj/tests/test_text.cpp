#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "rrl/error.hpp"
#include "rrl/random.hpp"
#include "rrl/text.hpp"

using namespace rrl::text;
using rrl::Error;
using rrl::ErrorCode;

TEST_CASE("doubles round-trip through text") {
  for (double v : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 1e-8}) {
    CHECK(parse_double(format_double(v), "v") == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(std::isnan(parse_double("nan", "v")));
}

TEST_CASE("scalar parsing errors") {
  CHECK_THROWS_AS(parse_double("1.5x", "v"), Error);
  CHECK_THROWS_AS(parse_int("12.0", "n"), Error);
  CHECK(parse_int(" 42 ", "n") == 42);
  CHECK(parse_bool("true", "b"));
  CHECK_FALSE(parse_bool("0", "b"));
  CHECK_THROWS_AS(parse_bool("maybe", "b"), Error);
}

TEST_CASE("key values keep order and the last duplicate") {
  KeyValues kv;
  kv.set("b", "1");
  kv.set("a", 2.5);
  kv.set("b", "3");
  REQUIRE(kv.entries().size() == 2);
  CHECK(kv.entries()[0].first == "b");
  CHECK(kv.get("b") == "3");
  CHECK(kv.get_double("a") == 2.5);
  CHECK(kv.get_int_or("missing", 7) == 7);
  CHECK(kv.get_or("missing", "x") == "x");
  try {
    kv.get("missing");
    FAIL("missing key accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("key values write and parse") {
  KeyValues kv;
  kv.set("w.0", 0.125);
  kv.set("name", "alpha beta");
  std::stringstream buf;
  kv.write(buf);
  const auto back = parse_key_values(buf);
  CHECK(back.entries() == kv.entries());
}

TEST_CASE("sectioned files prefix keys") {
  std::istringstream in("# comment\nroot = 1\n[experiment]\nseed = 9\n\n[cost]\nc=0.001\n");
  const auto kv = parse_sectioned(in);
  CHECK(kv.get("root") == "1");
  CHECK(kv.get("experiment.seed") == "9");
  CHECK(kv.get_double("cost.c") == 0.001);
}

TEST_CASE("malformed key value line") {
  std::istringstream in("novalue\n");
  CHECK_THROWS_AS(parse_key_values(in), Error);
}

TEST_CASE("error categories") {
  CHECK(Error(ErrorCode::NotFound, "x").category() == "io.not_found");
  CHECK(Error(ErrorCode::ParseError, "x").category().substr(0, 5) == "data.");
  CHECK(Error(ErrorCode::DegenerateVariance, "x").category().substr(0, 8) == "numeric.");
  CHECK(Error(ErrorCode::Usage, "x").category().substr(0, 6) == "usage.");
}

TEST_CASE("derived seeds") {
  CHECK(rrl::derive_seed(1, "init") == rrl::derive_seed(1, "init"));
  CHECK(rrl::derive_seed(1, "init") != rrl::derive_seed(1, "data"));
  CHECK(rrl::derive_seed(1, "init") != rrl::derive_seed(2, "init"));
  CHECK(rrl::derive_seed(5, std::uint64_t{3}) != rrl::derive_seed(5, std::uint64_t{4}));
  rrl::Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
  rrl::Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.canonical();
    CHECK((u >= 0.0 && u < 1.0));
  }
}
