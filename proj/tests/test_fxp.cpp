#include <cmath>
#include <random>

#include "corvet/fxp.hpp"
#include "doctest.h"

using namespace corvet;

TEST_SUITE_BEGIN("fxp");

TEST_CASE("format invariants") {
  CHECK_THROWS_AS(FxPFormat(5, 2), ContractViolation);
  CHECK_THROWS_AS(FxPFormat(32, 16), ContractViolation);
  CHECK_THROWS_AS(FxPFormat(8, 8), ContractViolation);
  CHECK_THROWS_AS(FxPFormat(8, -1), ContractViolation);
  CHECK(FxPFormat::with_default_frac(4) == FxPFormat(4, 2));
  CHECK(FxPFormat::with_default_frac(8) == FxPFormat(8, 6));
  CHECK(FxPFormat::with_default_frac(16) == FxPFormat(16, 14));
}

TEST_CASE("format parsing") {
  CHECK(FxPFormat::parse("fxp8") == FxPFormat(8, 6));
  CHECK(FxPFormat::parse("fxp16.f12") == FxPFormat(16, 12));
  CHECK(FxPFormat::parse("fxp4.f1") == FxPFormat(4, 1));
  CHECK(FxPFormat(16, 12).name() == "fxp16.f12");
  CHECK(FxPFormat(8, 6).name() == "fxp8");
  CHECK_THROWS_AS(FxPFormat::parse("fxp7"), LoadError);
  CHECK_THROWS_AS(FxPFormat::parse("int8"), LoadError);
  CHECK_THROWS_AS(FxPFormat::parse("fxp8.g2"), LoadError);
  CHECK_THROWS_AS(FxPFormat::parse("fxp8.f9"), LoadError);
}

TEST_CASE("quantize examples") {
  FxPFormat q84(8, 4);
  CHECK(quantize(0.0, q84).raw == 0);
  CHECK(quantize(0.25, q84).raw == 4);
  CHECK(quantize(100.0, q84).raw == 127);   // saturated max
  CHECK(quantize(-100.0, q84).raw == -128);
  CHECK_THROWS_AS(quantize(std::nan(""), q84), ContractViolation);
}

TEST_CASE("quantize rounds half away from zero") {
  FxPFormat q84(8, 4);
  CHECK(quantize(0.03125, q84).raw == 1);   // 0.5 ulp rounds up
  CHECK(quantize(-0.03125, q84).raw == -1);
  CHECK(quantize(0.09375, q84).raw == 2);   // 1.5 ulp rounds away
}

TEST_CASE("round trip over every representable value") {
  for (int total : {4, 8, 16}) {
    FxPFormat fmt = FxPFormat::with_default_frac(total);
    for (int32_t raw = fmt.min_raw(); raw <= fmt.max_raw(); ++raw) {
      double r = FxPValue(raw, fmt).value();
      CHECK(quantize(r, fmt).raw == raw);
    }
  }
}

TEST_CASE("quantize is monotone") {
  FxPFormat fmt(8, 6);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    double a = dist(rng), b = dist(rng);
    if (a > b) std::swap(a, b);
    CHECK(quantize(a, fmt).raw <= quantize(b, fmt).raw);
  }
}

TEST_CASE("saturating add") {
  FxPFormat q8(8, 6);
  CHECK(add_sat(FxPValue(3, q8), FxPValue(4, q8)).raw == 7);
  CHECK(add_sat(FxPValue(127, q8), FxPValue(1, q8)).raw == 127);
  CHECK(add_sat(FxPValue(-128, q8), FxPValue(-1, q8)).raw == -128);
  CHECK_THROWS_AS(add_sat(FxPValue(0, q8), FxPValue(0, FxPFormat(8, 4))),
                  ContractViolation);
}

TEST_CASE("add_sat commutes; associativity holds without saturation") {
  FxPFormat fmt(8, 6);
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> dist(fmt.min_raw(), fmt.max_raw());
  for (int i = 0; i < 20000; ++i) {
    FxPValue a(dist(rng), fmt), b(dist(rng), fmt), c(dist(rng), fmt);
    CHECK(add_sat(a, b).raw == add_sat(b, a).raw);
    long sum = long(a.raw) + b.raw + c.raw;
    long partial1 = long(a.raw) + b.raw;
    long partial2 = long(b.raw) + c.raw;
    bool exact = sum >= fmt.min_raw() && sum <= fmt.max_raw() &&
                 partial1 >= fmt.min_raw() && partial1 <= fmt.max_raw() &&
                 partial2 >= fmt.min_raw() && partial2 <= fmt.max_raw();
    if (exact)
      CHECK(add_sat(add_sat(a, b), c).raw == add_sat(a, add_sat(b, c)).raw);
  }
}

TEST_CASE("arithmetic shift examples") {
  FxPFormat q8(8, 6);
  CHECK(shift_right_arith(FxPValue(8, q8), 2).raw == 2);
  CHECK(shift_right_arith(FxPValue(-8, q8), 2).raw == -2);
  CHECK(shift_right_arith(FxPValue(-1, q8), 1).raw == -1);  // floor semantics
  CHECK_THROWS_AS(shift_right_arith(FxPValue(1, q8), 8), ContractViolation);
  CHECK_THROWS_AS(shift_right_arith(FxPValue(1, q8), -1), ContractViolation);
}

TEST_CASE("shift equals floor division, exhaustive 16-bit") {
  FxPFormat fmt(16, 14);
  for (int k = 0; k < 16; ++k) {
    int64_t div = int64_t(1) << k;
    for (int32_t raw = fmt.min_raw(); raw <= fmt.max_raw(); ++raw) {
      int64_t expect = raw >= 0 ? raw / div : (raw - div + 1) / div;
      if (shift_right_arith(FxPValue(raw, fmt), k).raw != expect) {
        REQUIRE(shift_right_arith(FxPValue(raw, fmt), k).raw == expect);
      }
    }
  }
}

TEST_CASE("extended register round trips and scales") {
  FxPFormat fmt(8, 6);
  FxPValue v(-37, fmt);
  ExtFx e = to_ext(v);
  CHECK(e.frac == 10);
  CHECK(e.value() == v.value());
  CHECK(from_ext(e, fmt).raw == v.raw);
  CHECK(e.scaled_pow2(2).value() == 4.0 * v.value());
  CHECK(from_ext(ExtFx{5, 4}, fmt).raw == 20);  // finer target grid is exact
}

TEST_CASE("from_ext saturates and rounds half away") {
  FxPFormat fmt(8, 6);
  CHECK(from_ext(ExtFx{1 << 20, 10}, fmt).raw == 127);
  CHECK(from_ext(ExtFx{-(1 << 20), 10}, fmt).raw == -128);
  CHECK(from_ext(ExtFx{24, 10}, fmt).raw == 2);   // 1.5 ulp away
  CHECK(from_ext(ExtFx{-24, 10}, fmt).raw == -2);
  CHECK(from_ext(ExtFx{8, 10}, fmt).raw == 1);    // exactly half
  CHECK(from_ext(ExtFx{-8, 10}, fmt).raw == -1);
}

TEST_CASE("clog2") {
  CHECK(clog2(1) == 0);
  CHECK(clog2(2) == 1);
  CHECK(clog2(3) == 2);
  CHECK(clog2(196) == 8);
  CHECK(clog2(256) == 8);
}

TEST_SUITE_END();
