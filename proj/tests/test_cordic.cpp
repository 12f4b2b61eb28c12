#include <cmath>
#include <random>

#include "corvet/cordic.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace corvet;
using namespace corvet::cordic;

TEST_SUITE_BEGIN("cordic");

namespace {

FxPValue fx(double v, FxPFormat fmt) { return quantize(v, fmt); }

// |simulated - exact| budget: CORDIC residual plus per-iteration
// quantization slack on the extended grid.
double mac_error_budget(double w, int iterations, FxPFormat fmt) {
  return std::abs(w) * std::ldexp(1.0, -iterations) +
         iterations * std::ldexp(1.0, -fmt.frac_bits - kGuardBits + 1);
}

}  // namespace

TEST_CASE("cycle table") {
  CHECK(mac_cycles(FxPFormat(8, 6), Accuracy::approximate) == 4);
  CHECK(mac_cycles(FxPFormat(8, 6), Accuracy::accurate) == 5);
  CHECK(mac_cycles(FxPFormat(16, 14), Accuracy::approximate) == 7);
  CHECK(mac_cycles(FxPFormat(16, 14), Accuracy::accurate) == 9);
  CHECK(mac_cycles(FxPFormat(4, 2), Accuracy::accurate) == 4);
  CHECK_THROWS_AS(mac_cycles(FxPFormat(4, 2), Accuracy::approximate),
                  ContractViolation);
}

TEST_CASE("cycles reported equal the table") {
  FxPFormat f8(8, 6), f16(16, 14);
  auto r8 = linear_mac(fx(0, f8), fx(0.5, f8), fx(0.5, f8),
                       CordicConfig::mac(f8, Accuracy::approximate));
  CHECK(r8.cycles == 4);
  auto r16 = linear_mac(fx(0, f16), fx(0.5, f16), fx(0.5, f16),
                        CordicConfig::mac(f16, Accuracy::accurate));
  CHECK(r16.cycles == 9);
}

TEST_CASE("iteration schedule") {
  CHECK(iteration_schedule(kLinearRotation, 4) == std::vector<int>{1, 2, 3, 4});
  CHECK(iteration_schedule(kHyperbolicRotation, 6) ==
        std::vector<int>{1, 2, 3, 4, 4, 5});
  auto s15 = iteration_schedule(kHyperbolicRotation, 15);
  CHECK(s15.size() == 15);
  CHECK(s15 == oracles::hyperbolic_schedule(15));
  auto s17 = iteration_schedule(kHyperbolicRotation, 17);
  CHECK(s17[13] == 13);
  CHECK(s17[14] == 13);  // second repetition
  CHECK(s17[15] == 14);
  CHECK_THROWS_AS(iteration_schedule(kLinearRotation, 0), ContractViolation);
}

TEST_CASE("mac trivial examples") {
  FxPFormat fmt(16, 14);
  auto cfg = CordicConfig::mac(fmt, Accuracy::accurate);
  // zero multiplicand leaves the accumulator untouched
  CHECK(linear_mac(fx(0, fmt), fx(1.3, fmt), fx(0, fmt), cfg).y.raw == 0);
  CHECK(linear_mac(fx(0.5, fmt), fx(0, fmt), fx(1.0, fmt), cfg).y.value() ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mac derived example: 0.5 * 0.5 at 16-bit accurate") {
  FxPFormat fmt(16, 14);
  auto cfg = CordicConfig::mac(fmt, Accuracy::accurate);
  auto r = linear_mac(fx(0, fmt), fx(0.5, fmt), fx(0.5, fmt), cfg);
  double budget = mac_error_budget(0.5, 9, fmt);
  CHECK(std::abs(r.y.value() - 0.25) <= budget);
  // real-valued recurrence oracle agrees with the exact product
  CHECK(std::abs(oracles::linear_mac_real(0, 0.5, 0.5, 9) - 0.25) <=
        0.5 * std::ldexp(1.0, -9));
}

TEST_CASE("mac error bound on random in-domain pairs") {
  struct Config {
    FxPFormat fmt;
    Accuracy acc;
  };
  const Config configs[] = {
      {FxPFormat(8, 6), Accuracy::approximate},
      {FxPFormat(8, 6), Accuracy::accurate},
      {FxPFormat(16, 14), Accuracy::approximate},
      {FxPFormat(16, 14), Accuracy::accurate},
      {FxPFormat(4, 2), Accuracy::accurate},
  };
  std::mt19937 rng(101);
  for (const auto& c : configs) {
    auto cfg = CordicConfig::mac(c.fmt, c.acc);
    int n = cfg.iterations;
    std::uniform_int_distribution<int> dist(c.fmt.min_raw(), c.fmt.max_raw());
    int tested = 0;
    while (tested < 4000) {
      FxPValue w(dist(rng), c.fmt), a(dist(rng), c.fmt);
      if (std::abs(a.value()) >= 2.0) continue;
      // keep exact products inside the representable range
      int64_t prod = int64_t(w.raw) * a.raw;
      if (std::llabs(prod) > int64_t(c.fmt.max_raw()) << c.fmt.frac_bits)
        continue;
      ++tested;
      auto r = linear_mac(fx(0, c.fmt), w, a, cfg);
      double exact = w.value() * a.value();
      double err = std::abs(r.y.value() - exact);
      if (err > mac_error_budget(w.value(), n, c.fmt)) {
        CAPTURE(c.fmt.name());
        CAPTURE(w.value());
        CAPTURE(a.value());
        REQUIRE(err <= mac_error_budget(w.value(), n, c.fmt));
      }
    }
  }
}

TEST_CASE("real-valued recurrence converges monotonically in depth") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dw(-1.9, 1.9), da(-1.99, 1.99);
  for (int trial = 0; trial < 200; ++trial) {
    double w = dw(rng), a = da(rng);
    double p = w * a;
    for (int n = 1; n <= 16; ++n) {
      double err = std::abs(oracles::linear_mac_real(0, w, a, n) - p);
      CHECK(err <= std::abs(w) * std::ldexp(1.0, -n) + 1e-12);
    }
  }
}

TEST_CASE("sign symmetry is bit-exact") {
  FxPFormat fmt(8, 6);
  auto cfg = CordicConfig::mac(fmt, Accuracy::accurate);
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> dist(-127, 127);
  for (int i = 0; i < 5000; ++i) {
    FxPValue w(dist(rng), fmt), a(dist(rng), fmt);
    if (std::abs(a.value()) >= 2.0) continue;
    // away from the asymmetric two's-complement saturation rails
    if (std::abs(w.value() * a.value()) > fmt.max_value() - 0.1) continue;
    auto pos = linear_mac(fx(0, fmt), w, a, cfg);
    auto neg = linear_mac(fx(0, fmt), FxPValue(-w.raw, fmt), a, cfg);
    CHECK(neg.y.raw == -pos.y.raw);
  }
}

TEST_CASE("mac domain and contract guards") {
  FxPFormat fmt(16, 14);
  auto cfg = CordicConfig::mac(fmt, Accuracy::accurate);
  FxPFormat wide(16, 13);  // range [-4, 4): can hold out-of-domain operands
  CHECK_THROWS_AS(linear_mac(fx(0, wide), fx(0.5, wide), fx(2.5, wide),
                             CordicConfig::mac(wide, Accuracy::accurate)),
                  DomainError);
  CHECK_THROWS_AS(
      linear_mac(fx(0, fmt), FxPValue(1, FxPFormat(16, 12)), fx(0.5, fmt), cfg),
      ContractViolation);
}

TEST_CASE("divide examples") {
  FxPFormat fmt(16, 14);
  CordicConfig cfg{kLinearVectoring, Accuracy::accurate, fmt, 14};
  CHECK(linear_divide(fx(0, fmt), fx(0.7, fmt), cfg).z.raw == 0);
  // identity quotient: the pre-rotation cancels the numerator exactly
  for (double x : {0.25, 0.5, 1.0, 1.5, -0.75})
    CHECK(linear_divide(fx(x, fmt), fx(x, fmt), cfg).z.value() ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("divide derived example: 1/4 within 2^-13") {
  // run on the extended interface so the denominator 4.0 is representable
  ExtFx num{int64_t(1) << 18, 18}, den{int64_t(4) << 18, 18};
  auto r = divide_ext(num, den, 14, 18);
  CHECK(std::abs(r.z.value() - 0.25) <= std::ldexp(1.0, -13));
  CHECK(std::abs(oracles::linear_divide_real(1.0, 4.0, 14) - 0.25) <=
        std::ldexp(1.0, -14));
}

TEST_CASE("divide guards") {
  FxPFormat fmt(16, 14);
  CordicConfig cfg{kLinearVectoring, Accuracy::accurate, fmt, 14};
  CHECK_THROWS_AS(linear_divide(fx(0.5, fmt), fx(0, fmt), cfg), DomainError);
  CHECK_THROWS_AS(linear_divide(fx(1.9, fmt), fx(0.5, fmt), cfg), DomainError);
}

TEST_CASE("divide then multiply round trip") {
  FxPFormat fmt(16, 14);
  auto mac_cfg = CordicConfig::mac(fmt, Accuracy::accurate);
  CordicConfig div_cfg{kLinearVectoring, Accuracy::accurate, fmt, 14};
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> dw(-1.2, 1.2), da(0.3, 1.8);
  for (int i = 0; i < 300; ++i) {
    double w = dw(rng), a = da(rng);
    if (std::abs(w * a) >= fmt.max_value() - 0.05) continue;  // no saturation
    auto prod = linear_mac(fx(0, fmt), fx(w, fmt), fx(a, fmt), mac_cfg);
    if (std::abs(prod.y.value() / a) >= 1.9) continue;
    auto back = linear_divide(prod.y, fx(a, fmt), div_cfg);
    double budget = mac_error_budget(w, 9, fmt) / std::abs(a) +
                    std::ldexp(1.0, -14) + 3 * fmt.resolution();
    CHECK(std::abs(back.z.value() - w) <= budget);
  }
}

TEST_CASE("hyperbolic trivial point") {
  FxPFormat fmt(16, 14);
  auto cfg = CordicConfig::hyperbolic(fmt, Accuracy::accurate);
  auto r = hyperbolic_rotation(fx(0, fmt), cfg);
  // 16 iterations reach shift index 14 (indices 4 and 13 repeat), so the
  // identity angle lands within one output ulp
  CHECK(std::abs(r.x.raw - (1 << 14)) <= 1);  // cosh 0 = 1
  CHECK(std::abs(r.y.raw) <= 1);              // sinh 0 = 0
  CHECK(std::abs(r.x.raw + r.y.raw - (1 << 14)) <= 2);  // exp 0 = 1
  CHECK(r.cycles == 16);
}

TEST_CASE("hyperbolic derived examples") {
  FxPFormat fmt(16, 14);
  CordicConfig cfg{kHyperbolicRotation, Accuracy::accurate, fmt, 16};
  auto r1 = hyperbolic_rotation(fx(1.0, fmt), cfg);
  double tol = std::ldexp(1.0, -15) + 20 * fmt.resolution();
  CHECK(std::abs(r1.y.value() - std::sinh(1.0)) <= tol);
  CHECK(std::abs(r1.x.value() - std::cosh(1.0)) <= tol);
  CHECK(std::abs((r1.x.value() + r1.y.value()) - std::exp(1.0)) <= 2 * tol);

  auto r2 = hyperbolic_rotation(fx(-0.5, fmt), cfg);
  CHECK(std::abs(r2.y.value() - std::sinh(-0.5)) <= tol);
  CHECK(std::abs(r2.x.value() - std::cosh(-0.5)) <= tol);

  // the real-valued oracle lands on the reference transcendentals
  auto o = oracles::hyperbolic_real(1.0, 16);
  CHECK(o.sinh == doctest::Approx(std::sinh(1.0)).epsilon(1e-4));
  CHECK(o.cosh == doctest::Approx(std::cosh(1.0)).epsilon(1e-4));
}

TEST_CASE("hyperbolic odd/even symmetry is bit-exact") {
  FxPFormat fmt(16, 14);
  CordicConfig cfg{kHyperbolicRotation, Accuracy::accurate, fmt, 16};
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> dist(0.0, 1.1);
  for (int i = 0; i < 500; ++i) {
    FxPValue t = fx(dist(rng), fmt);
    auto pos = hyperbolic_rotation(t, cfg);
    auto neg = hyperbolic_rotation(FxPValue(-t.raw, fmt), cfg);
    CHECK(neg.y.raw == -pos.y.raw);  // sinh odd
    CHECK(neg.x.raw == pos.x.raw);   // cosh even
  }
}

TEST_CASE("hyperbolic identity over a theta grid") {
  FxPFormat fmt(16, 14);
  CordicConfig cfg{kHyperbolicRotation, Accuracy::accurate, fmt, 16};
  int n = cfg.iterations;
  double slack = 4 * std::ldexp(1.0, -n) + 40 * fmt.resolution();
  for (int i = 0; i < 1000; ++i) {
    double theta = -1.1 + 2.2 * i / 999.0;
    auto r = hyperbolic_rotation(fx(theta, fmt), cfg);
    double c = r.x.value(), s = r.y.value();
    CHECK(std::abs(c * c - s * s - 1.0) <= slack);
  }
}

TEST_CASE("hyperbolic domain guard") {
  FxPFormat fmt(16, 14);
  auto cfg = CordicConfig::hyperbolic(fmt, Accuracy::accurate);
  CHECK_THROWS_AS(hyperbolic_rotation(fx(1.2, fmt), cfg), DomainError);
}

TEST_CASE("hyperbolic iteration depth defaults") {
  CHECK(hyperbolic_iterations(FxPFormat(8, 6), Accuracy::approximate) == 7);
  CHECK(hyperbolic_iterations(FxPFormat(8, 6), Accuracy::accurate) == 8);
  CHECK(hyperbolic_iterations(FxPFormat(16, 14), Accuracy::approximate) == 10);
  CHECK(hyperbolic_iterations(FxPFormat(16, 14), Accuracy::accurate) == 16);
}

TEST_SUITE_END();
