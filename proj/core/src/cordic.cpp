#include "corvet/cordic.hpp"

#include <cmath>
#include <mutex>
#include <unordered_map>

namespace corvet::cordic {

Accuracy parse_accuracy(const std::string& name) {
  if (name == "approximate" || name == "approx") return Accuracy::approximate;
  if (name == "accurate") return Accuracy::accurate;
  throw LoadError("unknown accuracy mode '" + name + "'");
}

std::string to_string(Accuracy a) {
  return a == Accuracy::approximate ? "approximate" : "accurate";
}

int mac_cycles(FxPFormat fmt, Accuracy acc) {
  switch (fmt.total_bits) {
    case 4:
      if (acc == Accuracy::accurate) return 4;
      throw ContractViolation("no approximate operating point for fxp4");
    case 8:
      return acc == Accuracy::approximate ? 4 : 5;
    case 16:
      return acc == Accuracy::approximate ? 7 : 9;
  }
  throw ContractViolation("mac_cycles: unsupported width");
}

int hyperbolic_iterations(FxPFormat fmt, Accuracy acc) {
  if (acc == Accuracy::approximate) return mac_cycles(fmt, acc) + 3;
  return fmt.total_bits;
}

int divide_iterations(FxPFormat fmt, Accuracy acc) {
  if (acc == Accuracy::approximate) return mac_cycles(fmt, acc) + 3;
  return fmt.frac_bits + kGuardBits;
}

CordicConfig CordicConfig::mac(FxPFormat fmt, Accuracy acc) {
  return {kLinearRotation, acc, fmt, mac_cycles(fmt, acc)};
}

CordicConfig CordicConfig::divide(FxPFormat fmt, Accuracy acc) {
  return {kLinearVectoring, acc, fmt, divide_iterations(fmt, acc)};
}

CordicConfig CordicConfig::hyperbolic(FxPFormat fmt, Accuracy acc) {
  return {kHyperbolicRotation, acc, fmt, hyperbolic_iterations(fmt, acc)};
}

int CordicConfig::effective_iterations() const {
  if (iterations > 0) return iterations;
  if (mode == kLinearRotation) return mac_cycles(format, accuracy);
  if (mode == kLinearVectoring) return divide_iterations(format, accuracy);
  return hyperbolic_iterations(format, accuracy);
}

std::vector<int> iteration_schedule(CordicMode mode, int n) {
  if (n < 1) throw ContractViolation("iteration_schedule: n must be >= 1");
  std::vector<int> sched;
  sched.reserve(n);
  if (mode.coordinate == Coordinate::linear) {
    for (int i = 1; i <= n; ++i) sched.push_back(i);
    return sched;
  }
  int i = 1;
  while (int(sched.size()) < n) {
    sched.push_back(i);
    if ((i == 4 || i == 13) && int(sched.size()) < n) sched.push_back(i);
    ++i;
  }
  return sched;
}

double hyperbolic_gain(int n) {
  double k = 1.0;
  for (int i : iteration_schedule(kHyperbolicRotation, n)) {
    double t = std::ldexp(1.0, -i);
    k *= std::sqrt(1.0 - t * t);
  }
  return k;
}

namespace {

// Signed iteration digit. Zero residual gates the stage (the datapath mux
// passes operands through), which makes exact operands exact results.
inline int digit_toward_zero(int64_t z) { return z > 0 ? 1 : (z < 0 ? -1 : 0); }

void check_shared_format(const CordicConfig& cfg, FxPValue v,
                         const char* who) {
  if (v.fmt != cfg.format)
    throw ContractViolation(std::string(who) + ": operand format " +
                            v.fmt.name() + " does not match config format " +
                            cfg.format.name());
}

}  // namespace

ExtResult mac_ext(ExtFx acc, ExtFx w, ExtFx a, int iterations) {
  if (acc.frac != w.frac)
    throw ContractViolation("mac_ext: acc and w must share a frac");
  // |a| < 2 keeps z inside the schedule's convergence range.
  if (std::llabs(a.raw) >= (int64_t(2) << a.frac))
    throw DomainError("mac_ext: |a| must be < 2 (caller pre-scales)");

  int64_t x = w.raw;
  int64_t y = acc.raw;
  int64_t z = a.raw;
  const int zf = a.frac;

  // zero-shift pre-rotation, folded into operand load
  int d = digit_toward_zero(z);
  y += d * x;
  z -= int64_t(d) << zf;

  for (int i : iteration_schedule(kLinearRotation, iterations)) {
    d = digit_toward_zero(z);
    y += d * shift_toward_zero(x, i);
    if (i <= zf) z -= int64_t(d) << (zf - i);
    // beyond the z grid the angle step underflows; y steps still refine
  }
  return {{x, w.frac}, {y, w.frac}, {z, zf}, iterations};
}

ExtResult divide_ext(ExtFx num, ExtFx den, int iterations, int quotient_frac) {
  if (num.frac != den.frac)
    throw ContractViolation("divide_ext: num and den must share a frac");
  if (den.raw == 0) throw DomainError("divide_ext: zero denominator");
  if (std::llabs(num.raw) >= 2 * std::llabs(den.raw))
    throw DomainError("divide_ext: |num/den| must be < 2 (caller pre-scales)");

  int64_t x = den.raw;
  int64_t y = num.raw;
  int64_t z = 0;
  const int zf = quotient_frac;
  const int sx = x > 0 ? 1 : -1;

  auto digit = [&](int64_t yy) { return yy == 0 ? 0 : (yy > 0 ? -sx : sx); };

  int d = digit(y);
  y += d * x;
  z -= int64_t(d) << zf;

  for (int i : iteration_schedule(kLinearVectoring, iterations)) {
    d = digit(y);
    y += d * shift_toward_zero(x, i);
    if (i <= zf) z -= int64_t(d) << (zf - i);
  }
  return {{x, den.frac}, {y, num.frac}, {z, zf}, iterations};
}

namespace {

struct HyperbolicTables {
  std::vector<int> schedule;
  std::vector<int64_t> atanh_raw;  // atanh(2^-i) at the working frac
  int64_t inv_gain_raw = 0;        // 1/K at the working frac
};

// atanh constants and the gain reciprocal depend on (iterations, frac);
// cache them per configuration.
const HyperbolicTables& hyperbolic_tables(int iterations, int frac) {
  static std::mutex mu;
  static std::unordered_map<int64_t, HyperbolicTables> cache;
  std::scoped_lock lock(mu);
  int64_t key = (int64_t(iterations) << 32) | uint32_t(frac);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  HyperbolicTables t;
  t.schedule = iteration_schedule(kHyperbolicRotation, iterations);
  t.atanh_raw.reserve(t.schedule.size());
  for (int i : t.schedule) {
    double a = std::atanh(std::ldexp(1.0, -i));
    t.atanh_raw.push_back(ext_from_double(a, frac).raw);
  }
  t.inv_gain_raw = ext_from_double(1.0 / hyperbolic_gain(iterations), frac).raw;
  return cache.emplace(key, std::move(t)).first->second;
}

}  // namespace

ExtResult hyperbolic_ext(ExtFx theta, int iterations) {
  double bound = kHyperbolicDomain;
  if (std::abs(theta.value()) > bound)
    throw DomainError("hyperbolic_ext: |theta| exceeds convergence range");

  const int f = theta.frac;
  const auto& tab = hyperbolic_tables(iterations, f);

  int64_t x = tab.inv_gain_raw;
  int64_t y = 0;
  int64_t z = theta.raw;

  for (std::size_t k = 0; k < tab.schedule.size(); ++k) {
    int i = tab.schedule[k];
    // hyperbolic rotation never idles: the gain compensation assumes every
    // stage fires
    int d = z >= 0 ? 1 : -1;
    int64_t xs = shift_toward_zero(x, i);
    int64_t ys = shift_toward_zero(y, i);
    x += d * ys;
    y += d * xs;
    z -= d * tab.atanh_raw[k];
  }
  return {{x, f}, {y, f}, {z, f}, iterations};
}

CordicResult linear_mac(FxPValue acc, FxPValue w, FxPValue a,
                        const CordicConfig& cfg) {
  check_shared_format(cfg, acc, "linear_mac");
  check_shared_format(cfg, w, "linear_mac");
  check_shared_format(cfg, a, "linear_mac");
  int n = cfg.effective_iterations();
  ExtResult r = mac_ext(to_ext(acc), to_ext(w), to_ext(a), n);
  return {from_ext(r.x, cfg.format), from_ext(r.y, cfg.format),
          from_ext(r.z, cfg.format), r.cycles};
}

CordicResult linear_divide(FxPValue num, FxPValue den,
                           const CordicConfig& cfg) {
  check_shared_format(cfg, num, "linear_divide");
  check_shared_format(cfg, den, "linear_divide");
  int n = cfg.effective_iterations();
  ExtFx ne = to_ext(num), de = to_ext(den);
  ExtResult r = divide_ext(ne, de, n, cfg.format.frac_bits + kGuardBits);
  return {from_ext(r.x, cfg.format), from_ext(r.y, cfg.format),
          from_ext(r.z, cfg.format), r.cycles};
}

CordicResult hyperbolic_rotation(FxPValue theta, const CordicConfig& cfg) {
  check_shared_format(cfg, theta, "hyperbolic_rotation");
  int n = cfg.effective_iterations();
  ExtResult r = hyperbolic_ext(to_ext(theta), n);
  return {from_ext(r.x, cfg.format), from_ext(r.y, cfg.format),
          from_ext(r.z, cfg.format), r.cycles};
}

}  // namespace corvet::cordic
