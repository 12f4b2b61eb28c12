#include "corvet/fxp.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace corvet {

FxPFormat::FxPFormat(int total, int frac) : total_bits(total), frac_bits(frac) {
  if (total != 4 && total != 8 && total != 16)
    throw ContractViolation("FxPFormat: total_bits must be 4, 8 or 16, got " +
                            std::to_string(total));
  if (frac < 0 || frac >= total)
    throw ContractViolation("FxPFormat: frac_bits out of range: " +
                            std::to_string(frac));
}

FxPFormat FxPFormat::with_default_frac(int total_bits) {
  return FxPFormat(total_bits, total_bits - 2);
}

FxPFormat FxPFormat::parse(const std::string& name) {
  if (name.rfind("fxp", 0) != 0)
    throw LoadError("bad format name '" + name + "' (expected fxpN[.fM])");
  std::size_t dot = name.find('.');
  std::string total_part = name.substr(3, dot == std::string::npos
                                              ? std::string::npos
                                              : dot - 3);
  int total = 0;
  try {
    total = std::stoi(total_part);
  } catch (const std::exception&) {
    throw LoadError("bad format name '" + name + "'");
  }
  if (dot == std::string::npos) {
    if (total != 4 && total != 8 && total != 16)
      throw LoadError("bad format width in '" + name + "'");
    return with_default_frac(total);
  }
  if (dot + 1 >= name.size() || name[dot + 1] != 'f')
    throw LoadError("bad fractional suffix in '" + name + "'");
  int frac = 0;
  try {
    frac = std::stoi(name.substr(dot + 2));
  } catch (const std::exception&) {
    throw LoadError("bad fractional suffix in '" + name + "'");
  }
  if (total != 4 && total != 8 && total != 16)
    throw LoadError("bad format width in '" + name + "'");
  if (frac < 0 || frac >= total)
    throw LoadError("fractional bits out of range in '" + name + "'");
  return FxPFormat(total, frac);
}

std::string FxPFormat::name() const {
  std::string s = "fxp" + std::to_string(total_bits);
  if (frac_bits != total_bits - 2) s += ".f" + std::to_string(frac_bits);
  return s;
}

double FxPFormat::max_value() const { return double(max_raw()) * resolution(); }
double FxPFormat::min_value() const { return double(min_raw()) * resolution(); }
double FxPFormat::resolution() const { return std::ldexp(1.0, -frac_bits); }

FxPValue::FxPValue(int32_t raw_, FxPFormat fmt_) : raw(raw_), fmt(fmt_) {
  if (raw < fmt.min_raw() || raw > fmt.max_raw())
    throw ContractViolation("FxPValue: raw " + std::to_string(raw_) +
                            " does not fit " + fmt.name());
}

double FxPValue::value() const { return double(raw) * fmt.resolution(); }

FxPValue quantize(double x, FxPFormat fmt) {
  if (!std::isfinite(x)) throw ContractViolation("quantize: non-finite input");
  double scaled = std::ldexp(x, fmt.frac_bits);
  // round half away from zero
  double rounded = scaled >= 0.0 ? std::floor(scaled + 0.5)
                                 : std::ceil(scaled - 0.5);
  if (rounded > double(fmt.max_raw())) return FxPValue(fmt.max_raw(), fmt);
  if (rounded < double(fmt.min_raw())) return FxPValue(fmt.min_raw(), fmt);
  return FxPValue(int32_t(rounded), fmt);
}

double dequantize(FxPValue v) { return v.value(); }

namespace {

int32_t saturate_raw(int64_t raw, FxPFormat fmt) {
  if (raw > fmt.max_raw()) return fmt.max_raw();
  if (raw < fmt.min_raw()) return fmt.min_raw();
  return int32_t(raw);
}

}  // namespace

FxPValue add_sat(FxPValue a, FxPValue b) {
  if (a.fmt != b.fmt)
    throw ContractViolation("add_sat: format mismatch (" + a.fmt.name() +
                            " vs " + b.fmt.name() + ")");
  return FxPValue(saturate_raw(int64_t(a.raw) + int64_t(b.raw), a.fmt), a.fmt);
}

FxPValue sub_sat(FxPValue a, FxPValue b) {
  if (a.fmt != b.fmt)
    throw ContractViolation("sub_sat: format mismatch (" + a.fmt.name() +
                            " vs " + b.fmt.name() + ")");
  return FxPValue(saturate_raw(int64_t(a.raw) - int64_t(b.raw), a.fmt), a.fmt);
}

FxPValue shift_right_arith(FxPValue a, int k) {
  if (k < 0 || k >= a.fmt.total_bits)
    throw ContractViolation("shift_right_arith: shift " + std::to_string(k) +
                            " out of range for " + a.fmt.name());
  // C++20 defines >> on signed integers as arithmetic (floor).
  return FxPValue(a.raw >> k, a.fmt);
}

double ExtFx::value() const { return std::ldexp(double(raw), -frac); }

ExtFx to_ext(FxPValue v, int guard_bits) {
  return {int64_t(v.raw) << guard_bits, v.fmt.frac_bits + guard_bits};
}

ExtFx ext_from_double(double x, int frac) {
  double scaled = std::ldexp(x, frac);
  double rounded = scaled >= 0.0 ? std::floor(scaled + 0.5)
                                 : std::ceil(scaled - 0.5);
  return {int64_t(rounded), frac};
}

FxPValue from_ext(ExtFx v, FxPFormat fmt) {
  int delta = v.frac - fmt.frac_bits;
  int64_t raw;
  if (delta <= 0) {
    // target grid is finer or equal: exact
    int sh = -delta;
    if (sh >= 62) throw ContractViolation("from_ext: rescale overflow");
    raw = v.raw << sh;
  } else if (delta >= 63) {
    raw = 0;
  } else {
    int64_t half = int64_t(1) << (delta - 1);
    raw = v.raw >= 0 ? (v.raw + half) >> delta : -((-v.raw + half) >> delta);
  }
  return FxPValue(saturate_raw(raw, fmt), fmt);
}

ExtFx ext_round_to_frac(ExtFx v, int frac) {
  int delta = v.frac - frac;
  if (delta <= 0) return {v.raw << -delta, frac};
  if (delta >= 63) return {0, frac};
  int64_t half = int64_t(1) << (delta - 1);
  int64_t raw = v.raw >= 0 ? (v.raw + half) >> delta : -((-v.raw + half) >> delta);
  return {raw, frac};
}

int64_t shift_toward_zero(int64_t v, int k) {
  if (k >= 63) return 0;
  return v >= 0 ? v >> k : -((-v) >> k);
}

int clog2(uint64_t x) {
  if (x <= 1) return 0;
  return std::bit_width(x - 1);
}

}  // namespace corvet
