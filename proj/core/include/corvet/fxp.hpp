#pragma once

#include <cstdint>
#include <string>

#include "corvet/errors.hpp"

namespace corvet {

// Guard bits carried by the extended datapath registers. Kernel iterations
// run at format width + kGuardBits with a single rounding into the output
// format.
inline constexpr int kGuardBits = 4;

// Two's-complement fixed-point format. Signed always; total width is one of
// 4, 8 or 16 bits. Value of a raw payload r is r * 2^-frac_bits.
struct FxPFormat {
  int total_bits = 16;
  int frac_bits = 14;

  FxPFormat() = default;
  FxPFormat(int total, int frac);

  // Default Q-split keeps two integer bits of headroom: Q4.2 / Q8.6 / Q16.14.
  static FxPFormat with_default_frac(int total_bits);

  // Parses "fxp8", "fxp16.f12", ... Throws LoadError on anything else.
  static FxPFormat parse(const std::string& name);
  std::string name() const;

  int32_t max_raw() const { return (int32_t(1) << (total_bits - 1)) - 1; }
  int32_t min_raw() const { return -(int32_t(1) << (total_bits - 1)); }
  double max_value() const;
  double min_value() const;
  double resolution() const;  // 2^-frac_bits

  bool operator==(const FxPFormat&) const = default;
};

// One datapath word: raw two's-complement payload plus its format.
struct FxPValue {
  int32_t raw = 0;
  FxPFormat fmt;

  FxPValue() = default;
  FxPValue(int32_t raw, FxPFormat fmt);

  double value() const;
};

// Nearest representable value, round-half-away-from-zero, saturating.
FxPValue quantize(double x, FxPFormat fmt);
double dequantize(FxPValue v);

// Saturating add/sub; both operands must share a format.
FxPValue add_sat(FxPValue a, FxPValue b);
FxPValue sub_sat(FxPValue a, FxPValue b);

// Arithmetic right shift of the raw payload (floor semantics), 0 <= k < total.
FxPValue shift_right_arith(FxPValue a, int k);

// --------------------------------------------------------------------------
// Extended-precision working register used inside kernels. Value is
// raw * 2^-frac; int64 payload gives integer headroom, frac carries the
// guard bits. Rescaling by powers of two is a frac adjustment (exact).
struct ExtFx {
  int64_t raw = 0;
  int frac = 0;

  double value() const;
  ExtFx scaled_pow2(int k) const { return {raw, frac - k}; }
};

ExtFx to_ext(FxPValue v, int guard_bits = kGuardBits);
ExtFx ext_from_double(double x, int frac);  // round to nearest, no saturation

// Single rounding (half-away-from-zero) into the output format, saturating.
FxPValue from_ext(ExtFx v, FxPFormat fmt);

// Round an extended value to a coarser extended grid (half-away).
ExtFx ext_round_to_frac(ExtFx v, int frac);

// Shift magnitude toward zero: the kernel-internal shifter. Sign-symmetric,
// so negating an operand negates every iterate bit-exactly.
int64_t shift_toward_zero(int64_t v, int k);

// ceil(log2(x)) with clog2(1) = 0; x >= 1.
int clog2(uint64_t x);

}  // namespace corvet
