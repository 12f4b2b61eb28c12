#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "corvet/cordic.hpp"
#include "corvet/fxp.hpp"

namespace corvet::aad {

struct PoolWindow {
  int window_h = 2;
  int window_w = 2;
  int stride = 2;
};

// channels x height x width tensor; all elements share one format.
struct FeatureMap {
  int channels = 0, height = 0, width = 0;
  FxPFormat fmt;
  std::vector<int32_t> raw;  // row-major c,h,w

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, FxPFormat fmt);

  int32_t& at(int c, int y, int x);
  int32_t at(int c, int y, int x) const;
  FxPValue get(int c, int y, int x) const;
  std::size_t size() const { return raw.size(); }
};

// |a - b| / 2, built as subtract, sign compare, multiply-by-sign, shift.
FxPValue aad2(FxPValue a, FxPValue b);

// Ordered-pair sum and cycle count of one n-input AAD reduction, kept at
// extended precision (pre-divide). Exposed so tests can check the
// accumulation path against the brute-force formula bit-exactly.
struct AadSum {
  ExtFx sum;      // sum over ordered pairs i != j of |x_i - x_j|
  int64_t m = 0;  // normalisation factor N(N-1)
  int cycles = 0;
};
AadSum aad_sum(std::span<const FxPValue> values);

// (sum over ordered pairs of |x_i - x_j|) / (N(N-1)). Power-of-two factors
// divide by an exact shift; otherwise the CORDIC linear-vectoring divider
// runs with the numerator pre-scaled into its |num/den| < 2 domain.
FxPValue aad_n(std::span<const FxPValue> values);

enum class PoolVariant { sliding, parallel };

// AAD pooling over every window placement; channels are independent.
// Both hardware variants are implemented and must agree bit-exactly.
FeatureMap pool(const FeatureMap& map, const PoolWindow& win,
                PoolVariant variant = PoolVariant::sliding);

// Power-of-two rescale by 1/2^ceil(log2 max|x|) so outputs lie in [-1, 1];
// identity when max|x| <= 1 (all-zero maps included).
FeatureMap normalize(const FeatureMap& map);

// Cycle cost of one n-input AAD reduction in the sliding-window datapath:
// one cycle per unordered pair plus the normalising divide.
int aad_cycles(int n, FxPFormat fmt);

}  // namespace corvet::aad
