#include "corvet/pooling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>

namespace corvet::aad {

FeatureMap::FeatureMap(int c, int h, int w, FxPFormat fmt_)
    : channels(c), height(h), width(w), fmt(fmt_) {
  if (c < 1 || h < 1 || w < 1)
    throw ConfigError("FeatureMap: dimensions must be >= 1");
  raw.assign(std::size_t(c) * h * w, 0);
}

int32_t& FeatureMap::at(int c, int y, int x) {
  return raw[(std::size_t(c) * height + y) * width + x];
}

int32_t FeatureMap::at(int c, int y, int x) const {
  return raw[(std::size_t(c) * height + y) * width + x];
}

FxPValue FeatureMap::get(int c, int y, int x) const {
  return FxPValue(at(c, y, x), fmt);
}

FxPValue aad2(FxPValue a, FxPValue b) {
  FxPValue diff = sub_sat(a, b);
  int sign = diff.raw >= 0 ? 1 : -1;  // comparator against zero
  int64_t abs_dev = int64_t(diff.raw) * sign;
  return FxPValue(int32_t(abs_dev >> 1), a.fmt);
}

AadSum aad_sum(std::span<const FxPValue> values) {
  std::size_t n = values.size();
  if (n < 2) throw ConfigError("aad_sum: needs at least two inputs");
  const FxPFormat fmt = values.front().fmt;
  for (const auto& v : values)
    if (v.fmt != fmt) throw ContractViolation("aad_sum: mixed formats");

  // Row-major index order at extended precision: permutation invariance
  // holds bit-exactly because no intermediate saturates.
  const int frac = fmt.frac_bits + kGuardBits;
  int64_t sum = 0;
  int cycles = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      int64_t d = int64_t(values[i].raw) - int64_t(values[j].raw);
      sum += 2 * std::llabs(d);  // each unordered pair counted twice
      ++cycles;                  // one SA stage per unordered pair
    }
  }
  return {{sum << kGuardBits, frac}, int64_t(n) * int64_t(n - 1), cycles};
}

namespace {

FxPValue divide_by_m(AadSum s, FxPFormat fmt) {
  if (std::has_single_bit(uint64_t(s.m)))
    return from_ext(s.sum.scaled_pow2(-std::bit_width(uint64_t(s.m)) + 1),
                    fmt);

  // Pre-shift the quotient scale so |num/den| < 2 for the vectoring divider.
  ExtFx num = s.sum;
  ExtFx den{s.m << num.frac, num.frac};
  int up = 0;
  while (std::llabs(num.raw) >= 2 * (den.raw << up)) ++up;
  auto r = cordic::divide_ext(num, {den.raw << up, den.frac},
                              fmt.frac_bits + kGuardBits,
                              fmt.frac_bits + kGuardBits);
  return from_ext(r.z.scaled_pow2(up), fmt);
}

}  // namespace

FxPValue aad_n(std::span<const FxPValue> values) {
  return divide_by_m(aad_sum(values), values.front().fmt);
}

int aad_cycles(int n, FxPFormat fmt) {
  int pairs = n * (n - 1) / 2;
  int64_t m = int64_t(n) * (n - 1);
  int divide = std::has_single_bit(uint64_t(m))
                   ? 1
                   : fmt.frac_bits + kGuardBits;
  return pairs + divide;
}

namespace {

void check_window(const FeatureMap& map, const PoolWindow& win) {
  if (win.window_h < 1 || win.window_w < 1 || win.stride < 1)
    throw ConfigError("pool: window and stride must be >= 1");
  if (win.window_h * win.window_w < 2)
    throw ConfigError("pool: window must hold at least two elements");
  if (win.window_h > map.height || win.window_w > map.width)
    throw ConfigError("pool: window larger than feature map");
}

}  // namespace

FeatureMap pool(const FeatureMap& map, const PoolWindow& win,
                PoolVariant variant) {
  check_window(map, win);
  int out_h = (map.height - win.window_h) / win.stride + 1;
  int out_w = (map.width - win.window_w) / win.stride + 1;
  FeatureMap out(map.channels, out_h, out_w, map.fmt);

  std::vector<FxPValue> window;
  window.reserve(std::size_t(win.window_h) * win.window_w);
  for (int c = 0; c < map.channels; ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        if (variant == PoolVariant::parallel) {
          // parallel form: extract the window, one wide AAD reduction
          window.clear();
          for (int ky = 0; ky < win.window_h; ++ky)
            for (int kx = 0; kx < win.window_w; ++kx)
              window.push_back(
                  map.get(c, oy * win.stride + ky, ox * win.stride + kx));
          out.at(c, oy, ox) = aad_n(window).raw;
        } else {
          // sliding form: deviations accumulate in a register as the
          // window elements stream past
          const int frac = map.fmt.frac_bits + kGuardBits;
          int64_t acc = 0;
          int count = 0;
          for (int ky = 0; ky < win.window_h; ++ky) {
            for (int kx = 0; kx < win.window_w; ++kx) {
              int32_t v =
                  map.at(c, oy * win.stride + ky, ox * win.stride + kx);
              // pair the incoming element against everything already seen
              for (int py = 0; py <= ky; ++py) {
                int lim = (py == ky) ? kx : win.window_w;
                for (int px = 0; px < lim; ++px) {
                  int64_t d = int64_t(map.at(c, oy * win.stride + py,
                                             ox * win.stride + px)) -
                              v;
                  acc += 2 * std::llabs(d);
                }
              }
              ++count;
            }
          }
          AadSum s{{acc << kGuardBits, frac},
                   int64_t(count) * (count - 1),
                   count * (count - 1) / 2};
          out.at(c, oy, ox) = divide_by_m(s, map.fmt).raw;
        }
      }
    }
  }
  return out;
}

FeatureMap normalize(const FeatureMap& map) {
  if (map.raw.empty()) throw ConfigError("normalize: empty map");
  int32_t max_abs = 0;
  for (int32_t r : map.raw) max_abs = std::max(max_abs, std::abs(r));
  int64_t one = int64_t(1) << map.fmt.frac_bits;
  if (max_abs <= one) return map;  // all-zero maps included

  int shift = clog2(uint64_t((int64_t(max_abs) + one - 1) / one));
  FeatureMap out = map;
  for (auto& r : out.raw) r >>= shift;  // arithmetic shift, floor semantics
  return out;
}

}  // namespace corvet::aad
