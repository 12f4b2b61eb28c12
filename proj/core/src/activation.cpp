#include "corvet/activation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

namespace corvet::af {

using cordic::CordicConfig;

ActivationKind parse_kind(const std::string& name) {
  if (name == "relu") return ActivationKind::relu;
  if (name == "sigmoid") return ActivationKind::sigmoid;
  if (name == "tanh") return ActivationKind::tanh;
  if (name == "softmax") return ActivationKind::softmax;
  if (name == "gelu") return ActivationKind::gelu;
  if (name == "swish") return ActivationKind::swish;
  if (name == "selu") return ActivationKind::selu;
  throw LoadError("unknown activation kind '" + name + "'");
}

std::string to_string(ActivationKind k) {
  switch (k) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::softmax: return "softmax";
    case ActivationKind::gelu: return "gelu";
    case ActivationKind::swish: return "swish";
    case ActivationKind::selu: return "selu";
  }
  throw ContractViolation("bad activation kind");
}

DatapathClass datapath_class(ActivationKind k) {
  switch (k) {
    case ActivationKind::relu: return DatapathClass::bypass;
    case ActivationKind::sigmoid:
    case ActivationKind::tanh:
    case ActivationKind::selu: return DatapathClass::hr;
    case ActivationKind::gelu:
    case ActivationKind::swish: return DatapathClass::hr_mul;
    case ActivationKind::softmax: return DatapathClass::hr_lv_fifo;
  }
  throw ContractViolation("bad activation kind");
}

AfReport& AfReport::operator+=(const AfReport& o) {
  cycles_total += o.cycles_total;
  hr_busy_cycles += o.hr_busy_cycles;
  lv_busy_cycles += o.lv_busy_cycles;
  fifo_peak_depth = std::max(fifo_peak_depth, o.fifo_peak_depth);
  return *this;
}

namespace {

struct Depths {
  int hr;
  int lv;
  int mac;
};

Depths kernel_depths(const CordicConfig& cfg) {
  if (cfg.iterations > 0) return {cfg.iterations, cfg.iterations,
                                  cfg.iterations};
  return {cordic::hyperbolic_iterations(cfg.format, cfg.accuracy),
          cordic::divide_iterations(cfg.format, cfg.accuracy),
          cordic::mac_cycles(cfg.format, cfg.accuracy)};
}

void add_hr(AfReport* r, int cycles) {
  if (!r) return;
  r->cycles_total += cycles;
  r->hr_busy_cycles += cycles;
}

void add_lv(AfReport* r, int cycles) {
  if (!r) return;
  r->cycles_total += cycles;
  r->lv_busy_cycles += cycles;
}

void add_mul(AfReport* r, int cycles) {
  if (r) r->cycles_total += cycles;
}

void add_dispatch(AfReport* r) {
  if (r) r->cycles_total += 1;
}

// The block's dedicated small multipliers: one-cycle exact products with a
// single rounding back to the left operand's grid.
ExtFx small_mul(ExtFx a, ExtFx b, AfReport* report) {
  __int128 prod = __int128(a.raw) * b.raw;
  __int128 half = __int128(1) << (b.frac - 1);
  int64_t raw = prod >= 0 ? int64_t((prod + half) >> b.frac)
                          : -int64_t(((-prod) + half) >> b.frac);
  add_mul(report, 1);
  return {raw, a.frac};
}

}  // namespace

RangeReduced range_reduce_exp(ExtFx x) {
  const int f = x.frac;
  const int64_t inv_ln2 = ext_from_double(1.0 / std::numbers::ln2, f).raw;
  const int64_t ln2 = ext_from_double(std::numbers::ln2, f).raw;

  // k = round(x / ln2)
  __int128 prod = __int128(x.raw) * inv_ln2;
  __int128 half = __int128(1) << (2 * f - 1);
  int64_t k = prod >= 0 ? int64_t((prod + half) >> (2 * f))
                        : -int64_t(((-prod) + half) >> (2 * f));
  ExtFx theta{x.raw - k * ln2, f};
  return {theta, int(k)};
}

ExtFx exp_ext(ExtFx x, int hr_iterations, AfReport* report) {
  RangeReduced rr = range_reduce_exp(x);
  auto h = cordic::hyperbolic_ext(rr.theta, hr_iterations);
  add_hr(report, h.cycles);
  // exp(theta) = cosh + sinh, then the 2^k reconstruction shift
  ExtFx e{h.x.raw + h.y.raw, x.frac};
  return ext_round_to_frac({e.raw, e.frac - rr.k}, x.frac);
}

FxPValue relu(FxPValue x) {
  return x.raw >= 0 ? x : FxPValue(0, x.fmt);
}

namespace {

// tanh on the extended grid: (1 - e^-2|x|) / (1 + e^-2|x|), sign restored.
// One shared path for every argument keeps the response odd bit-exactly.
ExtFx tanh_ext(ExtFx x, const Depths& d, AfReport* report) {
  const int f = x.frac;
  int sign = x.raw >= 0 ? 1 : -1;
  ExtFx minus2ax{-2 * (sign * x.raw), f};
  ExtFx e = exp_ext(minus2ax, d.hr, report);
  int64_t one = int64_t(1) << f;
  ExtFx num{one - e.raw, f};
  ExtFx den{one + e.raw, f};
  auto q = cordic::divide_ext(num, den, d.lv, f);
  add_hr(report, q.cycles);  // class-attributed: the core serves an HR kind
  // the sign was factored out, so tanh(|x|) >= 0: a negative quotient is
  // residual noise and clears to keep the zero fixed point exact
  int64_t mag = std::max<int64_t>(q.z.raw, 0);
  return {sign * mag, f};
}

}  // namespace

FxPValue tanh(FxPValue x, const CordicConfig& cfg, AfReport* report) {
  add_dispatch(report);
  return from_ext(tanh_ext(to_ext(x), kernel_depths(cfg), report), x.fmt);
}

FxPValue sigmoid(FxPValue x, const CordicConfig& cfg, AfReport* report) {
  add_dispatch(report);
  Depths d = kernel_depths(cfg);
  // Exact half-argument: same raw, one more fractional bit.
  FxPValue t;
  if (x.fmt.frac_bits + 1 < x.fmt.total_bits) {
    FxPValue half_x(x.raw, FxPFormat(x.fmt.total_bits, x.fmt.frac_bits + 1));
    t = from_ext(tanh_ext(to_ext(half_x), d, report), half_x.fmt);
  } else {
    // no spare fractional bit: halve on the extended grid
    ExtFx xe = to_ext(x);
    t = from_ext(tanh_ext({xe.raw, xe.frac + 1}, d, report),
                 FxPFormat(x.fmt.total_bits, x.fmt.frac_bits));
  }
  ExtFx te = to_ext(t);
  int64_t one = int64_t(1) << te.frac;
  return from_ext(ExtFx{one + te.raw, te.frac + 1}, x.fmt);
}

FxPValue swish(FxPValue x, const CordicConfig& cfg, AfReport* report) {
  add_dispatch(report);
  Depths d = kernel_depths(cfg);
  FxPValue s;
  {
    AfReport inner;
    s = sigmoid(x, cfg, &inner);
    if (report) {
      report->cycles_total += inner.cycles_total - 1;  // dispatch once
      report->hr_busy_cycles += inner.hr_busy_cycles;
    }
  }
  // outer product on the shared core in linear-rotation mode
  auto r = cordic::mac_ext({0, to_ext(x).frac}, to_ext(x), to_ext(s), d.mac);
  add_hr(report, r.cycles);
  return from_ext(r.y, x.fmt);
}

FxPValue gelu(FxPValue x, const CordicConfig& cfg, AfReport* report) {
  add_dispatch(report);
  Depths d = kernel_depths(cfg);
  ExtFx xe = to_ext(x);
  const int f = xe.frac;
  // 0.5 x (1 + tanh(c (x + 0.044715 x^3))). The cube comes from repeated
  // linear MACs with quarter-scaled z operands (|z| < 2 domain); the
  // inner-poly scaling and the final 0.5 x (1+t) product run on the block's
  // two small multipliers.
  const ExtFx quarter_x{xe.raw, f + 2};
  auto p = cordic::mac_ext({0, f}, xe, quarter_x, d.mac);   // x^2/4
  add_hr(report, p.cycles);
  auto q = cordic::mac_ext({0, f}, p.y, quarter_x, d.mac);  // x^3/16
  add_hr(report, q.cycles);
  auto cube = cordic::mac_ext({0, f}, q.y,
                              ext_from_double(16.0 * 0.044715, f), d.mac);
  add_hr(report, cube.cycles);
  ExtFx pre{xe.raw + cube.y.raw, f};
  ExtFx u = small_mul(pre, ext_from_double(std::sqrt(2.0 / std::numbers::pi), f),
                      report);
  ExtFx t = tanh_ext(u, d, report);
  int64_t one = int64_t(1) << f;
  ExtFx g = small_mul(ExtFx{one + t.raw, f}, xe, report);
  return from_ext(g.scaled_pow2(-1), x.fmt);
}

FxPValue selu(FxPValue x, const CordicConfig& cfg, AfReport* report) {
  add_dispatch(report);
  Depths d = kernel_depths(cfg);
  ExtFx xe = to_ext(x);
  const int f = xe.frac;
  if (x.raw > 0) {
    auto r = cordic::mac_ext({0, f}, xe, ext_from_double(kSeluLambda, f),
                             d.mac);
    add_hr(report, r.cycles);  // scaling runs on the shared core
    return from_ext(r.y, x.fmt);
  }
  if (x.raw == 0) return FxPValue(0, x.fmt);
  ExtFx e = exp_ext(xe, d.hr, report);
  int64_t one = int64_t(1) << f;
  ExtFx em1{e.raw - one, f};
  auto r = cordic::mac_ext({0, f}, em1,
                           ext_from_double(kSeluLambda * kSeluAlpha, f),
                           d.mac);
  add_hr(report, r.cycles);
  return from_ext(r.y, x.fmt);
}

std::vector<FxPValue> softmax(std::span<const FxPValue> values,
                              const CordicConfig& cfg, AfReport* report) {
  if (values.empty()) throw ContractViolation("softmax: empty input");
  const FxPFormat fmt = values.front().fmt;
  Depths d = kernel_depths(cfg);

  int32_t max_raw = values.front().raw;
  for (const auto& v : values) max_raw = std::max(max_raw, v.raw);

  // pass 1: e_i = exp(x_i - m) staged through the FIFO, sum accumulating
  std::deque<ExtFx> fifo;
  const int f = fmt.frac_bits + kGuardBits;
  int64_t sum = 0;
  for (const auto& v : values) {
    add_dispatch(report);
    ExtFx shifted{int64_t(v.raw - max_raw) << kGuardBits, f};
    ExtFx e = exp_ext(shifted, d.hr, report);
    fifo.push_back(e);
    sum += e.raw;
  }
  int peak = int(fifo.size());

  // pass 2: pop and normalise through the vectoring divider
  std::vector<FxPValue> out;
  out.reserve(values.size());
  ExtFx den{sum, f};
  while (!fifo.empty()) {
    ExtFx e = fifo.front();
    fifo.pop_front();
    auto q = cordic::divide_ext(e, den, d.lv, f);
    add_lv(report, q.cycles);
    out.push_back(from_ext(q.z, fmt));
  }
  if (report) report->fifo_peak_depth = std::max(report->fifo_peak_depth, peak);
  return out;
}

AfResult apply(const AfRequest& req) {
  if (req.values.empty())
    throw ContractViolation("af::apply: empty request");
  for (const auto& v : req.values)
    if (v.fmt != req.cfg.format)
      throw ContractViolation("af::apply: value format " + v.fmt.name() +
                              " does not match request format " +
                              req.cfg.format.name());

  AfResult res;
  res.values.reserve(req.values.size());
  if (req.kind == ActivationKind::softmax) {
    res.values = softmax(req.values, req.cfg, &res.report);
    return res;
  }
  for (const auto& v : req.values) {
    switch (req.kind) {
      case ActivationKind::relu:
        add_dispatch(&res.report);
        res.values.push_back(relu(v));
        break;
      case ActivationKind::sigmoid:
        res.values.push_back(sigmoid(v, req.cfg, &res.report));
        break;
      case ActivationKind::tanh:
        res.values.push_back(tanh(v, req.cfg, &res.report));
        break;
      case ActivationKind::gelu:
        res.values.push_back(gelu(v, req.cfg, &res.report));
        break;
      case ActivationKind::swish:
        res.values.push_back(swish(v, req.cfg, &res.report));
        break;
      case ActivationKind::selu:
        res.values.push_back(selu(v, req.cfg, &res.report));
        break;
      case ActivationKind::softmax:
        break;  // handled above
    }
  }
  return res;
}

}  // namespace corvet::af
