#pragma once

#include <span>
#include <string>
#include <vector>

#include "corvet/cordic.hpp"
#include "corvet/fxp.hpp"

namespace corvet::af {

enum class ActivationKind { relu, sigmoid, tanh, softmax, gelu, swish, selu };

ActivationKind parse_kind(const std::string& name);
std::string to_string(ActivationKind k);

// Each kind maps to exactly one datapath class: relu bypasses, sigmoid/tanh/
// selu run on the hyperbolic-rotation path, gelu/swish add the two product
// multipliers, softmax adds the vectoring divider and staging FIFO.
enum class DatapathClass { bypass, hr, hr_mul, hr_lv_fifo };
DatapathClass datapath_class(ActivationKind k);

// One request against the shared block. Softmax consumes the whole sequence;
// every other kind applies elementwise. All values share cfg.format.
struct AfRequest {
  std::vector<FxPValue> values;
  ActivationKind kind = ActivationKind::relu;
  cordic::CordicConfig cfg;
};

// Busy cycles are attributed to the datapath class serving the request:
// hr_busy counts the CORDIC core working for HR-class functions, lv_busy the
// divider passes of softmax normalisation. Dispatch overhead is one cycle
// per element.
struct AfReport {
  int64_t cycles_total = 0;
  int64_t hr_busy_cycles = 0;
  int64_t lv_busy_cycles = 0;
  int fifo_peak_depth = 0;

  double utilization_hr() const {
    return cycles_total ? double(hr_busy_cycles) / double(cycles_total) : 0.0;
  }
  double utilization_lv() const {
    return cycles_total ? double(lv_busy_cycles) / double(cycles_total) : 0.0;
  }
  AfReport& operator+=(const AfReport& o);
};

struct AfResult {
  std::vector<FxPValue> values;
  AfReport report;
};

AfResult apply(const AfRequest& req);

// Elementwise functions. Results are quantized to the operand's format;
// report (when given) accumulates busy cycles.
FxPValue relu(FxPValue x);
FxPValue tanh(FxPValue x, const cordic::CordicConfig& cfg,
              AfReport* report = nullptr);
// sigmoid(x) = 0.5 * (1 + tanh(x/2)): the switching multiplexer feeds the
// half-argument through the tanh path and rescales, bit-exactly.
FxPValue sigmoid(FxPValue x, const cordic::CordicConfig& cfg,
                 AfReport* report = nullptr);
FxPValue gelu(FxPValue x, const cordic::CordicConfig& cfg,
              AfReport* report = nullptr);
FxPValue swish(FxPValue x, const cordic::CordicConfig& cfg,
               AfReport* report = nullptr);
FxPValue selu(FxPValue x, const cordic::CordicConfig& cfg,
              AfReport* report = nullptr);

// Two-pass streaming softmax: exponentials of max-shifted inputs stage
// through a FIFO while their sum accumulates, then the divider normalises.
std::vector<FxPValue> softmax(std::span<const FxPValue> values,
                              const cordic::CordicConfig& cfg,
                              AfReport* report = nullptr);

// Decompose x so that exp(x) = 2^k * exp(theta) with theta in
// [-ln2/2, ln2/2] (plus one quantisation step); reconstruction is a shift.
struct RangeReduced {
  ExtFx theta;
  int k = 0;
};
RangeReduced range_reduce_exp(ExtFx x);

// exp(value(x)) at x.frac via range reduction + hyperbolic rotation.
ExtFx exp_ext(ExtFx x, int hr_iterations, AfReport* report = nullptr);

// SELU constants (standard published values; the block stores them as
// datapath constants).
inline constexpr double kSeluLambda = 1.0507;
inline constexpr double kSeluAlpha = 1.6733;

}  // namespace corvet::af
