#pragma once

#include <vector>

#include "corvet/fxp.hpp"

namespace corvet::cordic {

enum class Coordinate { linear, hyperbolic };
enum class Direction { rotation, vectoring };

// Only three combinations are used: linear-rotation (MAC), linear-vectoring
// (divide) and hyperbolic-rotation (sinh/cosh/exp).
struct CordicMode {
  Coordinate coordinate = Coordinate::linear;
  Direction direction = Direction::rotation;
  bool operator==(const CordicMode&) const = default;
};

inline constexpr CordicMode kLinearRotation{Coordinate::linear,
                                            Direction::rotation};
inline constexpr CordicMode kLinearVectoring{Coordinate::linear,
                                             Direction::vectoring};
inline constexpr CordicMode kHyperbolicRotation{Coordinate::hyperbolic,
                                                Direction::rotation};

enum class Accuracy { approximate, accurate };

Accuracy parse_accuracy(const std::string& name);
std::string to_string(Accuracy a);

// Per-MAC cycle counts by (width, accuracy):
//   8-bit 4/5 cycles, 16-bit 7/9 cycles, 4-bit 4 cycles (accurate only).
// One iteration retires per cycle, so the entry is also the iteration count.
int mac_cycles(FxPFormat fmt, Accuracy acc);

// Iteration depths for the activation-side kernels. Approximate mode uses the
// MAC depth + 3; accurate mode the full format width. 4-bit has no
// approximate operating point.
int hyperbolic_iterations(FxPFormat fmt, Accuracy acc);
// Division depth tracks the extended datapath width (frac + guard bits) so
// quotient residuals stay below the output rounding step.
int divide_iterations(FxPFormat fmt, Accuracy acc);

struct CordicConfig {
  CordicMode mode = kLinearRotation;
  Accuracy accuracy = Accuracy::accurate;
  FxPFormat format;
  int iterations = 0;  // 0 selects the per-mode default for (format, accuracy)

  static CordicConfig mac(FxPFormat fmt, Accuracy acc);
  static CordicConfig divide(FxPFormat fmt, Accuracy acc);
  static CordicConfig hyperbolic(FxPFormat fmt, Accuracy acc);

  int effective_iterations() const;
};

struct CordicResult {
  FxPValue x, y, z;
  int cycles = 0;
};

// Shift-index schedule. Linear mode: [1..n] (a zero-shift pre-rotation is
// folded into operand load, extending the convergence domain to |z| < 2
// without costing a cycle). Hyperbolic mode: [1..m] with indices 4 and 13
// repeated, truncated to n entries.
std::vector<int> iteration_schedule(CordicMode mode, int n);

// Gain of the hyperbolic schedule of length n (product over the schedule of
// sqrt(1 - 2^-2i)); inputs are pre-multiplied by its reciprocal.
double hyperbolic_gain(int n);

// acc + w*a via linear rotation. Preconditions: all operands share
// cfg.format, |value(a)| < 2.
CordicResult linear_mac(FxPValue acc, FxPValue w, FxPValue a,
                        const CordicConfig& cfg);

// num/den via linear vectoring. Preconditions: den != 0, |num/den| < 2.
CordicResult linear_divide(FxPValue num, FxPValue den,
                           const CordicConfig& cfg);

// x ~ cosh(theta), y ~ sinh(theta), x+y ~ exp(theta), gain-compensated.
// Precondition: |value(theta)| <= 1.11.
CordicResult hyperbolic_rotation(FxPValue theta, const CordicConfig& cfg);

// --------------------------------------------------------------------------
// Extended-precision entry points. These are the shared iterative datapath;
// the public FxPValue API above wraps them with a single output rounding.
// Chained consumers (activation unit, pooling divide, dot-product
// accumulation) stay in extended registers between calls.

struct ExtResult {
  ExtFx x, y, z;
  int cycles = 0;
};

// y_final = acc + w * a. acc and w share a frac; a carries its own.
ExtResult mac_ext(ExtFx acc, ExtFx w, ExtFx a, int iterations);

// z_final = num / den at quotient_frac. num and den share a frac.
ExtResult divide_ext(ExtFx num, ExtFx den, int iterations, int quotient_frac);

// x ~ cosh, y ~ sinh at theta.frac.
ExtResult hyperbolic_ext(ExtFx theta, int iterations);

inline constexpr double kHyperbolicDomain = 1.11;

}  // namespace corvet::cordic
