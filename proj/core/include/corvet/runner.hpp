#pragma once

#include <string>
#include <vector>

#include "corvet/engine.hpp"
#include "corvet/model.hpp"

namespace corvet::runner {

// Double-precision forward pass with the same operator semantics (tanh-form
// GELU, AAD pooling, max-shifted softmax): the accuracy oracle for every
// fixed-point run.
std::vector<double> run_float(const ModelSpec& m,
                              std::span<const double> input);

struct QuantizedModel {
  std::vector<engine::QuantizedLayer> layers;
  mem::Topology topology;
  mem::AddressSpec spec;
  std::vector<int> layer_index;  // network layer -> address layer (-1: none)

  engine::ParamSource source(const mem::ParamMemory& mem) const;
};

// Per-tensor symmetric quantization. The scale is the smallest power of two
// covering max|w| (a shift in the datapath); biases share the layer scale.
QuantizedModel quantize_model(const ModelSpec& m);

// Parameter image in LIFO write order (reverse of the engine read order).
mem::ParamImage build_image(const QuantizedModel& q);
mem::ParamMemory load_image(const mem::ParamImage& img,
                            const QuantizedModel& q);

struct SensitivityEntry {
  int layer = 0;
  double drop_pp = 0.0;  // accuracy drop when only this layer approximates
};

struct SensitivityReport {
  std::vector<SensitivityEntry> per_layer;
  std::vector<cordic::Accuracy> assignment;
  double threshold = 0.5;
  double baseline_accuracy = 0.0;  // all-accurate fixed point
};

// One-layer-at-a-time scan: layers whose approximation costs more than
// `threshold_pp` points of accuracy are pinned accurate.
SensitivityReport sensitivity_scan(const QuantizedModel& q,
                                   const Dataset& ds,
                                   const engine::EngineConfig& cfg,
                                   double threshold_pp = 0.5);

struct EvalResult {
  double float_accuracy = 0.0;
  double fxp_accuracy = 0.0;
  std::vector<int> predictions;
  std::vector<int> float_predictions;
  std::vector<std::vector<int32_t>> outputs_raw;  // per sample
  engine::CycleReport network_report;             // one forward pass
  std::vector<engine::CycleReport> layer_reports;
  int64_t total_cycles = 0;                       // x sample count
  std::vector<cordic::Accuracy> assignment;
  std::vector<int> scale_exps;
  int sample_count = 0;
};

// Runs every sample through the engine under the given per-layer accuracy
// assignment; reports top-1 accuracy and cycle totals. Parallelism is capped
// by CORVET_THREADS (default 1); aggregation is order-independent.
EvalResult evaluate(const QuantizedModel& q, const ModelSpec& m,
                    const Dataset& ds, const engine::EngineConfig& cfg,
                    const std::vector<cordic::Accuracy>& assignment,
                    const mem::ParamMemory* memory = nullptr);

std::vector<cordic::Accuracy> uniform_assignment(std::size_t layers,
                                                 cordic::Accuracy a);

int thread_cap();  // CORVET_THREADS, default 1

}  // namespace corvet::runner
