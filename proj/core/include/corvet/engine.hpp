#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corvet/activation.hpp"
#include "corvet/cordic.hpp"
#include "corvet/fxp.hpp"
#include "corvet/memmap.hpp"
#include "corvet/pooling.hpp"
#include "corvet/trace.hpp"

namespace corvet::engine {

struct EngineConfig {
  int num_pes = 64;       // 64, 128 or 256
  int bank_depth = 32;    // kernel-bank entries
  FxPFormat default_format = FxPFormat(8, 6);
  cordic::Accuracy default_accuracy = cordic::Accuracy::accurate;
  bool overlap_af = true;       // overlap activation with the next MAC batch
  int iterations_override = 0;  // >0 forces every kernel depth (sweeps)

  static EngineConfig from_json_file(const std::string& path);
  static EngineConfig from_json_text(const std::string& text);
};

// Sub-word lane packing: a 16-bit PE datapath runs two fxp8 or four fxp4
// sub-lanes, so lanes_effective = num_pes * 16 / total_bits.
int precision_pack(FxPFormat fmt, const EngineConfig& cfg);

enum class LayerKind { dense, conv, pool, activation_only };

// Geometry for conv/pool layers (input tensor and kernel placement).
struct LayerGeometry {
  int in_c = 1, in_h = 1, in_w = 1;
  int kernel_h = 1, kernel_w = 1;
  int stride = 1;
  int out_channels = 1;

  int out_h() const { return (in_h - kernel_h) / stride + 1; }
  int out_w() const { return (in_w - kernel_w) / stride + 1; }
};

struct LayerDescriptor {
  LayerKind kind = LayerKind::dense;
  int n_out = 0;  // outputs produced
  int n_in = 0;   // inputs consumed
  FxPFormat format;
  cordic::Accuracy accuracy = cordic::Accuracy::accurate;
  std::optional<af::ActivationKind> activation;
  std::optional<aad::PoolWindow> pool;
  bool normalize_after_pool = false;
  std::optional<LayerGeometry> geometry;  // conv/pool only
  std::string name;
};

// A layer's parameters as the engine consumes them: quantized raws plus the
// power-of-two scale the quantizer divided out of the weights.
struct QuantizedLayer {
  LayerDescriptor desc;
  std::vector<int32_t> w_raw;  // row-major n_out x n_in (conv: oc x C*KH*KW)
  std::vector<int32_t> b_raw;  // n_out (conv: out_channels)
  int scale_exp = 0;
};

// Parameters served from the 64-segment memory instead of the direct
// tensors; layer_index maps network layers to address-space layer ids
// (-1 for parameterless layers).
struct ParamSource {
  const mem::ParamMemory* memory = nullptr;
  const mem::Topology* topology = nullptr;
  const mem::AddressSpec* spec = nullptr;
  std::vector<int> layer_index;
};

// The six status signals plus the aggregate, as one snapshot.
struct ControlState {
  int current_layer = 0;
  bool layer_done = false;
  bool dnn_done = false;
  bool compute_done_array = false;
  std::vector<uint8_t> compute_init;  // per PE
  std::vector<uint8_t> compute_done;  // per PE
  std::vector<uint8_t> layer_active;  // PEs assigned work this layer
  std::vector<int> index;             // per PE

  static ControlState initial(int num_pes);
};

struct StepEvent {
  enum class Kind { reset, compute_init, mac_issue, batch_done, layer_commit };
  Kind kind = Kind::reset;
  std::vector<int> pes;  // compute_init: the assigned PEs
  int input_index = 0;   // mac_issue: broadcast input position j
};

struct FsmContext {
  int total_layers = 1;
  int inputs_this_layer = 0;  // J(CurrentLayer)
};

// Pure transition function. Throws SimulationError on illegal transitions
// (LayerDone without ComputeDoneArray, Index past J(l), ...).
ControlState fsm_step(ControlState state, const StepEvent& ev,
                      const FsmContext& ctx);

struct CycleReport {
  std::vector<int64_t> per_layer_cycles;  // scheduled cycles per layer
  int64_t mac_cycles = 0;      // closed form: B * n_in * c summed over layers
  int64_t af_cycles = 0;
  int64_t pool_cycles = 0;
  int64_t control_overhead_cycles = 0;  // bias adds, tile refills, transitions
  int64_t total_cycles = 0;             // scheduled length (overlap applied)
  int64_t mac_ops = 0;
  int64_t af_hr_busy_cycles = 0;
  int64_t af_lv_busy_cycles = 0;
  bool segment_ports_shared = false;  // >64 PEs share segment read ports
  double lane_occupancy = 0.0;
  double effective_macs_per_cycle = 0.0;

  int64_t work_cycles() const {
    return mac_cycles + af_cycles + pool_cycles + control_overhead_cycles;
  }
};

struct LayerResult {
  std::vector<FxPValue> outputs;
  CycleReport delta;
};

struct NetworkResult {
  std::vector<FxPValue> outputs;
  CycleReport report;
  std::vector<CycleReport> layer_reports;
};

// Runs one layer: every output is a chain of linear-rotation MACs on its
// assigned lane, then bias, the shared activation unit, and optional pooling.
LayerResult run_layer(const QuantizedLayer& layer,
                      std::span<const FxPValue> inputs,
                      const EngineConfig& cfg,
                      const ParamSource* params = nullptr,
                      TraceSink* sink = nullptr);

// Layer-multiplexed execution of the whole network over one PE array.
// Values are bit-identical for any num_pes; parallelism moves cycles only.
NetworkResult run_network(const std::vector<QuantizedLayer>& layers,
                          std::span<const FxPValue> inputs,
                          const EngineConfig& cfg,
                          const ParamSource* params = nullptr,
                          TraceSink* sink = nullptr);

}  // namespace corvet::engine
