#include "corvet/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace corvet::engine {

using cordic::Accuracy;

EngineConfig EngineConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("engine config: bad JSON: ") + e.what());
  }
  EngineConfig cfg;
  cfg.num_pes = j.value("pes", 64);
  cfg.bank_depth = j.value("bank_depth", 32);
  if (j.contains("default_format"))
    cfg.default_format =
        FxPFormat::parse(j["default_format"].get<std::string>());
  if (j.contains("default_accuracy"))
    cfg.default_accuracy =
        cordic::parse_accuracy(j["default_accuracy"].get<std::string>());
  cfg.overlap_af = j.value("overlap_af", true);
  cfg.iterations_override = j.value("iterations_override", 0);
  if (cfg.num_pes != 64 && cfg.num_pes != 128 && cfg.num_pes != 256)
    throw ConfigError("engine config: pes must be 64, 128 or 256");
  if (cfg.bank_depth < 1) throw ConfigError("engine config: bad bank_depth");
  return cfg;
}

EngineConfig EngineConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open engine config: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

int precision_pack(FxPFormat fmt, const EngineConfig& cfg) {
  return cfg.num_pes * (16 / fmt.total_bits);
}

ControlState ControlState::initial(int num_pes) {
  ControlState s;
  s.compute_init.assign(num_pes, 0);
  s.compute_done.assign(num_pes, 0);
  s.layer_active.assign(num_pes, 0);
  s.index.assign(num_pes, 0);
  return s;
}

ControlState fsm_step(ControlState s, const StepEvent& ev,
                      const FsmContext& ctx) {
  switch (ev.kind) {
    case StepEvent::Kind::reset:
      return ControlState::initial(int(s.index.size()));
    case StepEvent::Kind::compute_init: {
      if (s.dnn_done) throw SimulationError("fsm: ComputeInit after DNNDone");
      s.layer_done = false;
      s.compute_done_array = false;
      for (int pe : ev.pes) {
        s.compute_init.at(pe) = 1;
        s.compute_done.at(pe) = 0;
        s.layer_active.at(pe) = 1;
        s.index.at(pe) = 0;  // Index resets on (re-)assignment
      }
      return s;
    }
    case StepEvent::Kind::mac_issue: {
      for (std::size_t pe = 0; pe < s.compute_init.size(); ++pe) {
        if (!s.compute_init[pe]) continue;
        if (s.index[pe] != ev.input_index)
          throw SimulationError("fsm: Index skew on PE " + std::to_string(pe));
        if (ev.input_index + 1 > ctx.inputs_this_layer)
          throw SimulationError("fsm: Index past J(l)");
        s.index[pe] = ev.input_index + 1;
      }
      return s;
    }
    case StepEvent::Kind::batch_done: {
      for (std::size_t pe = 0; pe < s.compute_init.size(); ++pe) {
        if (!s.compute_init[pe]) continue;
        if (s.index[pe] != ctx.inputs_this_layer)
          throw SimulationError("fsm: ComputeDone before Index reached J(l)");
        s.compute_done[pe] = 1;
        s.compute_init[pe] = 0;
      }
      bool all = true, any = false;
      for (std::size_t pe = 0; pe < s.compute_done.size(); ++pe) {
        if (!s.layer_active[pe]) continue;
        any = true;
        all = all && s.compute_done[pe];
      }
      s.compute_done_array = any && all;
      return s;
    }
    case StepEvent::Kind::layer_commit: {
      if (!s.compute_done_array)
        throw SimulationError("fsm: LayerDone without ComputeDoneArray");
      s.layer_done = true;
      if (s.current_layer + 1 >= ctx.total_layers) {
        s.dnn_done = true;  // outputs latch simultaneously
      } else {
        s.current_layer += 1;
        std::fill(s.layer_active.begin(), s.layer_active.end(), 0);
        std::fill(s.compute_done.begin(), s.compute_done.end(), 0);
        std::fill(s.index.begin(), s.index.end(), 0);
        s.compute_done_array = false;
      }
      return s;
    }
  }
  throw SimulationError("fsm: unknown event");
}

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

ExtFx ext_align_add(ExtFx a, ExtFx b) {
  int t = std::max(a.frac, b.frac);
  return {(a.raw << (t - a.frac)) + (b.raw << (t - b.frac)), t};
}

int mac_iterations_for(const LayerDescriptor& d, const EngineConfig& cfg) {
  if (cfg.iterations_override > 0) return cfg.iterations_override;
  return cordic::mac_cycles(d.format, d.accuracy);
}

// Flat values a layer consumes: conv/pool read the whole input tensor,
// dense layers read n_in.
int input_length(const LayerDescriptor& d) {
  if (d.kind == LayerKind::conv || d.kind == LayerKind::pool) {
    const LayerGeometry& g = *d.geometry;
    return g.in_c * g.in_h * g.in_w;
  }
  return d.n_in;
}

struct NetContext {
  ControlState state;
  FsmContext fsm;
  uint64_t cycle = 0;
  TraceSink* sink = nullptr;
  const EngineConfig* cfg = nullptr;

  void emit(Signal s, int pe, int64_t v) {
    if (sink) sink->record(cycle, s, pe, v);
  }
};

std::vector<int32_t> fetch_weights(const QuantizedLayer& layer,
                                   const ParamSource* params, int layer_pos) {
  if (!params || !params->memory) return layer.w_raw;
  int wl = params->layer_index.at(layer_pos);
  if (wl < 0) return layer.w_raw;
  const auto& t = *params->topology;
  std::vector<int32_t> w;
  w.reserve(std::size_t(t.neurons[wl]) * t.inputs[wl]);
  for (int n = 0; n < t.neurons[wl]; ++n) {
    for (int j = 0; j < t.inputs[wl]; ++j) {
      uint32_t bits = mem::encode({wl, false, n, j}, *params->spec, t);
      auto v = params->memory->read(bits, n);
      if (!v)
        throw SimulationError("layer '" + layer.desc.name +
                              "': weight missing from parameter memory");
      w.push_back(*v);
    }
  }
  return w;
}

std::vector<int32_t> fetch_biases(const QuantizedLayer& layer,
                                  const ParamSource* params, int layer_pos) {
  if (!params || !params->memory) return layer.b_raw;
  int wl = params->layer_index.at(layer_pos);
  if (wl < 0) return layer.b_raw;
  const auto& t = *params->topology;
  std::vector<int32_t> b;
  b.reserve(t.neurons[wl]);
  for (int n = 0; n < t.neurons[wl]; ++n) {
    uint32_t bits = mem::encode({wl, true, n, 0}, *params->spec, t);
    auto v = params->memory->read(bits, n);
    if (!v)
      throw SimulationError("layer '" + layer.desc.name +
                            "': bias missing from parameter memory");
    b.push_back(*v);
  }
  return b;
}

std::vector<FxPValue> requantize(std::span<const FxPValue> in, FxPFormat fmt) {
  std::vector<FxPValue> out;
  out.reserve(in.size());
  for (const auto& v : in) out.push_back(from_ext(to_ext(v), fmt));
  return out;
}

// One dot product on its lane: iterative MACs into the extended accumulator,
// then the quantizer scale, input rescale and bias fold in one rounding.
FxPValue dense_output(std::span<const int32_t> w_row, int32_t bias_raw,
                      std::span<const FxPValue> inputs,
                      std::span<const int> gather, FxPFormat fmt,
                      int scale_exp, int mac_iters) {
  const int F = fmt.frac_bits + kGuardBits;
  // operands re-read at the default Q split keep |z| < 2 for the recurrence
  const int in_shift = std::max(0, (fmt.total_bits - 2) - fmt.frac_bits);
  ExtFx acc{0, F};
  for (std::size_t j = 0; j < w_row.size(); ++j) {
    const FxPValue& a = inputs[gather.empty() ? j : std::size_t(gather[j])];
    ExtFx w{int64_t(w_row[j]) << kGuardBits, F};
    ExtFx az{int64_t(a.raw) << kGuardBits, F + in_shift};
    acc = cordic::mac_ext(acc, w, az, mac_iters).y;
  }
  ExtFx bias{int64_t(bias_raw) << kGuardBits, F};
  ExtFx out = ext_align_add(acc.scaled_pow2(scale_exp + in_shift),
                            bias.scaled_pow2(scale_exp));
  return from_ext(out, fmt);
}

struct AfOutcome {
  std::vector<FxPValue> values;
  af::AfReport report;
};

AfOutcome run_af(const LayerDescriptor& d, std::vector<FxPValue> values,
                 const EngineConfig& cfg) {
  AfOutcome out;
  if (!d.activation || values.empty()) {
    out.values = std::move(values);
    return out;
  }
  af::AfRequest req;
  req.values = std::move(values);
  req.kind = *d.activation;
  req.cfg = {cordic::kHyperbolicRotation, d.accuracy, d.format,
             cfg.iterations_override};
  auto res = af::apply(req);
  out.values = std::move(res.values);
  out.report = res.report;
  return out;
}

void add_af(CycleReport& r, const af::AfReport& a) {
  r.af_cycles += a.cycles_total;
  r.af_hr_busy_cycles += a.hr_busy_cycles;
  r.af_lv_busy_cycles += a.lv_busy_cycles;
}

LayerResult execute_layer(NetContext& ctx, const QuantizedLayer& layer,
                          std::span<const FxPValue> raw_inputs,
                          const ParamSource* params, int layer_pos) {
  const LayerDescriptor& d = layer.desc;
  const EngineConfig& cfg = *ctx.cfg;
  LayerResult res;
  res.delta.per_layer_cycles.assign(1, 0);
  if (d.n_out == 0) return res;

  std::vector<FxPValue> inputs = requantize(raw_inputs, d.format);

  ctx.cycle += 1;  // layer transition
  res.delta.control_overhead_cycles += 1;
  ctx.emit(Signal::current_layer, -1, ctx.state.current_layer);

  std::vector<FxPValue> out_values;
  int64_t scheduled = 0;  // excludes the transition cycle, added at the end

  if (d.kind == LayerKind::dense || d.kind == LayerKind::conv) {
    ctx.fsm.inputs_this_layer = d.n_in;
    const int lanes = precision_pack(d.format, cfg);
    const int batches = int(ceil_div(d.n_out, lanes));
    const int c = mac_iterations_for(d, cfg);
    const int tiles = int(ceil_div(d.n_in, cfg.bank_depth));
    const int port_factor = std::max(1, cfg.num_pes / mem::kSegments);
    res.delta.segment_ports_shared = port_factor > 1;

    const std::vector<int32_t> w = fetch_weights(layer, params, layer_pos);
    const std::vector<int32_t> b = fetch_biases(layer, params, layer_pos);

    // Output values per assigned lane. Each neuron's chain is independent,
    // so results cannot depend on the lane count.
    out_values.reserve(d.n_out);
    std::vector<int> gather;
    const LayerGeometry* g = d.geometry ? &*d.geometry : nullptr;
    for (int n = 0; n < d.n_out; ++n) {
      int w_row = n;
      if (d.kind == LayerKind::conv) {
        int per_ch = g->out_h() * g->out_w();
        int oc = n / per_ch;
        int rem = n % per_ch;
        int oy = rem / g->out_w();
        int ox = rem % g->out_w();
        w_row = oc;
        gather.clear();
        for (int ic = 0; ic < g->in_c; ++ic)
          for (int ky = 0; ky < g->kernel_h; ++ky)
            for (int kx = 0; kx < g->kernel_w; ++kx)
              gather.push_back((ic * g->in_h + oy * g->stride + ky) * g->in_w +
                               ox * g->stride + kx);
      }
      out_values.push_back(dense_output(
          std::span<const int32_t>(w.data() + std::size_t(w_row) * d.n_in,
                                   std::size_t(d.n_in)),
          b[std::size_t(w_row)], inputs, gather, d.format, layer.scale_exp,
          c));
    }

    // Batch schedule: ComputeInit wave, bank refills, broadcast MAC issues,
    // a bias-add cycle, drain. Softmax normalises across the whole layer, so
    // it only runs after the last batch.
    const bool af_per_batch =
        d.activation && *d.activation != af::ActivationKind::softmax;
    std::vector<int64_t> batch_mac(batches, 0), batch_af(batches, 0);
    for (int bi = 0; bi < batches; ++bi) {
      const int first = bi * lanes;
      const int count = std::min(lanes, d.n_out - first);
      std::vector<int> pes;
      const int n_active = std::min(count, cfg.num_pes);
      pes.reserve(n_active);
      for (int pe = 0; pe < n_active; ++pe) pes.push_back(pe);

      ctx.state = fsm_step(std::move(ctx.state),
                           {StepEvent::Kind::compute_init, pes, 0}, ctx.fsm);
      for (int pe : pes) ctx.emit(Signal::compute_init, pe, 1);

      const int64_t refill = int64_t(tiles) * port_factor;
      ctx.cycle += refill;
      res.delta.control_overhead_cycles += refill;

      for (int j = 0; j < d.n_in; ++j) {
        ctx.state = fsm_step(std::move(ctx.state),
                             {StepEvent::Kind::mac_issue, {}, j}, ctx.fsm);
        if (ctx.sink)
          for (int pe : pes) ctx.emit(Signal::index, pe, j + 1);
        ctx.cycle += c;
      }

      ctx.cycle += 1;  // bias add through the accumulator init port
      res.delta.control_overhead_cycles += 1;
      ctx.state = fsm_step(std::move(ctx.state),
                           {StepEvent::Kind::batch_done, {}, 0}, ctx.fsm);
      for (int pe : pes) ctx.emit(Signal::compute_done, pe, 1);

      batch_mac[bi] = refill + int64_t(d.n_in) * c + 1;

      if (af_per_batch) {
        std::vector<FxPValue> chunk(out_values.begin() + first,
                                    out_values.begin() + first + count);
        AfOutcome a = run_af(d, std::move(chunk), cfg);
        std::copy(a.values.begin(), a.values.end(),
                  out_values.begin() + first);
        batch_af[bi] = a.report.cycles_total;
        add_af(res.delta, a.report);
        ctx.cycle += a.report.cycles_total;
      }
    }
    res.delta.mac_cycles = int64_t(batches) * d.n_in * c;
    res.delta.mac_ops = int64_t(d.n_out) * d.n_in;

    ctx.emit(Signal::compute_done_array, -1, 1);

    if (!af_per_batch && d.activation) {
      AfOutcome a = run_af(d, std::move(out_values), cfg);
      out_values = std::move(a.values);
      add_af(res.delta, a.report);
      ctx.cycle += a.report.cycles_total;
    }

    if (cfg.overlap_af && af_per_batch) {
      scheduled = batch_mac[0];
      for (int i = 1; i < batches; ++i)
        scheduled += std::max(batch_mac[i], batch_af[i - 1]);
      scheduled += batch_af[batches - 1];
    } else {
      for (int i = 0; i < batches; ++i) scheduled += batch_mac[i];
      scheduled += res.delta.af_cycles;
    }
  } else if (d.kind == LayerKind::activation_only) {
    ctx.fsm.inputs_this_layer = 0;
    ctx.state = fsm_step(std::move(ctx.state),
                         {StepEvent::Kind::compute_init, {0}, 0}, ctx.fsm);
    ctx.emit(Signal::compute_init, 0, 1);
    AfOutcome a = run_af(d, std::move(inputs), cfg);
    out_values = std::move(a.values);
    add_af(res.delta, a.report);
    ctx.cycle += a.report.cycles_total;
    ctx.state = fsm_step(std::move(ctx.state),
                         {StepEvent::Kind::batch_done, {}, 0}, ctx.fsm);
    ctx.emit(Signal::compute_done, 0, 1);
    ctx.emit(Signal::compute_done_array, -1, 1);
    scheduled = res.delta.af_cycles;
  } else {  // pool
    const LayerGeometry& g = *d.geometry;
    aad::FeatureMap map(g.in_c, g.in_h, g.in_w, d.format);
    for (std::size_t i = 0; i < inputs.size(); ++i) map.raw[i] = inputs[i].raw;
    aad::FeatureMap pooled = aad::pool(map, *d.pool);
    if (d.normalize_after_pool) pooled = aad::normalize(pooled);
    out_values.reserve(pooled.size());
    for (int32_t r : pooled.raw) out_values.emplace_back(r, d.format);

    ctx.fsm.inputs_this_layer = 0;
    ctx.state = fsm_step(std::move(ctx.state),
                         {StepEvent::Kind::compute_init, {0}, 0}, ctx.fsm);
    ctx.emit(Signal::compute_init, 0, 1);
    int windows = pooled.channels * pooled.height * pooled.width;
    res.delta.pool_cycles =
        int64_t(windows) *
        aad::aad_cycles(d.pool->window_h * d.pool->window_w, d.format);
    ctx.cycle += res.delta.pool_cycles;
    ctx.state = fsm_step(std::move(ctx.state),
                         {StepEvent::Kind::batch_done, {}, 0}, ctx.fsm);
    ctx.emit(Signal::compute_done, 0, 1);
    ctx.emit(Signal::compute_done_array, -1, 1);
    scheduled = res.delta.pool_cycles;
  }

  ctx.state = fsm_step(std::move(ctx.state),
                       {StepEvent::Kind::layer_commit, {}, 0}, ctx.fsm);
  ctx.emit(Signal::layer_done, -1, 1);
  if (ctx.state.dnn_done) ctx.emit(Signal::dnn_done, -1, 1);

  res.delta.per_layer_cycles[0] = scheduled + 1;
  res.delta.total_cycles = res.delta.per_layer_cycles[0];
  res.outputs = std::move(out_values);
  return res;
}

void finish_report(CycleReport& r, std::span<const QuantizedLayer> layers,
                   const EngineConfig& cfg) {
  int64_t busy = 0, capacity = 0;
  for (const auto& l : layers) {
    if (l.desc.kind != LayerKind::dense && l.desc.kind != LayerKind::conv)
      continue;
    int lanes = precision_pack(l.desc.format, cfg);
    int c = mac_iterations_for(l.desc, cfg);
    int64_t batches = ceil_div(l.desc.n_out, lanes);
    busy += int64_t(l.desc.n_out) * l.desc.n_in * c;
    capacity += batches * int64_t(l.desc.n_in) * c * lanes;
  }
  r.lane_occupancy = capacity ? double(busy) / double(capacity) : 0.0;
  r.effective_macs_per_cycle =
      r.total_cycles ? double(r.mac_ops) / double(r.total_cycles) : 0.0;
}

void validate_layers(const std::vector<QuantizedLayer>& layers,
                     std::size_t input_size) {
  int expect = int(input_size);
  for (const auto& l : layers) {
    if (input_length(l.desc) != expect)
      throw ConfigError("run_network: layer '" + l.desc.name + "' expects " +
                        std::to_string(input_length(l.desc)) +
                        " inputs, gets " + std::to_string(expect));
    try {
      cordic::mac_cycles(l.desc.format, l.desc.accuracy);
    } catch (const ContractViolation& e) {
      throw ConfigError("run_network: layer '" + l.desc.name + "': " +
                        e.what());
    }
    expect = l.desc.n_out;
  }
}

}  // namespace

LayerResult run_layer(const QuantizedLayer& layer,
                      std::span<const FxPValue> inputs,
                      const EngineConfig& cfg, const ParamSource* params,
                      TraceSink* sink) {
  NetContext ctx;
  ctx.state = ControlState::initial(cfg.num_pes);
  ctx.fsm.total_layers = 1;
  ctx.sink = sink;
  ctx.cfg = &cfg;
  LayerResult res = execute_layer(ctx, layer, inputs, params, 0);
  std::vector<QuantizedLayer> one{layer};
  finish_report(res.delta, one, cfg);
  return res;
}

NetworkResult run_network(const std::vector<QuantizedLayer>& layers,
                          std::span<const FxPValue> inputs,
                          const EngineConfig& cfg, const ParamSource* params,
                          TraceSink* sink) {
  if (layers.empty()) throw ConfigError("run_network: no layers");
  if (cfg.num_pes != 64 && cfg.num_pes != 128 && cfg.num_pes != 256)
    throw ConfigError("run_network: pes must be 64, 128 or 256");
  validate_layers(layers, inputs.size());

  NetContext ctx;
  ctx.state = ControlState::initial(cfg.num_pes);
  ctx.fsm.total_layers = int(layers.size());
  ctx.sink = sink;
  ctx.cfg = &cfg;

  NetworkResult net;
  net.report.per_layer_cycles.clear();
  std::vector<FxPValue> activations(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerResult r = execute_layer(ctx, layers[l], activations, params, int(l));
    activations = std::move(r.outputs);
    net.report.per_layer_cycles.push_back(r.delta.per_layer_cycles[0]);
    net.report.mac_cycles += r.delta.mac_cycles;
    net.report.af_cycles += r.delta.af_cycles;
    net.report.pool_cycles += r.delta.pool_cycles;
    net.report.control_overhead_cycles += r.delta.control_overhead_cycles;
    net.report.total_cycles += r.delta.total_cycles;
    net.report.mac_ops += r.delta.mac_ops;
    net.report.af_hr_busy_cycles += r.delta.af_hr_busy_cycles;
    net.report.af_lv_busy_cycles += r.delta.af_lv_busy_cycles;
    net.report.segment_ports_shared |= r.delta.segment_ports_shared;
    net.layer_reports.push_back(std::move(r.delta));
  }
  if (!ctx.state.dnn_done)
    throw SimulationError("run_network: DNNDone not reached");
  finish_report(net.report, layers, cfg);
  net.outputs = std::move(activations);
  return net;
}

}  // namespace corvet::engine
