#include "corvet/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

namespace corvet::runner {

using cordic::Accuracy;
using engine::LayerKind;

namespace {

double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double ref_gelu(double x) {
  double inner = std::sqrt(2.0 / std::numbers::pi) *
                 (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(inner));
}

double ref_selu(double x) {
  return x > 0 ? af::kSeluLambda * x
               : af::kSeluLambda * af::kSeluAlpha * (std::exp(x) - 1.0);
}

std::vector<double> ref_softmax(const std::vector<double>& v) {
  double m = *std::max_element(v.begin(), v.end());
  std::vector<double> e(v.size());
  double sum = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    e[i] = std::exp(v[i] - m);
    sum += e[i];
  }
  for (auto& x : e) x /= sum;
  return e;
}

void ref_activation(af::ActivationKind k, std::vector<double>& v) {
  switch (k) {
    case af::ActivationKind::relu:
      for (auto& x : v) x = std::max(0.0, x);
      return;
    case af::ActivationKind::sigmoid:
      for (auto& x : v) x = ref_sigmoid(x);
      return;
    case af::ActivationKind::tanh:
      for (auto& x : v) x = std::tanh(x);
      return;
    case af::ActivationKind::gelu:
      for (auto& x : v) x = ref_gelu(x);
      return;
    case af::ActivationKind::swish:
      for (auto& x : v) x = x * ref_sigmoid(x);
      return;
    case af::ActivationKind::selu:
      for (auto& x : v) x = ref_selu(x);
      return;
    case af::ActivationKind::softmax:
      v = ref_softmax(v);
      return;
  }
}

double ref_aad(std::span<const double> w) {
  double sum = 0;
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j)
      if (i != j) sum += std::abs(w[i] - w[j]);
  return sum / (double(w.size()) * double(w.size() - 1));
}

}  // namespace

std::vector<double> run_float(const ModelSpec& m,
                              std::span<const double> input) {
  if (int(input.size()) != m.input_dim)
    throw ContractViolation("run_float: input size mismatch");
  std::vector<double> v(input.begin(), input.end());
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const auto& d = m.layers[li];
    if (d.kind == LayerKind::dense) {
      std::vector<double> out(d.n_out, 0.0);
      const auto& w = m.weights[li];
      for (int n = 0; n < d.n_out; ++n) {
        double acc = m.biases[li][n];
        for (int j = 0; j < d.n_in; ++j)
          acc += w[std::size_t(n) * d.n_in + j] * v[j];
        out[n] = acc;
      }
      v = std::move(out);
    } else if (d.kind == LayerKind::conv) {
      const auto& g = *d.geometry;
      const auto& w = m.weights[li];
      std::vector<double> out(std::size_t(d.n_out), 0.0);
      int per_ch = g.out_h() * g.out_w();
      for (int n = 0; n < d.n_out; ++n) {
        int oc = n / per_ch;
        int rem = n % per_ch;
        int oy = rem / g.out_w();
        int ox = rem % g.out_w();
        double acc = m.biases[li][oc];
        int k = 0;
        for (int ic = 0; ic < g.in_c; ++ic)
          for (int ky = 0; ky < g.kernel_h; ++ky)
            for (int kx = 0; kx < g.kernel_w; ++kx, ++k)
              acc += w[std::size_t(oc) * d.n_in + k] *
                     v[(std::size_t(ic) * g.in_h + oy * g.stride + ky) *
                           g.in_w +
                       ox * g.stride + kx];
        out[n] = acc;
      }
      v = std::move(out);
    } else if (d.kind == LayerKind::pool) {
      const auto& g = *d.geometry;
      const auto& win = *d.pool;
      int oh = (g.in_h - win.window_h) / win.stride + 1;
      int ow = (g.in_w - win.window_w) / win.stride + 1;
      std::vector<double> out;
      out.reserve(std::size_t(g.in_c) * oh * ow);
      std::vector<double> window;
      for (int c = 0; c < g.in_c; ++c)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            window.clear();
            for (int ky = 0; ky < win.window_h; ++ky)
              for (int kx = 0; kx < win.window_w; ++kx)
                window.push_back(
                    v[(std::size_t(c) * g.in_h + oy * win.stride + ky) *
                          g.in_w +
                      ox * win.stride + kx]);
            out.push_back(ref_aad(window));
          }
      if (d.normalize_after_pool) {
        double mx = 0;
        for (double x : out) mx = std::max(mx, std::abs(x));
        if (mx > 1.0) {
          double scale = std::ldexp(1.0, -int(std::ceil(std::log2(mx))));
          for (auto& x : out) x *= scale;
        }
      }
      v = std::move(out);
    }
    if (d.activation) ref_activation(*d.activation, v);
  }
  return v;
}

engine::ParamSource QuantizedModel::source(const mem::ParamMemory& m) const {
  return {&m, &topology, &spec, layer_index};
}

QuantizedModel quantize_model(const ModelSpec& m) {
  QuantizedModel q;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    engine::QuantizedLayer l;
    l.desc = m.layers[li];
    if (l.desc.kind == LayerKind::dense || l.desc.kind == LayerKind::conv) {
      const auto& w = m.weights[li];
      double max_abs = 0;
      for (double x : w) {
        if (!std::isfinite(x))
          throw ContractViolation("quantize_model: non-finite weight");
        max_abs = std::max(max_abs, std::abs(x));
      }
      int s = max_abs == 0.0 ? 0 : int(std::ceil(std::log2(max_abs)));
      l.scale_exp = s;
      double inv = std::ldexp(1.0, -s);
      l.w_raw.reserve(w.size());
      for (double x : w) l.w_raw.push_back(quantize(x * inv, l.desc.format).raw);
      l.b_raw.reserve(m.biases[li].size());
      for (double x : m.biases[li])
        l.b_raw.push_back(quantize(x * inv, l.desc.format).raw);
    }
    q.layers.push_back(std::move(l));
  }
  q.layer_index = m.address_layer_index();
  bool has_params = std::any_of(q.layer_index.begin(), q.layer_index.end(),
                                [](int i) { return i >= 0; });
  if (has_params) {
    q.topology = m.address_topology();
    q.spec = mem::addr_width(q.topology);
  }
  return q;
}

mem::ParamImage build_image(const QuantizedModel& q) {
  if (q.topology.layers == 0)
    throw ConfigError("model has no parameters to image");
  mem::ParamImage img;
  img.header.addr_bits = uint8_t(q.spec.total_bits);
  img.header.format = q.layers.front().desc.format;

  // engine read order, then reversed into LIFO write order
  std::vector<std::pair<uint32_t, int32_t>> reads;
  for (std::size_t li = 0; li < q.layers.size(); ++li) {
    int wl = q.layer_index[li];
    if (wl < 0) continue;
    const auto& l = q.layers[li];
    int rows = q.topology.neurons[wl];
    int cols = q.topology.inputs[wl];
    for (int n = 0; n < rows; ++n) {
      reads.emplace_back(mem::encode({wl, true, n, 0}, q.spec, q.topology),
                         l.b_raw[n]);
      for (int j = 0; j < cols; ++j)
        reads.emplace_back(
            mem::encode({wl, false, n, j}, q.spec, q.topology),
            l.w_raw[std::size_t(n) * cols + j]);
    }
  }
  img.entries.assign(reads.rbegin(), reads.rend());
  img.header.count = uint32_t(img.entries.size());
  return img;
}

mem::ParamMemory load_image(const mem::ParamImage& img,
                            const QuantizedModel& q) {
  std::vector<mem::LoadBeat> stream;
  stream.reserve(img.entries.size());
  for (const auto& [addr, raw] : img.entries)
    stream.push_back({addr, raw, true});
  return mem::lifo_load(stream, q.topology, q.spec);
}

std::vector<Accuracy> uniform_assignment(std::size_t layers, Accuracy a) {
  return std::vector<Accuracy>(layers, a);
}

int thread_cap() {
  const char* env = std::getenv("CORVET_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

namespace {

std::vector<engine::QuantizedLayer> with_assignment(
    const QuantizedModel& q, const std::vector<Accuracy>& assignment) {
  if (assignment.size() != q.layers.size())
    throw ContractViolation("assignment length does not match layer count");
  std::vector<engine::QuantizedLayer> layers = q.layers;
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].desc.accuracy = assignment[i];
  return layers;
}

int argmax_raw(const std::vector<int32_t>& v) {
  return int(std::max_element(v.begin(), v.end()) - v.begin());
}

int argmax_d(const std::vector<double>& v) {
  return int(std::max_element(v.begin(), v.end()) - v.begin());
}

template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  int threads = std::min(thread_cap(), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

EvalResult evaluate(const QuantizedModel& q, const ModelSpec& m,
                    const Dataset& ds, const engine::EngineConfig& cfg,
                    const std::vector<Accuracy>& assignment,
                    const mem::ParamMemory* memory) {
  if (ds.samples.empty()) throw ContractViolation("evaluate: empty dataset");
  auto layers = with_assignment(q, assignment);
  engine::ParamSource src;
  const engine::ParamSource* src_ptr = nullptr;
  if (memory) {
    src = q.source(*memory);
    src_ptr = &src;
  }

  const int n = int(ds.samples.size());
  const FxPFormat in_fmt = layers.front().desc.format;

  EvalResult res;
  res.assignment = assignment;
  res.sample_count = n;
  for (const auto& l : q.layers) res.scale_exps.push_back(l.scale_exp);
  res.predictions.assign(n, -1);
  res.float_predictions.assign(n, -1);
  res.outputs_raw.assign(n, {});

  // cycle totals are per-network constants; measure once
  {
    std::vector<FxPValue> in;
    in.reserve(ds.samples[0].size());
    for (double x : ds.samples[0]) in.push_back(quantize(x, in_fmt));
    auto first = engine::run_network(layers, in, cfg, src_ptr);
    res.network_report = first.report;
    res.layer_reports = first.layer_reports;
  }
  res.total_cycles = res.network_report.total_cycles * n;

  std::atomic<int> fxp_hits{0}, float_hits{0};
  parallel_for(n, [&](int i) {
    std::vector<FxPValue> in;
    in.reserve(ds.samples[i].size());
    for (double x : ds.samples[i]) in.push_back(quantize(x, in_fmt));
    auto out = engine::run_network(layers, in, cfg, src_ptr);
    std::vector<int32_t> raw;
    raw.reserve(out.outputs.size());
    for (const auto& v : out.outputs) raw.push_back(v.raw);
    int pred = argmax_raw(raw);
    res.outputs_raw[i] = std::move(raw);
    res.predictions[i] = pred;
    if (pred == ds.labels[i]) fxp_hits.fetch_add(1);

    auto fl = run_float(m, ds.samples[i]);
    int fpred = argmax_d(fl);
    res.float_predictions[i] = fpred;
    if (fpred == ds.labels[i]) float_hits.fetch_add(1);
  });

  res.fxp_accuracy = 100.0 * fxp_hits.load() / n;
  res.float_accuracy = 100.0 * float_hits.load() / n;
  return res;
}

SensitivityReport sensitivity_scan(const QuantizedModel& q, const Dataset& ds,
                                   const engine::EngineConfig& cfg,
                                   double threshold_pp) {
  SensitivityReport rep;
  rep.threshold = threshold_pp;
  const std::size_t L = q.layers.size();

  // the scan only compares fixed-point runs, so no float reference is needed
  auto accuracy_with = [&](const std::vector<Accuracy>& assignment) {
    auto layers = with_assignment(q, assignment);
    const FxPFormat in_fmt = layers.front().desc.format;
    int hits = 0;
    std::vector<int> hit_flags(ds.samples.size(), 0);
    parallel_for(int(ds.samples.size()), [&](int i) {
      std::vector<FxPValue> in;
      in.reserve(ds.samples[i].size());
      for (double x : ds.samples[i]) in.push_back(quantize(x, in_fmt));
      auto out = engine::run_network(layers, in, cfg);
      int best = 0;
      for (std::size_t k = 1; k < out.outputs.size(); ++k)
        if (out.outputs[k].raw > out.outputs[best].raw) best = int(k);
      hit_flags[i] = best == ds.labels[i] ? 1 : 0;
    });
    for (int h : hit_flags) hits += h;
    return 100.0 * hits / double(ds.samples.size());
  };

  auto base_assign = uniform_assignment(L, Accuracy::accurate);
  rep.baseline_accuracy = accuracy_with(base_assign);

  rep.assignment.assign(L, Accuracy::approximate);
  for (std::size_t l = 0; l < L; ++l) {
    auto assign = base_assign;
    assign[l] = Accuracy::approximate;
    double acc = accuracy_with(assign);
    double drop = rep.baseline_accuracy - acc;
    rep.per_layer.push_back({int(l), drop});
    if (drop > threshold_pp) rep.assignment[l] = Accuracy::accurate;
  }
  return rep;
}

}  // namespace corvet::runner
