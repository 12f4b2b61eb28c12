#include <benchmark/benchmark.h>

#include <random>

#include "corvet/activation.hpp"
#include "corvet/cordic.hpp"
#include "corvet/engine.hpp"
#include "corvet/pooling.hpp"

using namespace corvet;
using cordic::Accuracy;

namespace {

FxPFormat fmt_for(int bits) { return FxPFormat::with_default_frac(bits); }

void BM_LinearMac(benchmark::State& state) {
  int bits = int(state.range(0));
  Accuracy acc = state.range(1) ? Accuracy::accurate : Accuracy::approximate;
  FxPFormat fmt = fmt_for(bits);
  auto cfg = cordic::CordicConfig::mac(fmt, acc);
  std::mt19937 rng(1);
  std::uniform_int_distribution<int> dist(fmt.min_raw() / 2, fmt.max_raw() / 2);
  FxPValue accv = quantize(0, fmt);
  for (auto _ : state) {
    FxPValue w(dist(rng), fmt), a(dist(rng), fmt);
    benchmark::DoNotOptimize(cordic::linear_mac(accv, w, a, cfg));
  }
}
BENCHMARK(BM_LinearMac)
    ->Args({8, 0})
    ->Args({8, 1})
    ->Args({16, 0})
    ->Args({16, 1})
    ->Args({4, 1});

void BM_HyperbolicRotation(benchmark::State& state) {
  FxPFormat fmt = fmt_for(16);
  cordic::CordicConfig cfg{cordic::kHyperbolicRotation, Accuracy::accurate,
                           fmt, int(state.range(0))};
  FxPValue theta = quantize(0.73, fmt);
  for (auto _ : state)
    benchmark::DoNotOptimize(cordic::hyperbolic_rotation(theta, cfg));
}
BENCHMARK(BM_HyperbolicRotation)->Arg(8)->Arg(16);

void BM_Tanh(benchmark::State& state) {
  FxPFormat fmt(16, 12);
  cordic::CordicConfig cfg{cordic::kHyperbolicRotation, Accuracy::accurate,
                           fmt, 0};
  FxPValue x = quantize(1.3, fmt);
  for (auto _ : state) benchmark::DoNotOptimize(af::tanh(x, cfg));
}
BENCHMARK(BM_Tanh);

void BM_Softmax64(benchmark::State& state) {
  FxPFormat fmt = fmt_for(16);
  cordic::CordicConfig cfg{cordic::kHyperbolicRotation, Accuracy::accurate,
                           fmt, 0};
  std::mt19937 rng(2);
  std::uniform_int_distribution<int> dist(fmt.min_raw(), fmt.max_raw());
  std::vector<FxPValue> v;
  for (int i = 0; i < 64; ++i) v.push_back(FxPValue(dist(rng), fmt));
  for (auto _ : state) benchmark::DoNotOptimize(af::softmax(v, cfg));
}
BENCHMARK(BM_Softmax64);

void BM_AadPool(benchmark::State& state) {
  FxPFormat fmt = fmt_for(8);
  aad::FeatureMap map(8, 14, 14, fmt);
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> dist(fmt.min_raw(), fmt.max_raw());
  for (auto& r : map.raw) r = dist(rng);
  aad::PoolWindow win{2, 2, 2};
  for (auto _ : state) benchmark::DoNotOptimize(aad::pool(map, win));
}
BENCHMARK(BM_AadPool);

void BM_DenseLayer(benchmark::State& state) {
  FxPFormat fmt = fmt_for(8);
  engine::QuantizedLayer l;
  l.desc.kind = engine::LayerKind::dense;
  l.desc.n_out = 64;
  l.desc.n_in = 196;
  l.desc.format = fmt;
  l.desc.accuracy = Accuracy::accurate;
  l.desc.activation = af::ActivationKind::tanh;
  l.desc.name = "bench";
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> dw(-0.5, 0.5);
  for (int i = 0; i < 64 * 196; ++i)
    l.w_raw.push_back(quantize(dw(rng), fmt).raw);
  for (int i = 0; i < 64; ++i) l.b_raw.push_back(0);
  std::vector<FxPValue> in;
  for (int i = 0; i < 196; ++i) in.push_back(quantize(0.5, fmt));
  engine::EngineConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(engine::run_layer(l, in, cfg));
}
BENCHMARK(BM_DenseLayer);

}  // namespace

BENCHMARK_MAIN();
