#include <benchmark/benchmark.h>

#include <random>

#include "boss/predictor.hpp"

namespace {

void BM_PredictUpdate(benchmark::State& state) {
  boss::PredictorConfig cfg;
  cfg.kind = static_cast<boss::PredictorKind>(state.range(0));
  boss::Predictor p(cfg);
  std::mt19937 rng(1);
  std::vector<std::pair<uint32_t, bool>> stream(1 << 16);
  for (auto& [pc, t] : stream) {
    pc = rng() % 512;
    t = rng() % 3 != 0;
  }
  size_t i = 0;
  for (auto _ : state) {
    const auto& [pc, t] = stream[i++ & 0xFFFF];
    benchmark::DoNotOptimize(p.predict(pc));
    p.update(pc, t);
  }
  state.SetLabel(boss::predictor_kind_name(cfg.kind));
}
BENCHMARK(BM_PredictUpdate)->DenseRange(0, 3);

}  // namespace
