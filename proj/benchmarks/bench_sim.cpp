#include <benchmark/benchmark.h>

#include "boss/frontend.hpp"
#include "boss/instrument.hpp"
#include "boss/workloads.hpp"

namespace {

boss::Workload synthetic() {
  boss::WorkloadSpec s;
  s.trip = 256;
  s.generations = 16;
  s.memory = boss::MemoryClass::Cold;
  return boss::build_workload(s);
}

void BM_SimBaseline(benchmark::State& state) {
  const auto w = synthetic();
  uint64_t committed = 0;
  for (auto _ : state) {
    const auto r = boss::run_sim(w.program, boss::PredictorConfig{}, boss::CoreConfig{});
    committed += r.stats.committed;
  }
  state.SetItemsProcessed(int64_t(committed));
}
BENCHMARK(BM_SimBaseline)->Unit(benchmark::kMillisecond);

void BM_SimInstrumented(benchmark::State& state) {
  const auto w = synthetic();
  const auto r = boss::instrument(w.source, w.target_label, boss::InstrumentOptions{});
  uint64_t committed = 0;
  for (auto _ : state) committed += boss::run_sim(r.program, boss::PredictorConfig{}, boss::CoreConfig{}).stats.committed;
  state.SetItemsProcessed(int64_t(committed));
}
BENCHMARK(BM_SimInstrumented)->Unit(benchmark::kMillisecond);

void BM_Instrument(benchmark::State& state) {
  const auto w = synthetic();
  boss::InstrumentOptions o;
  o.variant = boss::Variant::Vectorized;
  o.factor = 8;
  for (auto _ : state) benchmark::DoNotOptimize(boss::instrument(w.source, w.target_label, o));
}
BENCHMARK(BM_Instrument);

}  // namespace
