#include <benchmark/benchmark.h>

#include "boss/boss_unit.hpp"

namespace {

// One generation: 256 producer writes, then fetch and commit every slot.
void BM_Generation(benchmark::State& state) {
  boss::BossUnit u(4, 1);
  u.set_logging(false);
  const uint32_t target = 10;
  u.open_channel(0, std::span<const uint32_t>(&target, 1), 20);
  for (auto _ : state) {
    for (uint32_t i = 0; i < 256; ++i) u.write_outcome(0, i, i & 1);
    for (uint32_t i = 0; i < 256; ++i) benchmark::DoNotOptimize(u.consume_prediction(target));
    u.notify_end_fetch(20);
    for (uint32_t i = 0; i < 256; ++i) u.notify_commit(target);
    u.notify_commit(20);
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Generation);

void BM_SquashBurst(benchmark::State& state) {
  boss::BossUnit u(4, 1);
  u.set_logging(false);
  const uint32_t target = 10;
  u.open_channel(0, std::span<const uint32_t>(&target, 1), 20);
  std::vector<boss::SquashEvent> burst(32, {boss::SquashEvent::Kind::TargetFetch, target});
  for (auto _ : state) {
    for (int i = 0; i < 32; ++i) u.consume_prediction(target);
    u.notify_squash(burst);
  }
}
BENCHMARK(BM_SquashBurst);

}  // namespace
