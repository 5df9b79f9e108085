#include <gtest/gtest.h>

#include <cmath>

#include "../support/hint_safety.hpp"
#include "boss/error.hpp"
#include "boss/exec.hpp"
#include "boss/frontend.hpp"
#include "boss/workloads.hpp"

using namespace boss;

namespace {

WorkloadSpec spec_of(WorkloadKind k) {
  WorkloadSpec s;
  s.kind = k;
  s.trip = 64;
  s.generations = 10;
  return s;
}

double taken_rate(const std::vector<bool>& v) {
  size_t t = 0;
  for (bool b : v) t += b;
  return double(t) / double(v.size());
}

const WorkloadKind kAll[] = {WorkloadKind::KillNeighbours, WorkloadKind::KillOrConnect, WorkloadKind::RecordReplay,
                             WorkloadKind::Correlated, WorkloadKind::Synthetic};

}  // namespace

TEST(Workloads, EveryKindBuildsAndHalts) {
  for (auto k : kAll) {
    const auto w = build_workload(spec_of(k));
    const auto t = execute(w.program);
    EXPECT_TRUE(t.halted) << workload_kind_name(k);
    EXPECT_EQ(branch_profile(t, w.program, w.target_pc), w.schedule) << workload_kind_name(k);
    EXPECT_TRUE(is_cond_branch(w.program.code[w.target_pc].op));
    EXPECT_FALSE(w.schedule.empty());
    EXPECT_FALSE(w.program.backslice_loads.empty()) << workload_kind_name(k);
  }
}

TEST(Workloads, DeterministicPerSeed) {
  for (auto k : kAll) {
    auto s = spec_of(k);
    const auto a = build_workload(s);
    const auto b = build_workload(s);
    EXPECT_EQ(a.program, b.program);
    s.seed = 99;
    EXPECT_NE(build_workload(s).schedule, a.schedule) << workload_kind_name(k);
  }
}

TEST(Workloads, SyntheticBiasFollowsProbability) {
  for (double p : {0.1, 0.5, 0.9}) {
    auto s = spec_of(WorkloadKind::Synthetic);
    s.memory = MemoryClass::Cold;
    s.trip = 256;
    s.generations = 40;
    s.probability = p;
    const auto w = build_workload(s);
    const double n = double(w.schedule.size());
    const double sd = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(taken_rate(w.schedule), p, 5 * sd) << p;
  }
}

TEST(Workloads, HotDataRepeatsColdDataDoesNot) {
  auto s = spec_of(WorkloadKind::Synthetic);
  s.trip = 1024;
  s.generations = 8;
  const auto hot = build_workload(s);
  // 4096-element pool: generation g and g+4 see the same data.
  EXPECT_TRUE(std::equal(hot.schedule.begin(), hot.schedule.begin() + 1024, hot.schedule.begin() + 4096));
  s.memory = MemoryClass::Cold;
  const auto cold = build_workload(s);
  EXPECT_FALSE(std::equal(cold.schedule.begin(), cold.schedule.begin() + 1024, cold.schedule.begin() + 4096));
  CoreConfig c;
  EXPECT_GT(run_sim(cold.program, PredictorConfig{}, c).stats.l1d_misses,
            run_sim(hot.program, PredictorConfig{}, c).stats.l1d_misses);
}

TEST(Workloads, RecordReplayRepeatsExactFraction) {
  auto s = spec_of(WorkloadKind::RecordReplay);
  s.trip = 100;
  s.generations = 20;
  s.probability = 0.93;
  const auto w = build_workload(s);
  // Exactly seven of every hundred outcomes flip between generations.
  EXPECT_DOUBLE_EQ(adjacent_generation_agreement(w.schedule, 100), 0.93);
}

TEST(Workloads, CorrelatedTargetTracksSource) {
  auto s = spec_of(WorkloadKind::Correlated);
  s.trip = 200;
  s.probability = 0.8;
  const auto w = build_workload(s);
  const auto t = execute(w.program);
  const auto src = branch_profile(t, w.program, *w.program.label_pc(kCorrelatedSourceLabel));
  ASSERT_EQ(src.size(), w.schedule.size());
  size_t agree = 0;
  for (size_t i = 0; i < src.size(); ++i) agree += src[i] == w.schedule[i];
  EXPECT_NEAR(double(agree) / double(src.size()), 0.8, 0.005);
}

TEST(Workloads, HintedVariantsAreArchitecturallyInvisible) {
  const auto rr = build_workload(spec_of(WorkloadKind::RecordReplay));
  EXPECT_EQ(check::architectural_diff(rr.source, build_record_replay_instrumentation(rr, 1)), "");
  const auto co = build_workload(spec_of(WorkloadKind::Correlated));
  EXPECT_EQ(check::architectural_diff(co.source, build_correlated_instrumentation(co, 3)), "");
  EXPECT_THROW(build_record_replay_instrumentation(co), Error);
  EXPECT_THROW(build_correlated_instrumentation(rr), Error);
  EXPECT_THROW(build_correlated_instrumentation(co, 9), ConfigError);
}

TEST(Workloads, RecordReplayHintsMatchPreviousGeneration) {
  auto s = spec_of(WorkloadKind::RecordReplay);
  s.probability = 1.0;
  const auto w = build_workload(s);
  const auto p = lower(build_record_replay_instrumentation(w));
  SimTargets tg;
  tg.target_pcs = {*p.label_pc(w.target_label)};
  const auto r = run_sim(p, PredictorConfig{}, CoreConfig{}, tg);
  // Identical generations: every hint after the first generation is right.
  EXPECT_EQ(r.stats.wrong_hints, 0u);
  EXPECT_GT(r.stats.hinted, 0u);
}

TEST(Workloads, SpecValidation) {
  WorkloadSpec s;
  s.probability = 1.5;
  EXPECT_THROW(build_workload(s), ConfigError);
  s = WorkloadSpec{};
  s.trip = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = WorkloadSpec{};
  s.chain_depth = 3;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_workload_kind("mcf"), ConfigError);
  EXPECT_THROW(parse_memory_class("warm"), ConfigError);
  for (auto k : kAll) EXPECT_EQ(parse_workload_kind(workload_kind_name(k)), k);
}
