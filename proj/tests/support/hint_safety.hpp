#pragma once

// Differential check: a hinted program must commit the same user-visible
// events and end in the same architectural state as the original.

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "boss/assembler.hpp"
#include "boss/exec.hpp"
#include "boss/frontend.hpp"

namespace boss::check {

struct Projected {
  uint32_t id;
  EventKind kind;
  uint64_t addr;
  bool taken;
  bool operator==(const Projected&) const = default;
};

inline std::vector<Projected> project(const DynTrace& t, const std::vector<uint32_t>& origin) {
  std::vector<Projected> out;
  for (const auto& e : t.events) {
    if (e.kind == EventKind::BossConfigStore || e.kind == EventKind::BossOutcomeStore) continue;
    const uint32_t id = origin[e.pc];
    if (id == 0) continue;
    out.push_back({id, e.kind, e.addr, e.taken});
  }
  return out;
}

/// Empty string when equivalent, otherwise the first difference.
inline std::string architectural_diff(const SourceProgram& original, const SourceProgram& hinted) {
  const auto a = lower_with_origin(original);
  const auto b = lower_with_origin(hinted);
  const auto ta = execute(a.program);
  const auto tb = execute(b.program);
  if (!ta.halted || !tb.halted) return "a program did not halt";
  const auto pa = project(ta, a.origin);
  const auto pb = project(tb, b.origin);
  if (pa.size() != pb.size()) {
    return "committed user events differ in count: " + std::to_string(pa.size()) + " vs " + std::to_string(pb.size());
  }
  for (size_t i = 0; i < pa.size(); ++i) {
    if (!(pa[i] == pb[i])) return "committed user event " + std::to_string(i) + " differs";
  }
  if (!(ta.memory == tb.memory)) return "final memory differs";
  const auto used = used_registers(original);
  for (unsigned r = 0; r < kNumRegs; ++r) {
    if (used[r] && r != kScratchReg && ta.regs[r] != tb.regs[r]) return "register r" + std::to_string(r) + " differs";
  }
  return {};
}

/// Same program under BOSS on and off: identical commit streams.
inline std::string timing_diff(const Program& p, const PredictorConfig& pc) {
  CoreConfig on, off;
  off.boss_enabled = false;
  const auto a = run_sim(p, pc, on);
  const auto b = run_sim(p, pc, off);
  if (a.stats.commit_mismatches || b.stats.commit_mismatches) return "commit stream diverged from the oracle";
  if (a.stats.committed != b.stats.committed) return "committed counts differ with BOSS on/off";
  return {};
}

}  // namespace boss::check
