#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "boss/ir.hpp"

namespace boss {

enum class EventKind : uint8_t { Branch, Load, Store, BossConfigStore, BossOutcomeStore, Other, Fault };

std::string_view event_kind_name(EventKind k);

/// One committed dynamic instruction.
struct DynEvent {
  uint64_t seq = 0;
  uint32_t pc = 0;
  EventKind kind = EventKind::Other;
  uint64_t addr = 0;   // memory operations
  bool taken = false;  // branches
  /// BOSS stores: the config word, or for outcome stores a lane bitmask
  /// (bit j set when lane j is Taken).
  uint64_t value = 0;
  uint8_t lanes = 0;  // outcome slots written by a BOSS outcome store

  bool operator==(const DynEvent&) const = default;
};

struct DynTrace {
  std::vector<DynEvent> events;
  std::array<int64_t, kNumRegs> regs{};
  MemoryImage memory;  // final data memory
  bool halted = false;
  bool faulted = false;
  bool truncated = false;
  uint64_t instruction_count = 0;
};

inline constexpr uint64_t kDefaultStepLimit = 10'000'000;

/// Architectural interpreter. BOSS-range stores become hint events and
/// leave data memory untouched.
DynTrace execute(const Program& program, uint64_t step_limit = kDefaultStepLimit);

/// Ordered outcomes of every dynamic instance of the branch at `pc`.
/// Throws Error if `pc` is not a branch instruction.
std::vector<bool> branch_profile(const DynTrace& trace, const Program& program, uint32_t pc);

/// Fraction of instances that repeat the outcome of the same iteration in
/// the previous generation (`generation_length` instances per generation).
double adjacent_generation_agreement(const std::vector<bool>& profile, size_t generation_length);

/// Tab separated `seq pc kind addr outcome`, one event per line.
void write_trace(std::ostream& os, const DynTrace& trace);

/// Drops every BOSS hint event, renumbering seq densely.
std::vector<DynEvent> strip_boss_events(const std::vector<DynEvent>& events);

}  // namespace boss
