#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boss/assembler.hpp"

namespace boss {

enum class WorkloadKind : uint8_t { KillNeighbours, KillOrConnect, RecordReplay, Correlated, Synthetic };
enum class MemoryClass : uint8_t { Hot, Cold };

std::string workload_kind_name(WorkloadKind k);
WorkloadKind parse_workload_kind(const std::string& name);
std::string memory_class_name(MemoryClass m);
MemoryClass parse_memory_class(const std::string& name);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::Synthetic;
  uint32_t trip = 256;        // ignored by kill_* (fixed at 4)
  uint32_t generations = 8;
  uint64_t seed = 1;
  /// Outcome bias (synthetic), Taken-rate of the break (kill_or_connect),
  /// repeat probability (record_replay), correlation (correlated).
  double probability = 0.5;
  uint32_t chain_depth = 1;   // synthetic: 1 or 2 dependent loads
  MemoryClass memory = MemoryClass::Hot;
  /// ALU-only padding between the pre-execute site and the target loop.
  uint32_t lead_filler = 200;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  bool operator==(const WorkloadSpec&) const = default;
};

struct Workload {
  WorkloadSpec spec;
  SourceProgram source;
  Program program;
  std::string target_label;
  std::string end_label;
  uint32_t target_pc = 0;
  uint32_t end_pc = 0;
  /// Oracle outcome of every dynamic instance of the target branch.
  std::vector<bool> schedule;
};

/// Deterministic in `spec`; cross-checks the schedule against the oracle
/// and throws Error on disagreement.
Workload build_workload(const WorkloadSpec& spec);

/// Record-and-replay hints: each generation writes its own outcomes,
/// which the next generation consumes. Requires a record_replay workload.
SourceProgram build_record_replay_instrumentation(const Workload& w, uint32_t channel = 0);

/// Source-loop outcomes written as hints for the target loop. Requires a
/// correlated workload.
SourceProgram build_correlated_instrumentation(const Workload& w, uint32_t channel = 0);

/// Label of the correlated workload's source branch.
inline constexpr const char* kCorrelatedSourceLabel = "CS";

}  // namespace boss
