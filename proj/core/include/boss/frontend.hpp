#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "boss/boss_unit.hpp"
#include "boss/cache.hpp"
#include "boss/exec.hpp"
#include "boss/ir.hpp"
#include "boss/predictor.hpp"

namespace boss {

struct CoreConfig {
  uint32_t width = 8;
  uint32_t window = 192;
  uint32_t resolve_delay = 6;
  uint32_t refill_penalty = 12;
  CacheConfig cache;
  bool boss_enabled = true;
  bool wrong_path_pollution = false;
  uint32_t dataflow_window = 4;
  uint32_t channels = 4;
  uint64_t step_limit = kDefaultStepLimit;
  /// Compare consumer state after every squash against the snapshot taken
  /// when the redirecting branch was fetched.
  bool debug_snapshots = false;
  bool record_boss_log = false;

  /// Throws ConfigError when widths are zero or window < width.
  void validate() const;
  bool operator==(const CoreConfig&) const = default;
};

/// Branch PCs whose mispredictions are tracked individually, plus the
/// End PC that delimits iterations for the histogram.
struct SimTargets {
  std::vector<uint32_t> target_pcs;
  std::optional<uint32_t> end_pc;
};

struct HistogramCell {
  uint64_t mispredicts = 0;
  uint64_t instances = 0;
};

struct SimStats {
  uint64_t cycles = 0;
  uint64_t committed = 0;
  uint64_t committed_branches = 0;
  uint64_t committed_cond_branches = 0;
  uint64_t mispredicts = 0;
  std::map<uint32_t, uint64_t> target_mispredicts;
  std::map<uint32_t, uint64_t> target_instances;
  uint64_t boss_hits = 0;    // every consume, either path
  uint64_t boss_misses = 0;
  uint64_t hinted = 0;       // correct-path hits
  uint64_t wrong_hints = 0;  // correct-path hits disagreeing with the oracle
  uint64_t squashes = 0;
  uint64_t wrong_path_fetched = 0;
  uint64_t commit_mismatches = 0;
  uint64_t snapshot_violations = 0;
  uint64_t l1d_misses = 0;
  uint64_t l2_misses = 0;
  bool non_terminating = false;
  /// (pc, iteration since the last End commit) -> counts, target PCs only.
  std::map<std::pair<uint32_t, uint32_t>, HistogramCell> histogram;

  double mpki() const { return committed ? double(mispredicts) * 1000.0 / double(committed) : 0.0; }
  double ipc() const { return cycles ? double(committed) / double(cycles) : 0.0; }
  uint64_t total_target_mispredicts() const;
  uint64_t total_target_instances() const;
};

struct SimResult {
  SimStats stats;
  BossEventLog boss_log;
};

/// Runs the program on the oracle, then replays it through the timing
/// model. Throws Error if the program faults.
SimResult run_sim(const Program& program, const PredictorConfig& predictor, const CoreConfig& core,
                  const SimTargets& targets = {});

/// Flat `key=value` lines.
void write_stats(std::ostream& os, const SimStats& s);
/// `pc,iter,mispredicts,instances` with a header row.
void write_histogram_csv(std::ostream& os, const SimStats& s);

}  // namespace boss
