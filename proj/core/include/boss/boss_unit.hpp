#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "boss/ir.hpp"

namespace boss {

inline constexpr uint32_t kOutcomeSlots = 256;

/// One outcome-table entry: outcome and valid bit, plus the producer
/// generation parity it was written under.
struct OutcomeEntry {
  bool valid = false;
  bool taken = false;
  bool gen = false;

  bool operator==(const OutcomeEntry&) const = default;
};

/// Consumer state saved when an End instruction is fetched.
struct IterFrame {
  uint8_t iter = 0;
  bool gen = false;

  bool operator==(const IterFrame&) const = default;
};

struct ChannelState {
  bool open = false;
  bool persist = false;
  std::vector<uint32_t> target_pcs;
  uint32_t end_pc = 0;
  std::array<OutcomeEntry, kOutcomeSlots> outcomes{};
  bool producer_gen = false;
  bool consumer_gen = false;
  uint8_t consumer_iter = 0;
  uint8_t commit_iter = 0;
  /// Frames of in-flight End fetches, oldest first. Hardware holds
  /// `stack_depth` of them; anything beyond marks the channel desynced.
  std::vector<IterFrame> iter_stack;
  bool desync = false;

  bool is_target(uint32_t pc) const;
  bool operator==(const ChannelState&) const = default;
};

enum class BossEventKind : uint8_t {
  Open, AddTarget, Close, Write, Hit, Miss, EndFetch, GenAdvance, Commit, Discard, SquashUndo, Desync, Warning,
};

std::string_view boss_event_name(BossEventKind k);

struct BossEvent {
  uint64_t time = 0;
  BossEventKind kind = BossEventKind::Open;
  int channel = -1;
  bool gen = false;    // generation relevant to the event
  uint32_t iter = 0;   // slot / iteration
  uint32_t pc = 0;
  bool taken = false;
  bool entry_gen = false;  // Hit: generation of the entry that hit
  std::vector<uint32_t> targets;  // Open
  uint32_t end_pc = 0;            // Open
  bool persist = false;           // Open
  std::string detail;

  bool operator==(const BossEvent&) const = default;
};

using BossEventLog = std::vector<BossEvent>;

/// `time kind ch gen iter detail`, one record per line.
void write_event_log(std::ostream& os, const BossEventLog& log);

enum class LookupResult : uint8_t { NoMatch, Miss, Hit };

struct BossLookup {
  LookupResult result = LookupResult::NoMatch;
  bool taken = false;
  int channel = -1;
};

struct SquashEvent {
  enum class Kind : uint8_t { TargetFetch, EndFetch };
  Kind kind = Kind::TargetFetch;
  uint32_t pc = 0;
};

/// Per-channel outcome storage plus the fetch/squash/commit event machine.
class BossUnit {
 public:
  explicit BossUnit(uint32_t channels = 4, uint32_t stack_depth = 1);

  uint32_t channels() const { return static_cast<uint32_t>(state_.size()); }
  bool enabled() const { return enabled_; }

  /// Resets the channel and registers up to four target PCs. Throws Error
  /// when `ch` is out of range.
  void open_channel(uint32_t ch, std::span<const uint32_t> targets, uint32_t end_pc, bool persist = false);
  /// Registers one more target on an open channel without resetting it.
  void add_target(uint32_t ch, uint32_t pc);
  void close_channel(uint32_t ch);
  /// Applies a committed config store (BOSS_open / BOSS_close word).
  void apply_config(uint32_t ch, uint64_t word);

  void write_outcome(uint32_t ch, uint32_t slot, bool taken);
  BossLookup consume_prediction(uint32_t pc);
  /// Returns true if `pc` is the End PC of any open channel.
  bool notify_end_fetch(uint32_t pc);
  /// `events` in reverse fetch order. Only fetches that consumed a slot or
  /// pushed a frame belong here.
  void notify_squash(std::span<const SquashEvent> events);
  /// Same filter as notify_squash: callers skip instructions that were
  /// fetched before their channel opened.
  void notify_commit(uint32_t pc);

  const ChannelState& read_state(uint32_t ch) const;
  const std::vector<ChannelState>& states() const { return state_; }
  const BossEventLog& log() const { return log_; }
  void set_logging(bool on) { logging_ = on; }
  void set_time(uint64_t t) { time_ = t; }

  bool is_interesting(uint32_t pc) const { return enabled_ && pc < interest_.size() && interest_[pc]; }

 private:
  void record(BossEvent ev);
  void rebuild_interest();
  void push_frame(ChannelState& c, int ch);
  void pop_frame(ChannelState& c, int ch);
  void refresh_desync(ChannelState& c, int ch);

  std::vector<ChannelState> state_;
  uint32_t stack_depth_;
  bool enabled_ = false;
  bool logging_ = true;
  uint64_t time_ = 0;
  BossEventLog log_;
  std::vector<bool> interest_;  // PCs that are a target or End of an open channel
};

/// Re-applies the state-changing records of `log` to a fresh unit.
BossUnit replay_event_log(const BossEventLog& log, uint32_t channels = 4, uint32_t stack_depth = 1);

/// Storage cost in bytes: outcome+valid bits, two PC tables (8 B per entry),
/// two iteration tables and two one-bit generation tables, each rounded up
/// to whole bytes. Throws Error when either count is zero.
uint32_t storage_bytes(uint32_t channels, uint32_t iterations);

}  // namespace boss
