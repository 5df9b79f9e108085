#include "boss/frontend.hpp"

#include <cstdio>
#include <deque>
#include <limits>
#include <ostream>

#include "boss/error.hpp"

namespace boss {

void CoreConfig::validate() const {
  if (width == 0) throw ConfigError("width must be at least 1");
  if (window < width) throw ConfigError("window must be at least the width");
  if (channels == 0) throw ConfigError("channels must be at least 1");
  if (step_limit == 0) throw ConfigError("step limit must be positive");
}

uint64_t SimStats::total_target_mispredicts() const {
  uint64_t n = 0;
  for (const auto& [pc, v] : target_mispredicts) n += v;
  return n;
}

uint64_t SimStats::total_target_instances() const {
  uint64_t n = 0;
  for (const auto& [pc, v] : target_instances) n += v;
  return n;
}

namespace {

constexpr uint64_t kNever = std::numeric_limits<uint64_t>::max();

enum class Track : uint8_t { None, Target, End };

struct Slot {
  uint32_t pc = 0;
  int64_t trace_idx = -1;  // -1 on the wrong path
  uint64_t complete = 0;
  bool is_branch = false;
  bool is_cond = false;
  bool pred_taken = false;
  bool mispredicted = false;
  bool resolved = true;
  bool hinted = false;
  Track track = Track::None;
};

struct ConsumerSnapshot {
  uint64_t epoch = 0;
  std::vector<std::pair<uint8_t, bool>> channels;
};

class Sim {
 public:
  Sim(const Program& p, const PredictorConfig& pc, const CoreConfig& core, const SimTargets& targets)
      : prog_(p), core_(core), targets_(targets), pred_(make_predictor(pc)), unit_(core.channels), cache_(core.cache) {
    unit_.set_logging(core.record_boss_log);
    last_load_lat_.assign(p.code.size(), 0);
    last_load_addr_.assign(p.code.size(), 0);
    for (auto t : targets.target_pcs) {
      stats_.target_mispredicts[t] = 0;
      stats_.target_instances[t] = 0;
    }
  }

  SimResult run() {
    trace_ = execute(prog_, core_.step_limit);
    if (trace_.faulted) {
      throw Error("program faults at pc " + std::to_string(trace_.events.back().pc));
    }
    stats_.non_terminating = trace_.truncated;
    fetch_pc_ = prog_.entry;
    const uint64_t total = trace_.events.size();
    const uint64_t cycle_cap = 10'000 + total * 400;
    for (t_ = 0; stats_.committed < total; ++t_) {
      if (t_ >= cycle_cap) {
        stats_.non_terminating = true;
        break;
      }
      unit_.set_time(t_);
      resolve();
      commit();
      fetch();
    }
    stats_.cycles = t_;
    stats_.l1d_misses = cache_.l1_misses();
    stats_.l2_misses = cache_.l2_misses();
    return SimResult{std::move(stats_), unit_.log()};
  }

 private:
  Slot& slot(uint64_t id) { return rob_[id - head_id_]; }

  uint32_t backslice_latency(uint32_t pc) {
    auto it = prog_.backslice_loads.find(pc);
    if (it != prog_.backslice_loads.end()) {
      uint32_t sum = 0;
      for (auto ld : it->second) {
        if (ld < last_load_lat_.size()) sum += last_load_lat_[ld];
      }
      return sum;
    }
    // Dataflow walk over the most recent correct-path instructions.
    std::vector<bool> need(kNumRegs, false);
    need[prog_.code[pc].rs1] = true;
    uint32_t sum = 0;
    for (auto it2 = recent_.rbegin(); it2 != recent_.rend(); ++it2) {
      const auto& ins = prog_.code[it2->first];
      if (!writes_register(ins) || !need[ins.rd]) continue;
      need[ins.rd] = false;
      if (ins.op == Opcode::LD) sum += it2->second;
      for (auto r : source_registers(ins)) need[r] = true;
    }
    return sum;
  }

  void remember(uint32_t pc, uint32_t load_lat) {
    recent_.emplace_back(pc, load_lat);
    while (recent_.size() > core_.dataflow_window) recent_.pop_front();
  }

  BossLookup consult_boss(uint32_t pc) {
    if (!unit_.is_interesting(pc)) return {};
    auto r = unit_.consume_prediction(pc);
    if (r.result == LookupResult::Hit) ++stats_.boss_hits;
    if (r.result == LookupResult::Miss) ++stats_.boss_misses;
    return r;
  }

  ConsumerSnapshot snapshot() const {
    ConsumerSnapshot s;
    s.epoch = config_epoch_;
    for (const auto& c : unit_.states()) s.channels.emplace_back(c.consumer_iter, c.consumer_gen);
    return s;
  }

  void resolve() {
    while (!unresolved_.empty()) {
      const uint64_t id = unresolved_.front();
      Slot& s = slot(id);
      if (s.complete > t_) break;
      unresolved_.pop_front();
      s.resolved = true;
      const auto& ev = trace_.events[s.trace_idx];
      pred_.update(s.pc, ev.taken);
      if (s.mispredicted) {
        squash_after(id);
        fetch_pc_ = ev.taken ? prog_.code[s.pc].target : s.pc + 1;
        on_path_ = true;
        fetch_stopped_ = false;
        fetch_resume_ = t_ + core_.refill_penalty;
        ++stats_.squashes;
        break;
      }
    }
  }

  void squash_after(uint64_t id) {
    std::vector<SquashEvent> events;
    while (head_id_ + rob_.size() > id + 1) {
      const Slot& s = rob_.back();
      if (s.track == Track::Target) events.push_back({SquashEvent::Kind::TargetFetch, s.pc});
      if (s.track == Track::End) events.push_back({SquashEvent::Kind::EndFetch, s.pc});
      rob_.pop_back();
    }
    unit_.notify_squash(events);
    if (core_.debug_snapshots) {
      auto it = snapshots_.find(id);
      if (it != snapshots_.end()) {
        const auto now = snapshot();
        if (it->second.epoch == now.epoch && it->second.channels != now.channels) ++stats_.snapshot_violations;
        snapshots_.erase(it);
      }
    }
  }

  void commit() {
    for (uint32_t n = 0; n < core_.width && !rob_.empty(); ++n) {
      Slot& s = rob_.front();
      if (s.complete > t_ || !s.resolved) break;
      if (s.trace_idx < 0) throw Error("wrong-path instruction reached commit");
      const auto& ev = trace_.events[s.trace_idx];
      if (ev.pc != s.pc || uint64_t(s.trace_idx) != stats_.committed) ++stats_.commit_mismatches;
      if (core_.boss_enabled) apply_boss_store(ev);
      if (s.track != Track::None) unit_.notify_commit(s.pc);
      account(s, ev);
      rob_.pop_front();
      ++head_id_;
    }
  }

  void apply_boss_store(const DynEvent& ev) {
    if (ev.kind == EventKind::BossConfigStore) {
      const auto m = mmio_decode(ev.addr, prog_.mmio);
      if (m.channel < unit_.channels()) {
        unit_.apply_config(m.channel, ev.value);
        ++config_epoch_;
      }
    } else if (ev.kind == EventKind::BossOutcomeStore) {
      const auto m = mmio_decode(ev.addr, prog_.mmio);
      if (m.channel >= unit_.channels()) return;
      for (uint32_t j = 0; j < ev.lanes && m.slot + j < kOutcomeSlots; ++j) {
        unit_.write_outcome(m.channel, m.slot + j, (ev.value >> j) & 1);
      }
    }
  }

  void account(const Slot& s, const DynEvent& ev) {
    ++stats_.committed;
    if (s.is_branch) ++stats_.committed_branches;
    if (s.is_cond) ++stats_.committed_cond_branches;
    if (s.mispredicted) ++stats_.mispredicts;
    if (s.hinted) {
      ++stats_.hinted;
      if (s.pred_taken != ev.taken) ++stats_.wrong_hints;
    }
    auto it = stats_.target_instances.find(s.pc);
    if (it != stats_.target_instances.end()) {
      ++it->second;
      if (s.mispredicted) ++stats_.target_mispredicts[s.pc];
      auto& iter = iteration_[s.pc];
      auto& cell = stats_.histogram[{s.pc, iter}];
      ++cell.instances;
      if (s.mispredicted) ++cell.mispredicts;
      ++iter;
    }
    if (targets_.end_pc && s.pc == *targets_.end_pc) iteration_.clear();
  }

  void fetch() {
    if (t_ < fetch_resume_ || fetch_stopped_) return;
    for (uint32_t n = 0; n < core_.width && rob_.size() < core_.window; ++n) {
      const bool keep_going = on_path_ ? fetch_on_path() : fetch_wrong_path();
      if (!keep_going) return;
    }
  }

  // Returns false when the fetch group ends.
  bool fetch_on_path() {
    if (next_trace_ >= trace_.events.size()) {
      fetch_stopped_ = true;
      return false;
    }
    const auto& ev = trace_.events[next_trace_];
    const Instruction& ins = prog_.code[ev.pc];
    Slot s;
    s.pc = ev.pc;
    s.trace_idx = static_cast<int64_t>(next_trace_++);
    s.complete = t_ + 1;
    uint32_t load_lat = 0;
    bool group_ends = false;
    uint32_t next = ev.pc + 1;

    if (ins.op == Opcode::LD) {
      load_lat = prog_.mmio.contains(ev.addr) ? core_.cache.l1d.latency : cache_.access(ev.addr);
      last_load_lat_[ev.pc] = load_lat;
      last_load_addr_[ev.pc] = ev.addr;
      s.complete = t_ + 1 + load_lat;
    } else if (is_cond_branch(ins.op)) {
      s.is_branch = s.is_cond = true;
      s.resolved = false;
      const auto hint = consult_boss(ev.pc);
      if (hint.result != LookupResult::NoMatch) s.track = Track::Target;
      if (hint.result == LookupResult::Hit) {
        s.pred_taken = hint.taken;
        s.hinted = true;
      } else {
        s.pred_taken = pred_.predict(ev.pc);
      }
      s.mispredicted = s.pred_taken != ev.taken;
      s.complete = t_ + core_.resolve_delay + backslice_latency(ev.pc);
      if (ev.taken) next = ins.target;
      group_ends = s.pred_taken;
    } else if (ins.op == Opcode::JMP) {
      s.is_branch = true;
      s.pred_taken = true;
      next = ins.target;
      group_ends = true;
    } else if (ins.op == Opcode::HALT) {
      fetch_stopped_ = true;
      group_ends = true;
    }
    if (unit_.is_interesting(ev.pc) && s.track == Track::None && unit_.notify_end_fetch(ev.pc)) s.track = Track::End;
    remember(ev.pc, load_lat);

    const uint64_t id = head_id_ + rob_.size();
    rob_.push_back(s);
    if (s.is_cond) unresolved_.push_back(id);
    if (s.mispredicted) {
      on_path_ = false;
      fetch_pc_ = s.pred_taken ? ins.target : ev.pc + 1;
      if (core_.debug_snapshots) snapshots_[id] = snapshot();
      return false;
    }
    fetch_pc_ = next;
    return !group_ends;
  }

  bool fetch_wrong_path() {
    if (fetch_pc_ >= prog_.code.size() || prog_.code[fetch_pc_].op == Opcode::HALT) {
      fetch_stopped_ = true;
      return false;
    }
    const Instruction& ins = prog_.code[fetch_pc_];
    Slot s;
    s.pc = fetch_pc_;
    s.complete = kNever;
    uint32_t next = fetch_pc_ + 1;
    bool group_ends = false;
    if (ins.op == Opcode::LD && core_.wrong_path_pollution && last_load_addr_[fetch_pc_] != 0) {
      cache_.access(last_load_addr_[fetch_pc_]);
    } else if (is_cond_branch(ins.op)) {
      s.is_branch = s.is_cond = true;
      const auto hint = consult_boss(fetch_pc_);
      if (hint.result != LookupResult::NoMatch) s.track = Track::Target;
      s.pred_taken = hint.result == LookupResult::Hit ? hint.taken : pred_.predict(fetch_pc_);
      if (s.pred_taken) next = ins.target;
      group_ends = s.pred_taken;
    } else if (ins.op == Opcode::JMP) {
      s.is_branch = true;
      next = ins.target;
      group_ends = true;
    }
    if (unit_.is_interesting(fetch_pc_) && s.track == Track::None && unit_.notify_end_fetch(fetch_pc_)) {
      s.track = Track::End;
    }
    rob_.push_back(s);
    ++stats_.wrong_path_fetched;
    fetch_pc_ = next;
    return !group_ends;
  }

  const Program& prog_;
  CoreConfig core_;
  SimTargets targets_;
  Predictor pred_;
  BossUnit unit_;
  DataCache cache_;
  DynTrace trace_;
  SimStats stats_;

  uint64_t t_ = 0;
  std::deque<Slot> rob_;
  uint64_t head_id_ = 0;
  std::deque<uint64_t> unresolved_;
  size_t next_trace_ = 0;
  uint32_t fetch_pc_ = 0;
  bool on_path_ = true;
  bool fetch_stopped_ = false;
  uint64_t fetch_resume_ = 0;
  uint64_t config_epoch_ = 0;
  std::vector<uint32_t> last_load_lat_;
  std::vector<uint64_t> last_load_addr_;
  std::deque<std::pair<uint32_t, uint32_t>> recent_;
  std::map<uint32_t, uint32_t> iteration_;
  std::map<uint64_t, ConsumerSnapshot> snapshots_;
};

}  // namespace

SimResult run_sim(const Program& program, const PredictorConfig& predictor, const CoreConfig& core,
                  const SimTargets& targets) {
  core.validate();
  program.validate();
  Sim sim(program, predictor, core, targets);
  return sim.run();
}

void write_stats(std::ostream& os, const SimStats& s) {
  os << "cycles=" << s.cycles << '\n'
     << "committed=" << s.committed << '\n'
     << "committed_branches=" << s.committed_branches << '\n'
     << "committed_cond_branches=" << s.committed_cond_branches << '\n'
     << "mispredicts=" << s.mispredicts << '\n';
  for (const auto& [pc, n] : s.target_mispredicts) os << "target_mispredicts." << pc << '=' << n << '\n';
  for (const auto& [pc, n] : s.target_instances) os << "target_instances." << pc << '=' << n << '\n';
  os << "boss_hits=" << s.boss_hits << '\n'
     << "boss_misses=" << s.boss_misses << '\n'
     << "hinted=" << s.hinted << '\n'
     << "wrong_hints=" << s.wrong_hints << '\n'
     << "squashes=" << s.squashes << '\n'
     << "wrong_path_fetched=" << s.wrong_path_fetched << '\n'
     << "l1d_misses=" << s.l1d_misses << '\n'
     << "l2_misses=" << s.l2_misses << '\n'
     << "commit_mismatches=" << s.commit_mismatches << '\n'
     << "snapshot_violations=" << s.snapshot_violations << '\n'
     << "non_terminating=" << (s.non_terminating ? 1 : 0) << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", s.mpki());
  os << "mpki=" << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.6f", s.ipc());
  os << "ipc=" << buf << '\n';
}

void write_histogram_csv(std::ostream& os, const SimStats& s) {
  os << "pc,iter,mispredicts,instances\n";
  for (const auto& [key, cell] : s.histogram) {
    os << key.first << ',' << key.second << ',' << cell.mispredicts << ',' << cell.instances << '\n';
  }
}

}  // namespace boss
