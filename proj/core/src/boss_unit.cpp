#include "boss/boss_unit.hpp"

#include <algorithm>
#include <ostream>

#include "boss/error.hpp"

namespace boss {

bool ChannelState::is_target(uint32_t pc) const {
  return std::find(target_pcs.begin(), target_pcs.end(), pc) != target_pcs.end();
}

std::string_view boss_event_name(BossEventKind k) {
  switch (k) {
    case BossEventKind::Open: return "open";
    case BossEventKind::AddTarget: return "add_target";
    case BossEventKind::Close: return "close";
    case BossEventKind::Write: return "write";
    case BossEventKind::Hit: return "hit";
    case BossEventKind::Miss: return "miss";
    case BossEventKind::EndFetch: return "end_fetch";
    case BossEventKind::GenAdvance: return "gen_advance";
    case BossEventKind::Commit: return "commit";
    case BossEventKind::Discard: return "discard";
    case BossEventKind::SquashUndo: return "squash_undo";
    case BossEventKind::Desync: return "desync";
    case BossEventKind::Warning: return "warning";
  }
  return "?";
}

void write_event_log(std::ostream& os, const BossEventLog& log) {
  for (const auto& e : log) {
    os << e.time << ' ' << boss_event_name(e.kind) << ' ' << e.channel << ' ' << int(e.gen) << ' ' << e.iter;
    switch (e.kind) {
      case BossEventKind::Open:
        os << " targets=";
        for (size_t i = 0; i < e.targets.size(); ++i) os << (i ? "," : "") << e.targets[i];
        os << " end=" << e.end_pc << " persist=" << int(e.persist);
        break;
      case BossEventKind::Write: os << " taken=" << int(e.taken); break;
      case BossEventKind::Hit: os << " pc=" << e.pc << " taken=" << int(e.taken); break;
      case BossEventKind::AddTarget:
      case BossEventKind::Miss:
      case BossEventKind::EndFetch:
      case BossEventKind::Commit:
      case BossEventKind::SquashUndo: os << " pc=" << e.pc; break;
      default: break;
    }
    if (!e.detail.empty()) os << ' ' << e.detail;
    os << '\n';
  }
}

BossUnit::BossUnit(uint32_t channels, uint32_t stack_depth) : state_(channels), stack_depth_(stack_depth) {
  if (channels == 0) throw Error("BOSS unit needs at least one channel");
  if (stack_depth == 0) throw Error("iteration stack depth must be positive");
}

void BossUnit::record(BossEvent ev) {
  if (!logging_) return;
  ev.time = time_;
  log_.push_back(std::move(ev));
}

void BossUnit::rebuild_interest() {
  interest_.clear();
  enabled_ = false;
  for (const auto& c : state_) {
    if (!c.open) continue;
    enabled_ = true;
    auto mark = [&](uint32_t pc) {
      if (pc >= interest_.size()) interest_.resize(pc + 1, false);
      interest_[pc] = true;
    };
    for (auto t : c.target_pcs) mark(t);
    mark(c.end_pc);
  }
}

const ChannelState& BossUnit::read_state(uint32_t ch) const {
  if (ch >= state_.size()) throw Error("channel " + std::to_string(ch) + " out of range");
  return state_[ch];
}

void BossUnit::open_channel(uint32_t ch, std::span<const uint32_t> targets, uint32_t end_pc, bool persist) {
  if (ch >= state_.size()) throw Error("channel " + std::to_string(ch) + " out of range");
  if (targets.empty()) throw Error("open needs at least one target");
  ChannelState fresh;
  fresh.open = true;
  fresh.persist = persist;
  fresh.end_pc = end_pc;
  for (auto t : targets) {
    if (fresh.target_pcs.size() == kMaxTargetsPerChannel) break;
    if (!fresh.is_target(t)) fresh.target_pcs.push_back(t);
  }
  state_[ch] = std::move(fresh);
  BossEvent ev;
  ev.kind = BossEventKind::Open;
  ev.channel = int(ch);
  ev.targets = state_[ch].target_pcs;
  ev.end_pc = end_pc;
  ev.persist = persist;
  record(std::move(ev));
  rebuild_interest();
}

void BossUnit::add_target(uint32_t ch, uint32_t pc) {
  auto& c = state_.at(ch);
  if (!c.open || c.is_target(pc)) return;
  if (c.target_pcs.size() >= kMaxTargetsPerChannel) {
    BossEvent ev;
    ev.kind = BossEventKind::Warning;
    ev.channel = int(ch);
    ev.pc = pc;
    ev.detail = "target_limit";
    record(std::move(ev));
    return;
  }
  c.target_pcs.push_back(pc);
  BossEvent ev;
  ev.kind = BossEventKind::AddTarget;
  ev.channel = int(ch);
  ev.pc = pc;
  record(std::move(ev));
  rebuild_interest();
}

void BossUnit::close_channel(uint32_t ch) {
  if (ch >= state_.size()) throw Error("channel " + std::to_string(ch) + " out of range");
  state_[ch] = ChannelState{};
  BossEvent ev;
  ev.kind = BossEventKind::Close;
  ev.channel = int(ch);
  record(std::move(ev));
  rebuild_interest();
}

void BossUnit::apply_config(uint32_t ch, uint64_t word) {
  const auto cfg = ChannelConfig::decode(word);
  if (cfg.is_close()) {
    close_channel(ch);
    return;
  }
  const auto& c = read_state(ch);
  if (c.open && c.end_pc == cfg.end_pc && c.persist == cfg.persist && !c.is_target(cfg.target_pc)) {
    add_target(ch, cfg.target_pc);
    return;
  }
  const uint32_t t = cfg.target_pc;
  open_channel(ch, std::span<const uint32_t>(&t, 1), cfg.end_pc, cfg.persist);
}

void BossUnit::write_outcome(uint32_t ch, uint32_t slot, bool taken) {
  auto& c = state_.at(ch);
  if (slot >= kOutcomeSlots) throw Error("outcome slot out of range");
  c.outcomes[slot] = OutcomeEntry{true, taken, c.producer_gen};
  BossEvent ev;
  ev.kind = BossEventKind::Write;
  ev.channel = int(ch);
  ev.gen = c.producer_gen;
  ev.iter = slot;
  ev.taken = taken;
  record(std::move(ev));
}

BossLookup BossUnit::consume_prediction(uint32_t pc) {
  BossLookup out;
  if (!is_interesting(pc)) return out;
  for (uint32_t ch = 0; ch < state_.size(); ++ch) {
    auto& c = state_[ch];
    if (!c.open || !c.is_target(pc)) continue;
    const auto& e = c.outcomes[c.consumer_iter];
    const bool hit = e.valid && !c.desync && (c.persist || e.gen == c.consumer_gen);
    out.result = hit ? LookupResult::Hit : LookupResult::Miss;
    out.taken = hit && e.taken;
    out.channel = int(ch);
    BossEvent ev;
    ev.kind = hit ? BossEventKind::Hit : BossEventKind::Miss;
    ev.channel = int(ch);
    ev.gen = c.consumer_gen;
    ev.iter = c.consumer_iter;
    ev.pc = pc;
    ev.taken = out.taken;
    ev.entry_gen = e.gen;
    record(std::move(ev));
    ++c.consumer_iter;
    return out;
  }
  return out;
}

void BossUnit::refresh_desync(ChannelState& c, int ch) {
  const bool now = c.iter_stack.size() > stack_depth_;
  if (now && !c.desync) {
    BossEvent ev;
    ev.kind = BossEventKind::Desync;
    ev.channel = ch;
    ev.iter = static_cast<uint32_t>(c.iter_stack.size());
    ev.detail = "overflow";
    record(std::move(ev));
  }
  c.desync = now;
}

void BossUnit::push_frame(ChannelState& c, int ch) {
  c.iter_stack.push_back(IterFrame{c.consumer_iter, c.consumer_gen});
  c.consumer_iter = 0;
  c.consumer_gen = !c.consumer_gen;
  if (c.iter_stack.size() > stack_depth_) refresh_desync(c, ch);
}

void BossUnit::pop_frame(ChannelState& c, int ch) {
  if (c.iter_stack.empty()) {
    c.desync = true;
    BossEvent ev;
    ev.kind = BossEventKind::Desync;
    ev.channel = ch;
    ev.detail = "underflow";
    record(std::move(ev));
    return;
  }
  c.consumer_iter = c.iter_stack.back().iter;
  c.consumer_gen = c.iter_stack.back().gen;
  c.iter_stack.pop_back();
  if (c.desync && c.iter_stack.size() <= stack_depth_) c.desync = false;
}

bool BossUnit::notify_end_fetch(uint32_t pc) {
  if (!is_interesting(pc)) return false;
  bool any = false;
  for (uint32_t ch = 0; ch < state_.size(); ++ch) {
    auto& c = state_[ch];
    if (!c.open || c.end_pc != pc) continue;
    push_frame(c, int(ch));
    BossEvent ev;
    ev.kind = BossEventKind::EndFetch;
    ev.channel = int(ch);
    ev.gen = c.consumer_gen;
    ev.iter = static_cast<uint32_t>(c.iter_stack.size());
    ev.pc = pc;
    record(std::move(ev));
    any = true;
  }
  return any;
}

void BossUnit::notify_squash(std::span<const SquashEvent> events) {
  if (!enabled_) return;
  for (const auto& s : events) {
    for (uint32_t ch = 0; ch < state_.size(); ++ch) {
      auto& c = state_[ch];
      if (!c.open) continue;
      if (s.kind == SquashEvent::Kind::TargetFetch && c.is_target(s.pc)) {
        --c.consumer_iter;
        BossEvent ev;
        ev.kind = BossEventKind::SquashUndo;
        ev.channel = int(ch);
        ev.gen = c.consumer_gen;
        ev.iter = c.consumer_iter;
        ev.pc = s.pc;
        record(std::move(ev));
        break;
      }
      if (s.kind == SquashEvent::Kind::EndFetch && c.end_pc == s.pc) {
        pop_frame(c, int(ch));
        BossEvent ev;
        ev.kind = BossEventKind::SquashUndo;
        ev.channel = int(ch);
        ev.gen = c.consumer_gen;
        ev.iter = c.consumer_iter;
        ev.pc = s.pc;
        ev.detail = "end";
        record(std::move(ev));
      }
    }
  }
}

void BossUnit::notify_commit(uint32_t pc) {
  if (!is_interesting(pc)) return;
  for (uint32_t ch = 0; ch < state_.size(); ++ch) {
    auto& c = state_[ch];
    if (!c.open) continue;
    if (c.is_target(pc)) {
      auto& e = c.outcomes[c.commit_iter];
      if (!c.persist && e.valid && e.gen == c.producer_gen) e.valid = false;
      BossEvent ev;
      ev.kind = BossEventKind::Commit;
      ev.channel = int(ch);
      ev.gen = c.producer_gen;
      ev.iter = c.commit_iter;
      ev.pc = pc;
      record(std::move(ev));
      ++c.commit_iter;
    }
    if (c.end_pc == pc) {
      const bool old = c.producer_gen;
      c.producer_gen = !c.producer_gen;
      if (!c.persist) {
        uint32_t dropped = 0;
        for (auto& e : c.outcomes) {
          if (e.valid && e.gen == old) {
            e.valid = false;
            ++dropped;
          }
        }
        if (dropped) {
          BossEvent ev;
          ev.kind = BossEventKind::Discard;
          ev.channel = int(ch);
          ev.gen = old;
          ev.iter = dropped;
          record(std::move(ev));
        }
      }
      c.commit_iter = 0;
      if (!c.iter_stack.empty()) c.iter_stack.erase(c.iter_stack.begin());
      refresh_desync(c, int(ch));
      BossEvent ev;
      ev.kind = BossEventKind::GenAdvance;
      ev.channel = int(ch);
      ev.gen = c.producer_gen;
      ev.pc = pc;
      record(std::move(ev));
    }
  }
}

BossUnit replay_event_log(const BossEventLog& log, uint32_t channels, uint32_t stack_depth) {
  BossUnit u(channels, stack_depth);
  for (const auto& e : log) {
    u.set_time(e.time);
    const auto ch = static_cast<uint32_t>(e.channel);
    switch (e.kind) {
      case BossEventKind::Open: u.open_channel(ch, e.targets, e.end_pc, e.persist); break;
      case BossEventKind::AddTarget: u.add_target(ch, e.pc); break;
      case BossEventKind::Close: u.close_channel(ch); break;
      case BossEventKind::Write: u.write_outcome(ch, e.iter, e.taken); break;
      case BossEventKind::Hit:
      case BossEventKind::Miss: u.consume_prediction(e.pc); break;
      case BossEventKind::SquashUndo: {
        const SquashEvent s{e.detail == "end" ? SquashEvent::Kind::EndFetch : SquashEvent::Kind::TargetFetch, e.pc};
        u.notify_squash(std::span<const SquashEvent>(&s, 1));
        break;
      }
      case BossEventKind::EndFetch: u.notify_end_fetch(e.pc); break;
      case BossEventKind::Commit: u.notify_commit(e.pc); break;
      case BossEventKind::GenAdvance: u.notify_commit(e.pc); break;
      default: break;  // derived records
    }
  }
  return u;
}

namespace {
uint32_t ceil_div(uint64_t a, uint64_t b) { return static_cast<uint32_t>((a + b - 1) / b); }
uint32_t bits_for(uint32_t n) {
  uint32_t b = 0;
  while ((uint64_t(1) << b) < n) ++b;
  return std::max<uint32_t>(b, 1);
}
}  // namespace

uint32_t storage_bytes(uint32_t channels, uint32_t iterations) {
  if (channels == 0 || iterations == 0) throw Error("channels and iterations must be positive");
  const uint64_t ch = channels;
  return ceil_div(ch * iterations * 2, 8) + static_cast<uint32_t>(2 * ch * 8) +
         ceil_div(2 * ch * bits_for(iterations), 8) + ceil_div(2 * ch, 8);
}

}  // namespace boss
