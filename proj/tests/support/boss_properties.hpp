#pragma once

// Randomized fetch / squash / commit driver for BossUnit with a test-side
// oracle that tracks absolute generation numbers.

#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "boss/boss_unit.hpp"

namespace boss::check {

struct PropertyCounts {
  uint64_t cases = 0;
  uint64_t hits = 0;
  uint64_t misses = 0;
  uint64_t squashes = 0;
  uint64_t restore_violations = 0;  // state differs after fetch + reverse squash
  uint64_t cross_gen_hits = 0;      // Hit on data from another generation
  uint64_t stale_hits = 0;          // Hit on a slot the producer never wrote for this generation
  uint64_t wrong_value_hits = 0;
};

/// Fetches a random burst from a random reachable state, squashes it in
/// reverse and compares channel state with the snapshot.
inline void squash_restore_case(std::mt19937_64& rng, PropertyCounts& out) {
  constexpr uint32_t kT = 10, kE = 20;
  BossUnit u(2, 1 + rng() % 2);
  u.set_logging(false);
  const uint32_t t = kT;
  u.open_channel(0, std::span<const uint32_t>(&t, 1), kE, rng() % 4 == 0);
  // Warm up with in-order fetch + commit so counters and generations move.
  const int warm = int(rng() % 40);
  for (int i = 0; i < warm; ++i) {
    if (rng() % 3 == 0) u.write_outcome(0, uint32_t(rng() % 64), rng() & 1);
    const bool end = rng() % 8 == 0;
    const uint32_t pc = end ? kE : kT;
    if (end) {
      u.notify_end_fetch(pc);
    } else {
      u.consume_prediction(pc);
    }
    u.notify_commit(pc);
  }
  // Leave a few fetches in flight (never committed) before the snapshot.
  const int pending = int(rng() % 3);
  for (int i = 0; i < pending; ++i) u.consume_prediction(kT);

  const auto snapshot = u.states();
  std::vector<SquashEvent> fetched;
  const int burst = 1 + int(rng() % 24);
  for (int i = 0; i < burst; ++i) {
    if (rng() % 5 == 0) {
      u.notify_end_fetch(kE);
      fetched.push_back({SquashEvent::Kind::EndFetch, kE});
    } else {
      u.consume_prediction(kT);
      fetched.push_back({SquashEvent::Kind::TargetFetch, kT});
    }
  }
  std::vector<SquashEvent> reversed(fetched.rbegin(), fetched.rend());
  u.notify_squash(reversed);
  ++out.cases;
  ++out.squashes;
  if (u.states() != snapshot) ++out.restore_violations;
}

/// Interleaves producer writes, speculative fetches, partial squashes and
/// in-order commits. Every Hit is checked against the last value written for
/// the fetch's absolute (generation, iteration).
inline void pipeline_case(std::mt19937_64& rng, PropertyCounts& out) {
  constexpr uint32_t kT = 10, kE = 20;
  constexpr uint32_t kMaxIter = 200;
  BossUnit u(1, 1);
  u.set_logging(false);
  const uint32_t t = kT;
  u.open_channel(0, std::span<const uint32_t>(&t, 1), kE);

  struct InFlight {
    bool end;
    uint64_t gen;
    uint32_t iter;
  };
  std::vector<InFlight> window;
  std::map<std::pair<uint64_t, uint32_t>, bool> written;
  uint64_t spec_gen = 0, committed_gen = 0;
  uint32_t spec_iter = 0;
  uint64_t produced_gen = 0;
  uint32_t next_slot = 0;
  // Each case favours a different gap between producer and consumer.
  const uint32_t write_weight = 1 + uint32_t(rng() % 6);

  const int steps = 20 + int(rng() % 120);
  for (int s = 0; s < steps; ++s) {
    const uint32_t op = uint32_t(rng() % (8 + write_weight));
    if (op < 3) {
      if (spec_iter >= kMaxIter) continue;
      const auto r = u.consume_prediction(kT);
      if (r.result == LookupResult::Hit) {
        ++out.hits;
        auto it = written.find({spec_gen, spec_iter});
        if (it == written.end()) {
          bool other = false;
          for (const auto& [k, v] : written) other |= k.second == spec_iter;
          ++(other ? out.cross_gen_hits : out.stale_hits);
        } else if (it->second != r.taken) {
          ++out.wrong_value_hits;
        }
      } else if (r.result == LookupResult::Miss) {
        ++out.misses;
      }
      window.push_back({false, spec_gen, spec_iter});
      ++spec_iter;
    } else if (op == 3) {
      u.notify_end_fetch(kE);
      window.push_back({true, spec_gen, spec_iter});
      ++spec_gen;
      spec_iter = 0;
    } else if (op == 4) {
      if (window.empty()) continue;
      const size_t k = 1 + rng() % window.size();
      std::vector<SquashEvent> evs;
      for (size_t i = 0; i < k; ++i) {
        const auto& f = window[window.size() - 1 - i];
        evs.push_back({f.end ? SquashEvent::Kind::EndFetch : SquashEvent::Kind::TargetFetch, f.end ? kE : kT});
      }
      const InFlight oldest = window[window.size() - k];
      window.resize(window.size() - k);
      u.notify_squash(evs);
      spec_gen = oldest.gen;
      spec_iter = oldest.iter;
      ++out.squashes;
    } else if (op < 8) {
      if (window.empty()) continue;
      const InFlight f = window.front();
      window.erase(window.begin());
      u.notify_commit(f.end ? kE : kT);
      if (f.end) ++committed_gen;
    } else {
      // Mostly sequential, like a pre-execute loop; sometimes a stray slot.
      if (produced_gen != committed_gen) {
        produced_gen = committed_gen;
        next_slot = 0;
      }
      const uint32_t slot = rng() % 8 == 0 ? uint32_t(rng() % kMaxIter) : next_slot++ % kMaxIter;
      const bool v = rng() & 1;
      u.write_outcome(0, slot, v);
      written[{committed_gen, slot}] = v;
    }
  }
  ++out.cases;
}

}  // namespace boss::check
