#include "boss/predictor.hpp"

#include <algorithm>

#include "boss/error.hpp"

namespace boss {

namespace {

bool is_pow2(uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

int log2_u32(uint32_t v) {
  int r = 0;
  while ((v >>= 1) != 0) ++r;
  return r;
}

void require_pow2(uint32_t v, const char* what) {
  if (!is_pow2(v)) throw ConfigError(std::string(what) + " must be a power of two, got " + std::to_string(v));
}

}  // namespace

std::string predictor_kind_name(PredictorKind k) {
  switch (k) {
    case PredictorKind::AlwaysTaken: return "always_taken";
    case PredictorKind::Bimodal: return "bimodal";
    case PredictorKind::Gshare: return "gshare";
    case PredictorKind::TageLite: return "tage";
  }
  return "?";
}

PredictorKind parse_predictor_kind(const std::string& name) {
  if (name == "always_taken" || name == "taken") return PredictorKind::AlwaysTaken;
  if (name == "bimodal") return PredictorKind::Bimodal;
  if (name == "gshare") return PredictorKind::Gshare;
  if (name == "tage" || name == "tage_lite" || name == "tage-lite") return PredictorKind::TageLite;
  throw ConfigError("unknown predictor '" + name + "'");
}

// Counters start at 01: weakly not-taken.
BimodalPredictor::BimodalPredictor(uint32_t entries) : table_(entries, 1), mask_(entries - 1) {
  require_pow2(entries, "bimodal entries");
}

void BimodalPredictor::update(uint32_t pc, bool taken) {
  auto& c = table_[pc & mask_];
  taken ? SatCounter::up(c, 3) : SatCounter::down(c);
}

GsharePredictor::GsharePredictor(uint32_t entries, uint32_t history_bits)
    : table_(entries, 1), mask_(entries - 1), history_bits_(history_bits) {
  require_pow2(entries, "gshare entries");
  if (history_bits == 0 || history_bits > 31) throw ConfigError("gshare history bits must be in 1..31");
}

void GsharePredictor::update(uint32_t pc, bool taken) {
  auto& c = table_[index(pc)];
  taken ? SatCounter::up(c, 3) : SatCounter::down(c);
  history_ = ((history_ << 1) | (taken ? 1u : 0u)) & ((1u << history_bits_) - 1);
}

// ---------------------------------------------------------------------------

TageLitePredictor::TageLitePredictor(uint32_t base_entries, uint32_t tagged_entries, uint64_t seed)
    : base_(base_entries, 1),
      base_mask_(base_entries - 1),
      tagged_mask_(tagged_entries - 1),
      index_bits_(log2_u32(tagged_entries)),
      rng_(seed == 0 ? 0x9E3779B97F4A7C15ULL : seed) {
  require_pow2(base_entries, "tage base entries");
  require_pow2(tagged_entries, "tage tagged entries");
  for (auto& t : tables_) t.assign(tagged_entries, Entry{});
  for (int t = 0; t < kTables; ++t) {
    fold_index_[t] = Folded{0, kHistoryLengths[t], std::max(index_bits_, 1)};
    fold_tag_[t] = Folded{0, kHistoryLengths[t], kTagBits};
    fold_tag2_[t] = Folded{0, kHistoryLengths[t], kTagBits - 1};
  }
}

uint32_t TageLitePredictor::index_of(int table, uint32_t pc) const {
  const int bits = std::max(index_bits_, 1);
  return (pc ^ (pc >> bits) ^ fold_index_[table].value ^ uint32_t(table * 0x5bd1)) & tagged_mask_;
}

uint8_t TageLitePredictor::tag_of(int table, uint32_t pc) const {
  const uint32_t t = pc ^ (pc >> 3) ^ fold_tag_[table].value ^ (fold_tag2_[table].value << 1);
  return static_cast<uint8_t>(t & ((1u << kTagBits) - 1));
}

TageLitePredictor::Lookup TageLitePredictor::lookup(uint32_t pc) const {
  Lookup l;
  for (int t = kTables - 1; t >= 0; --t) {
    const auto& e = tables_[t][index_of(t, pc)];
    if (e.valid && e.tag == tag_of(t, pc)) {
      if (l.provider < 0) {
        l.provider = t;
      } else {
        l.alt = t;
        break;
      }
    }
  }
  const bool base_pred = base_[pc & base_mask_] >= 2;
  l.alt_pred = l.alt >= 0 ? tables_[l.alt][index_of(l.alt, pc)].ctr >= 4 : base_pred;
  l.pred = l.provider >= 0 ? tables_[l.provider][index_of(l.provider, pc)].ctr >= 4 : base_pred;
  return l;
}

bool TageLitePredictor::predict(uint32_t pc) const { return lookup(pc).pred; }

uint64_t TageLitePredictor::next_random() {
  // xorshift64*
  rng_ ^= rng_ >> 12;
  rng_ ^= rng_ << 25;
  rng_ ^= rng_ >> 27;
  return rng_ * 0x2545F4914F6CDD1DULL;
}

void TageLitePredictor::update(uint32_t pc, bool taken) {
  const Lookup l = lookup(pc);

  if (l.provider >= 0) {
    auto& e = tables_[l.provider][index_of(l.provider, pc)];
    taken ? SatCounter::up(e.ctr, 7) : SatCounter::down(e.ctr);
    if (l.pred != l.alt_pred) {
      l.pred == taken ? SatCounter::up(e.useful, 3) : SatCounter::down(e.useful);
    }
  } else {
    auto& c = base_[pc & base_mask_];
    taken ? SatCounter::up(c, 3) : SatCounter::down(c);
  }

  if (l.pred != taken && l.provider < kTables - 1) {
    std::array<int, kTables> candidates{};
    int n = 0;
    for (int t = l.provider + 1; t < kTables; ++t) {
      if (tables_[t][index_of(t, pc)].useful == 0) candidates[n++] = t;
    }
    if (n > 0) {
      // Prefer the shortest free table; seeded tie-break to the next one.
      int pick = candidates[0];
      if (n > 1 && (next_random() & 1) != 0) pick = candidates[1];
      auto& e = tables_[pick][index_of(pick, pc)];
      e.valid = true;
      e.tag = tag_of(pick, pc);
      e.ctr = taken ? 4 : 3;
      e.useful = 0;
      ++allocations_;
    } else {
      for (int t = l.provider + 1; t < kTables; ++t) SatCounter::down(tables_[t][index_of(t, pc)].useful);
    }
  }

  if (++updates_ % (256 * 1024) == 0) {
    for (auto& table : tables_) {
      for (auto& e : table) e.useful >>= 1;
    }
  }
  for (int t = 0; t < kTables; ++t) {
    const bool out = history_[kHistoryLengths[t] - 1];
    fold_index_[t].push(taken, out);
    fold_tag_[t].push(taken, out);
    fold_tag2_[t].push(taken, out);
  }
  history_ <<= 1;
  history_[0] = taken;
}

// ---------------------------------------------------------------------------

namespace {

decltype(auto) build_impl(const PredictorConfig& c) {
  using Impl = std::variant<AlwaysTakenPredictor, BimodalPredictor, GsharePredictor, TageLitePredictor>;
  switch (c.kind) {
    case PredictorKind::AlwaysTaken: return Impl{AlwaysTakenPredictor{}};
    case PredictorKind::Bimodal: return Impl{BimodalPredictor(c.entries)};
    case PredictorKind::Gshare: return Impl{GsharePredictor(c.entries, c.history_bits)};
    case PredictorKind::TageLite: return Impl{TageLitePredictor(c.base_entries, c.tagged_entries, c.seed)};
  }
  throw ConfigError("unknown predictor kind");
}

}  // namespace

Predictor::Predictor(const PredictorConfig& config) : config_(config), impl_(build_impl(config)) {}

bool Predictor::predict(uint32_t pc) const {
  return std::visit([pc](const auto& p) { return p.predict(pc); }, impl_);
}

void Predictor::update(uint32_t pc, bool taken) {
  std::visit([pc, taken](auto& p) { p.update(pc, taken); }, impl_);
}

Predictor make_predictor(const PredictorConfig& config) { return Predictor(config); }

}  // namespace boss
