#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace boss {

enum class PredictorKind : uint8_t { AlwaysTaken, Bimodal, Gshare, TageLite };

std::string predictor_kind_name(PredictorKind k);
PredictorKind parse_predictor_kind(const std::string& name);

struct PredictorConfig {
  PredictorKind kind = PredictorKind::TageLite;
  uint32_t entries = 4096;       // Bimodal / Gshare table size
  uint32_t history_bits = 12;    // Gshare
  uint32_t base_entries = 2048;  // TAGE-lite bimodal base
  uint32_t tagged_entries = 512; // per tagged table
  uint64_t seed = 1;

  bool operator==(const PredictorConfig&) const = default;
};

/// n-bit saturating counter stored in a byte.
struct SatCounter {
  static void up(uint8_t& c, uint8_t max) {
    if (c < max) ++c;
  }
  static void down(uint8_t& c) {
    if (c > 0) --c;
  }
};

class AlwaysTakenPredictor {
 public:
  bool predict(uint32_t) const { return true; }
  void update(uint32_t, bool) {}
};

class BimodalPredictor {
 public:
  explicit BimodalPredictor(uint32_t entries);
  bool predict(uint32_t pc) const { return table_[pc & mask_] >= 2; }
  void update(uint32_t pc, bool taken);
  uint8_t counter(uint32_t pc) const { return table_[pc & mask_]; }
  size_t size() const { return table_.size(); }

 private:
  std::vector<uint8_t> table_;
  uint32_t mask_;
};

class GsharePredictor {
 public:
  GsharePredictor(uint32_t entries, uint32_t history_bits);
  bool predict(uint32_t pc) const { return table_[index(pc)] >= 2; }
  void update(uint32_t pc, bool taken);
  uint32_t history() const { return history_; }
  uint32_t history_bits() const { return history_bits_; }
  size_t size() const { return table_.size(); }

 private:
  uint32_t index(uint32_t pc) const { return (pc ^ history_) & mask_; }

  std::vector<uint8_t> table_;
  uint32_t mask_;
  uint32_t history_bits_;
  uint32_t history_ = 0;
};

/// Four-table TAGE with geometric histories, 8-bit tags, 3-bit prediction
/// counters and 2-bit useful counters over a bimodal base. No statistical
/// corrector and no loop predictor.
class TageLitePredictor {
 public:
  static constexpr int kTables = 4;
  static constexpr std::array<int, kTables> kHistoryLengths = {5, 15, 44, 130};
  static constexpr int kTagBits = 8;
  static constexpr int kMaxHistory = 130;

  struct Entry {
    uint8_t ctr = 0;
    uint8_t tag = 0;
    uint8_t useful = 0;
    bool valid = false;
  };

  TageLitePredictor(uint32_t base_entries, uint32_t tagged_entries, uint64_t seed);

  bool predict(uint32_t pc) const;
  void update(uint32_t pc, bool taken);

  const Entry& entry(int table, uint32_t index) const { return tables_[table][index]; }
  uint32_t index_of(int table, uint32_t pc) const;
  uint8_t tag_of(int table, uint32_t pc) const;
  uint8_t base_counter(uint32_t pc) const { return base_[pc & base_mask_]; }
  size_t tagged_size() const { return tables_[0].size(); }
  size_t base_size() const { return base_.size(); }
  uint64_t allocations() const { return allocations_; }

 private:
  struct Lookup {
    int provider = -1;  // -1 = base
    int alt = -1;
    bool pred = false;
    bool alt_pred = false;
  };
  /// Incrementally folded global history (length bits compressed to width).
  struct Folded {
    uint32_t value = 0;
    int length = 0;
    int width = 1;
    void push(bool in, bool out) {
      value = (value << 1) | (in ? 1u : 0u);
      value ^= (out ? 1u : 0u) << (length % width);
      value ^= value >> width;
      value &= (1u << width) - 1;
    }
  };

  Lookup lookup(uint32_t pc) const;
  uint64_t next_random();

  std::vector<uint8_t> base_;
  uint32_t base_mask_;
  std::array<std::vector<Entry>, kTables> tables_;
  uint32_t tagged_mask_;
  int index_bits_;
  std::bitset<256> history_;
  std::array<Folded, kTables> fold_index_;
  std::array<Folded, kTables> fold_tag_;
  std::array<Folded, kTables> fold_tag2_;
  uint64_t rng_;
  uint64_t allocations_ = 0;
  uint64_t updates_ = 0;
};

/// Value-semantic predictor state selected at runtime.
class Predictor {
 public:
  explicit Predictor(const PredictorConfig& config);

  bool predict(uint32_t pc) const;
  void update(uint32_t pc, bool taken);

  const PredictorConfig& config() const { return config_; }
  template <class T>
  const T* as() const {
    return std::get_if<T>(&impl_);
  }

 private:
  PredictorConfig config_;
  std::variant<AlwaysTakenPredictor, BimodalPredictor, GsharePredictor, TageLitePredictor> impl_;
};

/// Throws ConfigError on non-power-of-two sizes.
Predictor make_predictor(const PredictorConfig& config);

}  // namespace boss
