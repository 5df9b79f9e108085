#pragma once

#include <cstdint>
#include <vector>

namespace boss {

struct CacheLevelConfig {
  uint32_t size_bytes = 0;
  uint32_t ways = 1;
  uint32_t latency = 0;

  bool operator==(const CacheLevelConfig&) const = default;
};

struct CacheConfig {
  uint32_t line_bytes = 64;
  CacheLevelConfig l1i{32 * 1024, 2, 2};
  CacheLevelConfig l1d{64 * 1024, 4, 2};
  CacheLevelConfig l2{2 * 1024 * 1024, 8, 20};
  uint32_t memory_latency = 150;

  bool operator==(const CacheConfig&) const = default;
};

/// Set-associative, true-LRU, allocate on miss.
class CacheLevel {
 public:
  CacheLevel(const CacheLevelConfig& cfg, uint32_t line_bytes);

  /// Returns true on hit; on miss the line is filled.
  bool access(uint64_t addr);
  bool probe(uint64_t addr) const;
  uint32_t sets() const { return sets_; }

 private:
  struct Way {
    uint64_t tag = 0;
    uint64_t last_use = 0;
    bool valid = false;
  };

  uint32_t sets_;
  uint32_t ways_;
  uint32_t line_shift_;
  std::vector<Way> lines_;
  uint64_t clock_ = 0;
};

/// L1D + unified L2 + flat memory. Misses fill both levels.
class DataCache {
 public:
  explicit DataCache(const CacheConfig& cfg = {});

  /// Total latency of a load to `addr`.
  uint32_t access(uint64_t addr);
  uint64_t l1_misses() const { return l1_misses_; }
  uint64_t l2_misses() const { return l2_misses_; }

 private:
  CacheConfig cfg_;
  CacheLevel l1_;
  CacheLevel l2_;
  uint64_t l1_misses_ = 0;
  uint64_t l2_misses_ = 0;
};

}  // namespace boss
