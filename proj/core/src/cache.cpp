#include "boss/cache.hpp"

#include <bit>

#include "boss/error.hpp"

namespace boss {

CacheLevel::CacheLevel(const CacheLevelConfig& cfg, uint32_t line_bytes) : ways_(cfg.ways) {
  if (line_bytes == 0 || !std::has_single_bit(line_bytes)) throw ConfigError("cache line size must be a power of two");
  if (cfg.ways == 0 || cfg.size_bytes % (line_bytes * cfg.ways) != 0) {
    throw ConfigError("cache size must be a multiple of line size times ways");
  }
  sets_ = cfg.size_bytes / (line_bytes * cfg.ways);
  if (sets_ == 0 || !std::has_single_bit(sets_)) throw ConfigError("cache set count must be a power of two");
  line_shift_ = static_cast<uint32_t>(std::countr_zero(line_bytes));
  lines_.resize(size_t(sets_) * ways_);
}

bool CacheLevel::probe(uint64_t addr) const {
  const uint64_t line = addr >> line_shift_;
  const size_t set = line & (sets_ - 1);
  for (uint32_t w = 0; w < ways_; ++w) {
    const auto& l = lines_[set * ways_ + w];
    if (l.valid && l.tag == line) return true;
  }
  return false;
}

bool CacheLevel::access(uint64_t addr) {
  const uint64_t line = addr >> line_shift_;
  const size_t set = line & (sets_ - 1);
  ++clock_;
  Way* victim = nullptr;
  for (uint32_t w = 0; w < ways_; ++w) {
    auto& l = lines_[set * ways_ + w];
    if (l.valid && l.tag == line) {
      l.last_use = clock_;
      return true;
    }
    if (!victim) {
      victim = &l;
    } else if (victim->valid && (!l.valid || l.last_use < victim->last_use)) {
      victim = &l;
    }
  }
  victim->valid = true;
  victim->tag = line;
  victim->last_use = clock_;
  return false;
}

DataCache::DataCache(const CacheConfig& cfg) : cfg_(cfg), l1_(cfg.l1d, cfg.line_bytes), l2_(cfg.l2, cfg.line_bytes) {}

uint32_t DataCache::access(uint64_t addr) {
  uint32_t lat = cfg_.l1d.latency;
  if (l1_.access(addr)) return lat;
  ++l1_misses_;
  lat += cfg_.l2.latency;
  if (l2_.access(addr)) return lat;
  ++l2_misses_;
  return lat + cfg_.memory_latency;
}

}  // namespace boss
