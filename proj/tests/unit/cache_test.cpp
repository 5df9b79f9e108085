#include <gtest/gtest.h>

#include <list>
#include <random>

#include "boss/cache.hpp"
#include "boss/error.hpp"

using namespace boss;

namespace {

// Per-set recency lists: front is most recent.
class RefCache {
 public:
  RefCache(uint64_t size, uint32_t ways, uint64_t line) : sets_(size / line / ways), ways_(ways), line_(line) {}
  bool access(uint64_t addr) {
    const uint64_t blk = addr / line_;
    auto& s = sets_[blk % sets_.size()];
    for (auto it = s.begin(); it != s.end(); ++it) {
      if (*it == blk) {
        s.erase(it);
        s.push_front(blk);
        return true;
      }
    }
    s.push_front(blk);
    if (s.size() > ways_) s.pop_back();
    return false;
  }

 private:
  std::vector<std::list<uint64_t>> sets_;
  uint32_t ways_;
  uint64_t line_;
};

}  // namespace

TEST(Cache, LruMatchesReferenceModel) {
  CacheLevel c(CacheLevelConfig{4096, 4, 2}, 64);
  RefCache ref(4096, 4, 64);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200000; ++i) {
    const uint64_t addr = (rng() % 512) * 32;
    ASSERT_EQ(c.access(addr), ref.access(addr)) << i;
  }
}

TEST(Cache, HierarchyLatencies) {
  DataCache d(CacheConfig{});
  EXPECT_EQ(d.access(0x1000), 2u + 20u + 150u);
  EXPECT_EQ(d.access(0x1008), 2u);
  EXPECT_EQ(d.l1_misses(), 1u);
  EXPECT_EQ(d.l2_misses(), 1u);
}

TEST(Cache, L2CatchesL1Evictions) {
  CacheConfig cfg;
  DataCache d(cfg);
  // Five lines mapping to the same set of the 4-way L1 but not the L2.
  const uint64_t l1_sets = cfg.l1d.size_bytes / cfg.line_bytes / cfg.l1d.ways;
  const uint64_t stride = l1_sets * cfg.line_bytes;
  for (int i = 0; i < 5; ++i) d.access(i * stride);
  EXPECT_EQ(d.access(0), 2u + 20u);
}

TEST(Cache, RejectsBadGeometry) {
  EXPECT_THROW(CacheLevel(CacheLevelConfig{3000, 4, 2}, 64), ConfigError);
  EXPECT_THROW(CacheLevel(CacheLevelConfig{4096, 3, 2}, 64), ConfigError);
}
