#include <gtest/gtest.h>

#include <random>

#include "boss/error.hpp"
#include "boss/predictor.hpp"

using namespace boss;

namespace {

double accuracy(Predictor& p, const std::vector<std::pair<uint32_t, bool>>& stream, size_t warmup) {
  size_t right = 0, n = 0;
  for (size_t i = 0; i < stream.size(); ++i) {
    const auto [pc, t] = stream[i];
    if (i >= warmup) {
      right += p.predict(pc) == t;
      ++n;
    }
    p.update(pc, t);
  }
  return double(right) / double(n);
}

PredictorConfig cfg(PredictorKind k) {
  PredictorConfig c;
  c.kind = k;
  return c;
}

}  // namespace

TEST(Bimodal, MatchesTwoBitCounterReference) {
  BimodalPredictor p(64);
  std::vector<int> ref(64, 1);
  std::mt19937 rng(1);
  for (int i = 0; i < 20000; ++i) {
    const uint32_t pc = rng() % 300;
    const bool t = rng() % 3 != 0;
    ASSERT_EQ(p.predict(pc), ref[pc % 64] >= 2);
    ref[pc % 64] = t ? std::min(ref[pc % 64] + 1, 3) : std::max(ref[pc % 64] - 1, 0);
    p.update(pc, t);
    ASSERT_EQ(p.counter(pc), ref[pc % 64]);
  }
}

TEST(Gshare, MatchesXorIndexedReference) {
  GsharePredictor p(256, 6);
  std::vector<int> ref(256, 1);
  uint32_t hist = 0;
  std::mt19937 rng(2);
  for (int i = 0; i < 20000; ++i) {
    const uint32_t pc = rng() % 1000;
    const bool t = rng() & 1;
    const uint32_t idx = (pc ^ hist) & 255;
    ASSERT_EQ(p.predict(pc), ref[idx] >= 2);
    ref[idx] = t ? std::min(ref[idx] + 1, 3) : std::max(ref[idx] - 1, 0);
    hist = ((hist << 1) | t) & 63;
    p.update(pc, t);
    ASSERT_EQ(p.history(), hist);
  }
}

TEST(Predictors, RandomOutcomesStayNearCoinFlip) {
  std::mt19937_64 rng(42);
  std::vector<std::pair<uint32_t, bool>> s;
  for (int i = 0; i < 40000; ++i) s.push_back({100, bool(rng() & 1)});
  for (auto k : {PredictorKind::AlwaysTaken, PredictorKind::Bimodal, PredictorKind::Gshare, PredictorKind::TageLite}) {
    Predictor p(cfg(k));
    const double a = accuracy(p, s, 0);
    EXPECT_GE(a, 0.48) << predictor_kind_name(k);
    EXPECT_LE(a, 0.52) << predictor_kind_name(k);
  }
}

TEST(Predictors, HistoryPredictorsLearnPeriodicPattern) {
  std::vector<std::pair<uint32_t, bool>> s;
  const bool pat[] = {1, 1, 0, 1, 0, 0, 1, 0, 1, 1};
  for (int i = 0; i < 20000; ++i) s.push_back({40, pat[i % 10]});
  for (auto k : {PredictorKind::Gshare, PredictorKind::TageLite}) {
    Predictor p(cfg(k));
    EXPECT_GT(accuracy(p, s, 5000), 0.98) << predictor_kind_name(k);
  }
  Predictor b(cfg(PredictorKind::Bimodal));
  EXPECT_LT(accuracy(b, s, 5000), 0.7);
}

TEST(TageLite, LearnsLoopExitWithLongPeriod) {
  // A 30-iteration loop: taken 29 times then not taken.
  std::vector<std::pair<uint32_t, bool>> s;
  for (int i = 0; i < 60000; ++i) s.push_back({7, i % 30 != 29});
  Predictor t(cfg(PredictorKind::TageLite));
  Predictor g(cfg(PredictorKind::Gshare));
  const double at = accuracy(t, s, 20000);
  EXPECT_GT(at, 0.995);
  EXPECT_GT(at, accuracy(g, s, 20000));
}

TEST(TageLite, DeterministicForFixedSeed) {
  std::mt19937 rng(9);
  std::vector<std::pair<uint32_t, bool>> s;
  for (int i = 0; i < 20000; ++i) s.push_back({uint32_t(rng() % 64), rng() % 4 != 0});
  Predictor a(cfg(PredictorKind::TageLite)), b(cfg(PredictorKind::TageLite));
  for (const auto& [pc, t] : s) {
    ASSERT_EQ(a.predict(pc), b.predict(pc));
    a.update(pc, t);
    b.update(pc, t);
  }
  EXPECT_EQ(a.as<TageLitePredictor>()->allocations(), b.as<TageLitePredictor>()->allocations());
  EXPECT_GT(a.as<TageLitePredictor>()->allocations(), 0u);
}

TEST(Predictors, ConfigValidation) {
  PredictorConfig c;
  c.kind = PredictorKind::Bimodal;
  c.entries = 1000;
  EXPECT_THROW(make_predictor(c), ConfigError);
  c.kind = PredictorKind::TageLite;
  c.tagged_entries = 300;
  EXPECT_THROW(make_predictor(c), ConfigError);
  EXPECT_THROW(parse_predictor_kind("perceptron"), ConfigError);
  EXPECT_EQ(parse_predictor_kind("tage"), PredictorKind::TageLite);
}
