#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "../support/hint_safety.hpp"
#include "boss/assembler.hpp"
#include "boss/error.hpp"
#include "boss/exec.hpp"
#include "boss/frontend.hpp"
#include "boss/instrument.hpp"

using namespace boss;

namespace {

/// Counted loop over `trip` words with an LDB on each; `body_extra` is
/// spliced in after the branch.
std::string ldb_loop(int trip, const std::string& body_extra = "", const std::string& bound = "") {
  std::mt19937 rng{uint32_t(trip)};
  std::ostringstream s;
  s << ".word 0x8000";
  for (int i = 0; i < trip; ++i) s << ' ' << (rng() % 3 == 0 ? 0 : 1);
  s << "\n.zero 0x20000 64\n    MOVI r2, 0x8000\n    MOVI r3, 8\n    MOVI r9, " << trip << '\n';
  s << ".loop r1 = 0, " << (bound.empty() ? std::to_string(trip) : bound) << " target=T\n";
  s << "    MUL r4, r1, r3\n    ADD r4, r4, r2\n    LD r5, [r4+0]\nT:\n    BNZ r5, S\n    ADDI r6, r6, 1\nS:\n";
  s << body_extra << ".endloop\n    HALT\n";
  return s.str();
}

InstrumentResult run(const std::string& text, const std::string& variant = "plain",
                     std::optional<std::pair<int64_t, int64_t>> range = {}) {
  InstrumentOptions o;
  parse_variant(variant, o);
  o.range = range;
  return instrument(parse_source(text), "T", o);
}

uint64_t dyn_count(const SourceProgram& s) { return execute(lower(s)).instruction_count; }

std::optional<InstrumentErrorCode> code_of(const std::string& text, const std::string& target = "T") {
  return instrument(parse_source(text), target, InstrumentOptions{}).code;
}

}  // namespace

TEST(Induction, FindsCanonicalLoop) {
  const auto src = parse_source(ldb_loop(10));
  const auto* loop = find_target_loop(src, "T");
  ASSERT_NE(loop, nullptr);
  const auto ind = find_induction(*loop);
  EXPECT_EQ(ind.reg, 1);
  EXPECT_EQ(ind.trip_count(), 10);
}

TEST(Backslice, CollectsFeedingChain) {
  const auto src = parse_source(ldb_loop(10));
  const auto bs = extract_backslice(*find_target_loop(src, "T"), "T");
  ASSERT_EQ(bs.instrs.size(), 3u);
  EXPECT_EQ(bs.instrs[0].ins.op, Opcode::MUL);
  EXPECT_EQ(bs.instrs[2].ins.op, Opcode::LD);
  EXPECT_EQ(bs.loads.size(), 1u);
  EXPECT_EQ(bs.cond_reg, 5);
  EXPECT_EQ(bs.live_ins, (std::vector<uint8_t>{1, 2, 3}));  // induction first
}

TEST(Backslice, AnnotationLabelsLoadsOnce) {
  auto src = parse_source(ldb_loop(10));
  annotate_backslice(src, "T");
  annotate_backslice(src, "T");
  ASSERT_EQ(src.slices.size(), 1u);
  EXPECT_EQ(src.slices[0].loads, (std::vector<std::string>{"__slice_T_0"}));
  const auto p = lower(src);
  const auto branch = *p.label_pc("T");
  ASSERT_EQ(p.backslice_loads.at(branch).size(), 1u);
  EXPECT_EQ(p.code[p.backslice_loads.at(branch)[0]].op, Opcode::LD);
}

TEST(Instrument, ErrorCodes) {
  EXPECT_EQ(code_of(ldb_loop(8), "missing"), InstrumentErrorCode::TargetNotFound);
  EXPECT_EQ(code_of(ldb_loop(8, "    ADDI r1, r1, 0\n")), InstrumentErrorCode::NotCanonical);
  EXPECT_EQ(code_of(ldb_loop(8, "    ADDI r9, r9, 1\n", "r9")), InstrumentErrorCode::NotCanonical);
  EXPECT_EQ(code_of(ldb_loop(8, "    ST [r2+0], r6\n")), InstrumentErrorCode::LoopCarriedDependence);
  EXPECT_EQ(code_of(ldb_loop(8, "    ADDI r3, r3, 0\n")), InstrumentErrorCode::LoopCarriedDependence);
  EXPECT_EQ(code_of(R"(
.word 0x8000 1 0 1 1
    MOVI r2, 0x8000
.loop r1 = 0, 4 target=T
    LD r5, [r2+0]
    BZ r5, S
T:
    BNZ r5, S
S:
.endloop
    HALT
)"),
            InstrumentErrorCode::NestedTargetBranch);
  EXPECT_EQ(code_of(R"(
.word 0x8000 1 0 1 1
    MOVI r2, 0x8000
.loop r1 = 0, 4 target=T
.loop r7 = 0, 2
    ADDI r5, r7, 0
.endloop
T:
    BNZ r5, S
S:
.endloop
    HALT
)"),
            InstrumentErrorCode::SliceEscapesLoop);
  EXPECT_EQ(code_of("T:\n    BNZ r1, E\nE:\n    HALT\n"), InstrumentErrorCode::NotCanonical);
}

TEST(Instrument, FailureReturnsOriginalWithDiagnostic) {
  const auto text = ldb_loop(8, "    ST [r2+0], r6\n");
  const auto r = run(text);
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.diagnostic.find("LoopCarriedDependence"), std::string::npos);
  EXPECT_EQ(lower(r.source).code, assemble(text).code);
}

TEST(Instrument, StoresToDisjointSegmentAreStillConservative) {
  // Store base r8 is unrelated to the slice, but without alias analysis the
  // pass must still refuse.
  const auto r = run(ldb_loop(8, "    MOVI r8, 0x20000\n    ST [r8+0], r6\n"));
  EXPECT_EQ(r.code, InstrumentErrorCode::LoopCarriedDependence);
}

TEST(Instrument, OptionValidation) {
  InstrumentOptions o;
  EXPECT_THROW(parse_variant("unroll:x", o), InstrumentError);
  EXPECT_THROW(parse_variant("simd", o), InstrumentError);
  const auto src = parse_source(ldb_loop(16));
  for (auto bad : {"unroll:1", "unroll:65", "vec:3", "vec:32"}) {
    InstrumentOptions b;
    parse_variant(bad, b);
    EXPECT_EQ(instrument(src, "T", b).code, InstrumentErrorCode::InvalidOptions) << bad;
  }
  InstrumentOptions ch;
  ch.channel = 4;
  EXPECT_EQ(instrument(src, "T", ch).code, InstrumentErrorCode::InvalidOptions);
  InstrumentOptions rg;
  rg.range = {5, 2};
  EXPECT_EQ(instrument(src, "T", rg).code, InstrumentErrorCode::InvalidOptions);
  EXPECT_EQ(variant_text(o), "plain");
}

TEST(Instrument, RangeBeyondTripIsClampedWithWarning) {
  const auto r = run(ldb_loop(16), "plain", std::pair<int64_t, int64_t>{4, 40});
  ASSERT_TRUE(r.ok);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("clamped"), std::string::npos);
}

TEST(Instrument, WritesExactlyTheCoveredOutcomes) {
  const auto text = ldb_loop(40);
  const auto orig = execute(assemble(text));
  const auto p = assemble(text);
  const auto truth = branch_profile(orig, p, *p.label_pc("T"));
  for (auto v : {"plain", "unroll:4", "vec:8", "vec:16"}) {
    for (auto rg : {std::optional<std::pair<int64_t, int64_t>>{}, std::optional<std::pair<int64_t, int64_t>>{{3, 21}}}) {
      const auto r = run(text, v, rg);
      ASSERT_TRUE(r.ok) << v << ": " << r.diagnostic;
      const auto t = execute(lower(r.source));
      // Rebuild the outcome table from the hint stores.
      std::map<uint32_t, bool> slots;
      for (const auto& e : t.events) {
        if (e.kind != EventKind::BossOutcomeStore) continue;
        const auto m = mmio_decode(e.addr, p.mmio);
        for (uint32_t l = 0; l < e.lanes; ++l) slots[m.slot + l] = (e.value >> l) & 1;
      }
      const int64_t lo = rg ? rg->first : 0, hi = rg ? rg->second : 39;
      ASSERT_EQ(slots.size(), size_t(hi - lo + 1)) << v;
      // BNZ is taken when the loaded word is non-zero; the hint is the
      // branch outcome.
      for (int64_t i = lo; i <= hi; ++i) EXPECT_EQ(slots.at(uint32_t(i)), bool(truth[size_t(i)])) << v << " iter " << i;
    }
  }
}

TEST(Instrument, PreexecCostOrdering) {
  const auto text = ldb_loop(256);
  const uint64_t base = dyn_count(parse_source(text));
  auto overhead = [&](const std::string& v) { return dyn_count(run(text, v).source) - base; };
  const uint64_t plain = overhead("plain"), unroll = overhead("unroll:4"), vec = overhead("vec:8");
  EXPECT_LT(vec, unroll);
  EXPECT_LT(unroll, plain);
  // Per iteration: three slice instructions, two compares normalizing the
  // raw load to 0/1, a store, a pointer bump and four loop-control
  // instructions (bound MOVI, ADDI, CMP_GE, BZ).
  EXPECT_NEAR(double(plain) / 256.0, 3 + 2 + 6, 0.05);
}

TEST(Instrument, CoverageOverheadMonotoneInRangeWidth) {
  const auto text = ldb_loop(256);
  uint64_t prev = 0;
  for (int64_t w : {1, 16, 64, 128, 256}) {
    const uint64_t n = dyn_count(run(text, "plain", std::pair<int64_t, int64_t>{0, w - 1}).source);
    EXPECT_GT(n, prev) << w;
    prev = n;
  }
}

TEST(Instrument, StripMinesLongAndUnknownTrips) {
  for (const std::string& text : {ldb_loop(600), ldb_loop(300, "", "r9")}) {
    const auto r = run(text);
    ASSERT_TRUE(r.ok) << r.diagnostic;
    EXPECT_TRUE(contains_label(r.source.body, "__chunk_end0"));
    EXPECT_EQ(check::architectural_diff(parse_source(text), r.source), "");
    const auto p = lower(r.source);
    SimTargets tg;
    tg.target_pcs = {*p.label_pc("T")};
    const auto s = run_sim(p, PredictorConfig{}, CoreConfig{}, tg);
    EXPECT_EQ(s.stats.wrong_hints, 0u);
    EXPECT_EQ(s.stats.commit_mismatches, 0u);
  }
  // Ranges need a static trip within the cap.
  EXPECT_EQ(run(ldb_loop(600), "plain", std::pair<int64_t, int64_t>{0, 9}).code, InstrumentErrorCode::InvalidOptions);
}

TEST(Instrument, EarliestPlacementHoistsPastIndependentCode) {
  std::string text = ldb_loop(32);
  text.insert(text.find(".loop"), "    ADDI r20, r20, 1\n    ADDI r21, r21, 1\n");
  InstrumentOptions early, adj;
  adj.placement = Placement::Adjacent;
  const auto a = lower(instrument(parse_source(text), "T", early).source);
  const auto b = lower(instrument(parse_source(text), "T", adj).source);
  // The filler ends up between pre-execution and the target loop only
  // with earliest placement.
  auto filler_pc = [](const Program& p) {
    for (uint32_t i = 0; i < p.code.size(); ++i) {
      if (p.code[i].op == Opcode::ADDI && p.code[i].rd == 20) return i;
    }
    return uint32_t(0);
  };
  auto first_hint_pc = [](const Program& p) {
    for (uint32_t i = 0; i < p.code.size(); ++i) {
      if (p.code[i].op == Opcode::ST && p.code[i].imm == 0 && i > 0 && p.code[i - 1].op == Opcode::MOVI) return i;
    }
    return uint32_t(0);
  };
  EXPECT_LT(first_hint_pc(a), filler_pc(a));
  EXPECT_GT(first_hint_pc(b), filler_pc(b));
}

TEST(Instrument, ChannelSelectsConfigAddress) {
  InstrumentOptions o;
  o.channel = 2;
  const auto r = instrument(parse_source(ldb_loop(8)), "T", o);
  ASSERT_TRUE(r.ok);
  const auto t = execute(lower(r.source));
  MmioLayout m;
  bool saw = false;
  for (const auto& e : t.events) {
    if (e.kind == EventKind::BossConfigStore) {
      EXPECT_EQ(e.addr, m.config_address(2));
      saw = true;
    }
    if (e.kind == EventKind::BossOutcomeStore) EXPECT_EQ(mmio_decode(e.addr, m).channel, 2u);
  }
  EXPECT_TRUE(saw);
}

TEST(Instrument, RandomLoopsStayArchitecturallyEquivalent) {
  std::mt19937 rng(17);
  const char* variants[] = {"plain", "unroll:2", "unroll:8", "vec:4", "vec:8"};
  for (int i = 0; i < 60; ++i) {
    const int trip = 1 + int(rng() % 300);
    const auto text = ldb_loop(trip);
    const std::string v = variants[rng() % 5];
    const auto r = run(text, v);
    ASSERT_TRUE(r.ok) << v << " trip " << trip << ": " << r.diagnostic;
    EXPECT_EQ(check::architectural_diff(parse_source(text), r.source), "") << v << " trip " << trip;
    EXPECT_EQ(check::timing_diff(lower(r.source), PredictorConfig{}), "") << v << " trip " << trip;
  }
}
