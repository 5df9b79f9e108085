#include <gtest/gtest.h>

#include "boss/assembler.hpp"
#include "boss/error.hpp"
#include "boss/exec.hpp"

using namespace boss;

namespace {

const char* kNested = R"(.entry main
main:
    MOVI r2, 0
    MOVI r8, 0
.do
    ADDI r2, r2, 1
.loop r1 = 0, 3, 1 target=T
    CMP_EQ r5, r1, r0
T:
    BNZ r5, S
    ADDI r3, r3, 1
S:
.endloop
E:
    ADDI r8, r8, 1
    CMP_GE r9, r8, r10
.until r9
    HALT
)";

int line_of(const std::string& text) {
  try {
    parse_source(text);
  } catch (const AsmError& e) {
    return e.line();
  }
  return -1;
}

int lower_line_of(const std::string& text) {
  try {
    assemble(text);
  } catch (const AsmError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(Assembler, LoopInsideDoWhileSurvivesParsing) {
  const auto src = parse_source(kNested);
  EXPECT_TRUE(contains_label(src.body, "T"));
  const auto p = lower(src);
  ASSERT_TRUE(p.label_pc("T"));
  EXPECT_EQ(p.code[*p.label_pc("T")].op, Opcode::BNZ);
}

TEST(Assembler, PrintedSourceReparsesIdentically) {
  const auto a = lower(parse_source(kNested));
  const auto b = lower(parse_source(print_source(parse_source(kNested))));
  EXPECT_EQ(a.code, b.code);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(Assembler, LoopBodyRunsTripCountTimes) {
  // r10 = 0 so the .do body runs once; the loop counts r1 = 0,1,2 and
  // only r1 == 0 skips the increment.
  const auto t = execute(assemble(kNested));
  ASSERT_TRUE(t.halted);
  EXPECT_EQ(t.regs[3], 2);
  EXPECT_EQ(t.regs[2], 1);
}

TEST(Assembler, EmptyTripLoopIsGuarded) {
  const auto t = execute(assemble(R"(
    MOVI r4, 0
.loop r1 = 5, 5
    ADDI r4, r4, 1
.endloop
    HALT
)"));
  EXPECT_EQ(t.regs[4], 0);
}

TEST(Assembler, RegisterBoundAndStep) {
  const auto t = execute(assemble(R"(
    MOVI r7, 10
.loop r1 = 1, r7, 3
    ADD r4, r4, r1
.endloop
    HALT
)"));
  EXPECT_EQ(t.regs[4], 1 + 4 + 7);
}

TEST(Assembler, ReportsLineNumbers) {
  EXPECT_EQ(line_of("    MOVI r1, 0\n    FOO r1\n"), 2);
  EXPECT_EQ(line_of("\n\n.endloop\n"), 3);
  EXPECT_EQ(line_of("    ADD r1, r2\n"), 1);
  EXPECT_EQ(line_of("    MOVI r32, 1\n"), 1);
  EXPECT_EQ(line_of(".loop r1 = 0, 4, 0\n.endloop\n"), 1);
  EXPECT_EQ(lower_line_of("    JMP nowhere\n"), 1);
  EXPECT_EQ(lower_line_of("a:\n    HALT\na:\n"), 3);
}

TEST(Assembler, DataDirectivesFillMemory) {
  const auto p = assemble(".word 0x2000 7 -1\n.data 0x3000 1 2\n    HALT\n");
  std::array<uint8_t, 8> b{};
  ASSERT_TRUE(p.memory.read(0x2008, b));
  EXPECT_EQ(load_word(b), -1);
  EXPECT_TRUE(p.memory.contains(0x3000, 2));
  EXPECT_FALSE(p.memory.contains(0x3000, 3));
}

TEST(Assembler, ConfigReferenceEncodesPcs) {
  const auto p = assemble(R"(
    MOVI r1, config(A, B, persist)
A:
    BZ r0, B
B:
    HALT
)");
  const auto cfg = ChannelConfig::decode(uint64_t(p.code[0].imm));
  EXPECT_EQ(cfg.target_pc, *p.label_pc("A"));
  EXPECT_EQ(cfg.end_pc, *p.label_pc("B"));
  EXPECT_TRUE(cfg.persist);
}

TEST(Assembler, SourceIdsTrackUserInstructions) {
  const auto l = lower_with_origin(parse_source(kNested));
  ASSERT_EQ(l.origin.size(), l.program.code.size());
  size_t user = 0;
  for (auto id : l.origin) user += id != 0;
  EXPECT_EQ(user, 9u);  // loop control is synthesized
}

TEST(Assembler, DisassemblyReassembles) {
  const auto p = assemble(kNested);
  const auto q = assemble(disassemble(p));
  EXPECT_EQ(p.code, q.code);
}

TEST(Assembler, UsedRegistersIncludeInductionAndBounds) {
  const auto src = parse_source(".loop r3 = 0, r9\n    ADD r1, r2, r4\n.endloop\n    HALT\n");
  const auto u = used_registers(src);
  for (int r : {1, 2, 3, 4, 9}) EXPECT_TRUE(u[r]) << r;
  EXPECT_FALSE(u[5]);
}
