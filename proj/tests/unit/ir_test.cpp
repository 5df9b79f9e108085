#include <gtest/gtest.h>

#include <random>

#include "boss/error.hpp"
#include "boss/ir.hpp"

using namespace boss;

TEST(Mmio, DecodesChannelRegions) {
  MmioLayout m;
  EXPECT_EQ(m.config_address(0), 0xB0550000u);
  EXPECT_EQ(m.config_address(2), 0xB0550000u + 1024);
  EXPECT_EQ(m.outcome_address(1, 3), 0xB0550000u + 512 + 256 + 3);
  EXPECT_EQ(mmio_decode(m.config_address(3), m), (MmioTarget{MmioTarget::Kind::Config, 3, 0}));
  EXPECT_EQ(mmio_decode(m.outcome_address(2, 255), m), (MmioTarget{MmioTarget::Kind::Outcome, 2, 255}));
  EXPECT_EQ(mmio_decode(m.base + 100, m).kind, MmioTarget::Kind::Reserved);
  EXPECT_EQ(mmio_decode(m.base - 1, m).kind, MmioTarget::Kind::NotMmio);
  EXPECT_EQ(mmio_decode(m.end(), m).kind, MmioTarget::Kind::NotMmio);
}

TEST(ChannelConfig, RoundTripsRandomWords) {
  std::mt19937 rng(3);
  for (int i = 0; i < 10000; ++i) {
    ChannelConfig c{uint32_t(rng()), uint32_t(rng()) & 0x7FFFFFFFu, bool(rng() & 1)};
    const auto d = ChannelConfig::decode(c.encode());
    EXPECT_EQ(d.target_pc, c.target_pc);
    EXPECT_EQ(d.end_pc, c.end_pc);
    EXPECT_EQ(d.persist, c.persist);
  }
}

TEST(ChannelConfig, LayoutIsTargetLowEndHigh) {
  ChannelConfig c{0x12, 0x34, true};
  EXPECT_EQ(c.encode(), (uint64_t(0x80000034) << 32) | 0x12);
  EXPECT_TRUE(ChannelConfig::decode(0xFFFFFFFFull).is_close());
}

TEST(MemoryImage, ReadWriteWithinSegments) {
  MemoryImage m;
  m.add_zero(0x100, 16);
  m.add_zero(0x110, 16);  // adjacent: merged
  EXPECT_EQ(m.segments().size(), 1u);
  EXPECT_TRUE(m.write(0x118, store_word(-5)));
  std::array<uint8_t, 8> buf{};
  EXPECT_TRUE(m.read(0x118, buf));
  EXPECT_EQ(load_word(buf), -5);
  EXPECT_FALSE(m.read(0x11C, buf));
  EXPECT_THROW(m.add_zero(0x108, 4), Error);
  EXPECT_EQ(m.size_bytes(), 32u);
}

TEST(Words, LittleEndian) {
  const auto b = store_word(0x0102030405060708);
  EXPECT_EQ(b[0], 0x08);
  EXPECT_EQ(b[7], 0x01);
  EXPECT_EQ(load_word(b), 0x0102030405060708);
}

TEST(Instruction, SourceRegistersExpandVectorLanes) {
  Instruction v{Opcode::VST, 0, 4, 10, 0, 0, 3};
  EXPECT_EQ(source_registers(v), (std::vector<uint8_t>{4, 10, 11, 12}));
  EXPECT_FALSE(writes_register(v));
  EXPECT_TRUE(is_store(Opcode::VST));
  EXPECT_TRUE(is_cond_branch(Opcode::BZ));
  EXPECT_FALSE(is_cond_branch(Opcode::JMP));
  EXPECT_TRUE(is_branch(Opcode::JMP));
}

TEST(Opcode, NamesRoundTrip) {
  for (int i = 0; i <= int(Opcode::HALT); ++i) {
    const auto op = Opcode(i);
    EXPECT_EQ(parse_opcode(opcode_name(op)), op);
  }
  EXPECT_FALSE(parse_opcode("NOPE"));
}
