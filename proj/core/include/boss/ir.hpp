#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace boss {

inline constexpr unsigned kNumRegs = 32;
/// Scratch register clobbered by structured-loop lowering.
inline constexpr uint8_t kScratchReg = 31;
inline constexpr unsigned kMaxTargetsPerChannel = 4;

enum class Opcode : uint8_t {
  ADD, SUB, MUL, ADDI, MOVI, MOV, CMP_EQ, CMP_LE, CMP_GE, AND, OR,
  LD, ST, VST, BNZ, BZ, JMP, HALT,
};

std::string_view opcode_name(Opcode op);
std::optional<Opcode> parse_opcode(std::string_view name);

/// One instruction of the toy register machine.
///
/// Operand use by opcode:
///   ADD/SUB/MUL/AND/OR/CMP_*  rd, rs1, rs2
///   ADDI                      rd, rs1, imm
///   MOVI                      rd, imm
///   MOV                       rd, rs1
///   LD                        rd, [rs1+imm]          (8-byte little endian)
///   ST                        [rs1+imm], rs2         (8-byte little endian)
///   VST                       [rs1+imm], rs2, width  (low byte of rs2..rs2+width-1)
///   BNZ/BZ                    rs1, target
///   JMP                       target
struct Instruction {
  Opcode op = Opcode::HALT;
  uint8_t rd = 0;
  uint8_t rs1 = 0;
  uint8_t rs2 = 0;
  int64_t imm = 0;
  uint32_t target = 0;
  uint8_t width = 0;

  bool operator==(const Instruction&) const = default;
};

bool is_cond_branch(Opcode op);
bool is_branch(Opcode op);
bool is_store(Opcode op);
bool writes_register(const Instruction& ins);
/// Registers read by `ins`, in operand order (VST expands its lane registers).
std::vector<uint8_t> source_registers(const Instruction& ins);

/// Address layout of the memory-mapped BOSS channels.
struct MmioLayout {
  uint64_t base = 0xB0550000ULL;
  uint32_t channel_stride = 512;
  uint32_t config_offset = 0;
  uint32_t config_bytes = 8;
  uint32_t outcomes_offset = 256;
  uint32_t outcome_slots = 256;
  uint32_t channels = 4;

  uint64_t end() const { return base + uint64_t(channel_stride) * channels; }
  bool contains(uint64_t addr) const { return addr >= base && addr < end(); }
  uint64_t config_address(uint32_t ch) const { return base + uint64_t(ch) * channel_stride + config_offset; }
  uint64_t outcome_address(uint32_t ch, uint32_t slot) const {
    return base + uint64_t(ch) * channel_stride + outcomes_offset + slot;
  }

  bool operator==(const MmioLayout&) const = default;
};

struct MmioTarget {
  enum class Kind : uint8_t { NotMmio, Config, Outcome, Reserved };
  Kind kind = Kind::NotMmio;
  uint32_t channel = 0;
  uint32_t slot = 0;  // outcome slot, or byte offset inside the config word

  bool operator==(const MmioTarget&) const = default;
};

MmioTarget mmio_decode(uint64_t addr, const MmioLayout& layout);

/// Config word written by BOSS_open: bytes 0-3 target PC, bytes 4-7 End PC.
/// Bit 31 of the End PC field requests a persistent (record-and-replay)
/// channel; a target PC of all ones closes the channel.
struct ChannelConfig {
  static constexpr uint32_t kClose = 0xFFFFFFFFu;
  static constexpr uint32_t kPersistBit = 0x80000000u;

  uint32_t target_pc = 0;
  uint32_t end_pc = 0;
  bool persist = false;

  bool is_close() const { return target_pc == kClose; }
  uint64_t encode() const;
  static ChannelConfig decode(uint64_t word);
};

/// Sparse byte-addressed memory built from declared segments. Adjacent
/// segments are merged; overlaps are rejected.
class MemoryImage {
 public:
  void add(uint64_t addr, std::span<const uint8_t> bytes);
  void add_zero(uint64_t addr, uint64_t len);
  void add_words(uint64_t addr, std::span<const int64_t> words);

  bool contains(uint64_t addr, uint64_t len) const;
  bool overlaps(uint64_t addr, uint64_t len) const;
  /// Returns false if [addr, addr+len) is not fully inside one segment.
  bool read(uint64_t addr, std::span<uint8_t> out) const;
  bool write(uint64_t addr, std::span<const uint8_t> in);

  const std::map<uint64_t, std::vector<uint8_t>>& segments() const { return segs_; }
  uint64_t size_bytes() const;

  bool operator==(const MemoryImage&) const = default;

 private:
  const std::vector<uint8_t>* find(uint64_t addr, uint64_t len, uint64_t* offset) const;

  std::map<uint64_t, std::vector<uint8_t>> segs_;
};

/// Flat, label-resolved program.
struct Program {
  std::vector<Instruction> code;
  std::map<std::string, uint32_t> labels;
  MemoryImage memory;
  uint32_t entry = 0;
  MmioLayout mmio;
  /// Branch PC -> PCs of the loads feeding it (backslice metadata).
  std::map<uint32_t, std::vector<uint32_t>> backslice_loads;

  std::optional<uint32_t> label_pc(std::string_view name) const;
  /// Throws AsmError if an invariant (target range, register range, MMIO
  /// overlap, VST lanes) is violated.
  void validate() const;

  bool operator==(const Program&) const = default;
};

int64_t load_word(std::span<const uint8_t, 8> bytes);
std::array<uint8_t, 8> store_word(int64_t value);

}  // namespace boss
