#include "boss/ir.hpp"

#include <algorithm>
#include <cstring>

#include "boss/error.hpp"

namespace boss {

namespace {

constexpr std::array<std::string_view, 18> kOpNames = {
    "ADD", "SUB", "MUL", "ADDI", "MOVI", "MOV", "CMP_EQ", "CMP_LE", "CMP_GE",
    "AND", "OR",  "LD",  "ST",   "VST",  "BNZ", "BZ",     "JMP",    "HALT",
};

}  // namespace

std::string_view opcode_name(Opcode op) { return kOpNames[static_cast<size_t>(op)]; }

std::optional<Opcode> parse_opcode(std::string_view name) {
  for (size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<Opcode>(i);
  }
  return std::nullopt;
}

bool is_cond_branch(Opcode op) { return op == Opcode::BNZ || op == Opcode::BZ; }
bool is_branch(Opcode op) { return is_cond_branch(op) || op == Opcode::JMP; }
bool is_store(Opcode op) { return op == Opcode::ST || op == Opcode::VST; }

bool writes_register(const Instruction& ins) {
  switch (ins.op) {
    case Opcode::ST:
    case Opcode::VST:
    case Opcode::BNZ:
    case Opcode::BZ:
    case Opcode::JMP:
    case Opcode::HALT:
      return false;
    default:
      return true;
  }
}

std::vector<uint8_t> source_registers(const Instruction& ins) {
  switch (ins.op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::CMP_EQ:
    case Opcode::CMP_LE:
    case Opcode::CMP_GE:
      return {ins.rs1, ins.rs2};
    case Opcode::ADDI:
    case Opcode::MOV:
    case Opcode::LD:
    case Opcode::BNZ:
    case Opcode::BZ:
      return {ins.rs1};
    case Opcode::ST:
      return {ins.rs1, ins.rs2};
    case Opcode::VST: {
      std::vector<uint8_t> regs{ins.rs1};
      for (uint8_t lane = 0; lane < ins.width; ++lane) regs.push_back(uint8_t(ins.rs2 + lane));
      return regs;
    }
    case Opcode::MOVI:
    case Opcode::JMP:
    case Opcode::HALT:
      return {};
  }
  return {};
}

MmioTarget mmio_decode(uint64_t addr, const MmioLayout& layout) {
  if (!layout.contains(addr)) return {};
  const uint64_t rel = addr - layout.base;
  const auto ch = static_cast<uint32_t>(rel / layout.channel_stride);
  const auto off = static_cast<uint32_t>(rel % layout.channel_stride);
  if (off >= layout.config_offset && off < layout.config_offset + layout.config_bytes) {
    return {MmioTarget::Kind::Config, ch, off - layout.config_offset};
  }
  if (off >= layout.outcomes_offset && off < layout.outcomes_offset + layout.outcome_slots) {
    return {MmioTarget::Kind::Outcome, ch, off - layout.outcomes_offset};
  }
  return {MmioTarget::Kind::Reserved, ch, off};
}

uint64_t ChannelConfig::encode() const {
  uint32_t end = end_pc & ~kPersistBit;
  if (persist) end |= kPersistBit;
  return uint64_t(target_pc) | (uint64_t(end) << 32);
}

ChannelConfig ChannelConfig::decode(uint64_t word) {
  ChannelConfig cfg;
  cfg.target_pc = static_cast<uint32_t>(word & 0xFFFFFFFFu);
  const auto end = static_cast<uint32_t>(word >> 32);
  cfg.persist = (end & kPersistBit) != 0;
  cfg.end_pc = end & ~kPersistBit;
  return cfg;
}

// ---------------------------------------------------------------------------
// MemoryImage

void MemoryImage::add(uint64_t addr, std::span<const uint8_t> bytes) {
  if (bytes.empty()) return;
  if (overlaps(addr, bytes.size())) {
    throw Error("memory segment at " + std::to_string(addr) + " overlaps an existing segment");
  }
  auto next = segs_.lower_bound(addr);
  // Merge with a segment that ends exactly at addr.
  if (next != segs_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second.size() == addr) {
      prev->second.insert(prev->second.end(), bytes.begin(), bytes.end());
      if (next != segs_.end() && prev->first + prev->second.size() == next->first) {
        prev->second.insert(prev->second.end(), next->second.begin(), next->second.end());
        segs_.erase(next);
      }
      return;
    }
  }
  std::vector<uint8_t> data(bytes.begin(), bytes.end());
  if (next != segs_.end() && addr + data.size() == next->first) {
    data.insert(data.end(), next->second.begin(), next->second.end());
    segs_.erase(next);
  }
  segs_.emplace(addr, std::move(data));
}

void MemoryImage::add_zero(uint64_t addr, uint64_t len) {
  std::vector<uint8_t> zeros(len, 0);
  add(addr, zeros);
}

void MemoryImage::add_words(uint64_t addr, std::span<const int64_t> words) {
  std::vector<uint8_t> bytes;
  bytes.reserve(words.size() * 8);
  for (int64_t w : words) {
    auto b = store_word(w);
    bytes.insert(bytes.end(), b.begin(), b.end());
  }
  add(addr, bytes);
}

const std::vector<uint8_t>* MemoryImage::find(uint64_t addr, uint64_t len, uint64_t* offset) const {
  auto it = segs_.upper_bound(addr);
  if (it == segs_.begin()) return nullptr;
  --it;
  const uint64_t off = addr - it->first;
  if (off + len > it->second.size() || off + len < off) return nullptr;
  *offset = off;
  return &it->second;
}

bool MemoryImage::contains(uint64_t addr, uint64_t len) const {
  uint64_t off = 0;
  return find(addr, len, &off) != nullptr;
}

bool MemoryImage::overlaps(uint64_t addr, uint64_t len) const {
  if (len == 0) return false;
  auto it = segs_.upper_bound(addr);
  if (it != segs_.begin()) {
    auto prev = std::prev(it);
    if (prev->first + prev->second.size() > addr) return true;
  }
  return it != segs_.end() && it->first < addr + len;
}

bool MemoryImage::read(uint64_t addr, std::span<uint8_t> out) const {
  uint64_t off = 0;
  const auto* seg = find(addr, out.size(), &off);
  if (seg == nullptr) return false;
  std::memcpy(out.data(), seg->data() + off, out.size());
  return true;
}

bool MemoryImage::write(uint64_t addr, std::span<const uint8_t> in) {
  auto it = segs_.upper_bound(addr);
  if (it == segs_.begin()) return false;
  --it;
  const uint64_t off = addr - it->first;
  if (off + in.size() > it->second.size()) return false;
  std::memcpy(it->second.data() + off, in.data(), in.size());
  return true;
}

uint64_t MemoryImage::size_bytes() const {
  uint64_t total = 0;
  for (const auto& [_, bytes] : segs_) total += bytes.size();
  return total;
}

int64_t load_word(std::span<const uint8_t, 8> bytes) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return static_cast<int64_t>(v);
}

std::array<uint8_t, 8> store_word(int64_t value) {
  std::array<uint8_t, 8> out{};
  auto v = static_cast<uint64_t>(value);
  for (auto& b : out) {
    b = static_cast<uint8_t>(v & 0xFF);
    v >>= 8;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Program

std::optional<uint32_t> Program::label_pc(std::string_view name) const {
  auto it = labels.find(std::string(name));
  if (it == labels.end()) return std::nullopt;
  return it->second;
}

void Program::validate() const {
  const auto n = static_cast<uint32_t>(code.size());
  if (n == 0) throw AsmError(0, "empty program");
  if (entry >= n) throw AsmError(0, "entry PC out of range");
  for (uint32_t pc = 0; pc < n; ++pc) {
    const auto& ins = code[pc];
    if (ins.rd >= kNumRegs || ins.rs1 >= kNumRegs || ins.rs2 >= kNumRegs) {
      throw AsmError(0, "register out of range at pc " + std::to_string(pc));
    }
    if (is_branch(ins.op) && ins.target >= n) {
      throw AsmError(0, "branch target out of range at pc " + std::to_string(pc));
    }
    if (ins.op == Opcode::VST) {
      if (ins.width != 4 && ins.width != 8 && ins.width != 16) {
        throw AsmError(0, "VST width must be 4, 8 or 16 at pc " + std::to_string(pc));
      }
      if (ins.rs2 + ins.width > kNumRegs) {
        throw AsmError(0, "VST lanes exceed register file at pc " + std::to_string(pc));
      }
    }
  }
  for (const auto& [name, pc] : labels) {
    if (pc > n) throw AsmError(0, "label " + name + " out of range");
  }
  if (memory.overlaps(mmio.base, mmio.end() - mmio.base)) {
    throw AsmError(0, "initial memory image overlaps the MMIO range");
  }
  for (const auto& [br, loads] : backslice_loads) {
    if (br >= n || !is_cond_branch(code[br].op)) throw AsmError(0, "backslice metadata on a non-branch");
    for (uint32_t ld : loads) {
      if (ld >= n || code[ld].op != Opcode::LD) throw AsmError(0, "backslice metadata names a non-load");
    }
  }
}

}  // namespace boss
