#include "boss/exec.hpp"

#include <ostream>

#include "boss/error.hpp"

namespace boss {

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Branch: return "branch";
    case EventKind::Load: return "load";
    case EventKind::Store: return "store";
    case EventKind::BossConfigStore: return "boss_config_store";
    case EventKind::BossOutcomeStore: return "boss_outcome_store";
    case EventKind::Other: return "other";
    case EventKind::Fault: return "fault";
  }
  return "?";
}

DynTrace execute(const Program& program, uint64_t step_limit) {
  if (step_limit == 0) throw Error("step limit must be positive");
  DynTrace t;
  t.memory = program.memory;
  auto& r = t.regs;
  const auto& code = program.code;
  const auto& mmio = program.mmio;
  uint32_t pc = program.entry;

  auto fault = [&](uint64_t addr) {
    t.events.push_back(DynEvent{t.events.size(), pc, EventKind::Fault, addr});
    t.faulted = true;
  };

  while (t.events.size() < step_limit) {
    if (pc >= code.size()) {
      fault(0);
      break;
    }
    const Instruction& ins = code[pc];
    DynEvent ev{t.events.size(), pc, EventKind::Other};
    uint32_t next = pc + 1;
    bool stop = false;

    switch (ins.op) {
      case Opcode::ADD: r[ins.rd] = r[ins.rs1] + r[ins.rs2]; break;
      case Opcode::SUB: r[ins.rd] = r[ins.rs1] - r[ins.rs2]; break;
      case Opcode::MUL: r[ins.rd] = r[ins.rs1] * r[ins.rs2]; break;
      case Opcode::ADDI: r[ins.rd] = r[ins.rs1] + ins.imm; break;
      case Opcode::MOVI: r[ins.rd] = ins.imm; break;
      case Opcode::MOV: r[ins.rd] = r[ins.rs1]; break;
      case Opcode::CMP_EQ: r[ins.rd] = r[ins.rs1] == r[ins.rs2]; break;
      case Opcode::CMP_LE: r[ins.rd] = r[ins.rs1] <= r[ins.rs2]; break;
      case Opcode::CMP_GE: r[ins.rd] = r[ins.rs1] >= r[ins.rs2]; break;
      case Opcode::AND: r[ins.rd] = r[ins.rs1] & r[ins.rs2]; break;
      case Opcode::OR: r[ins.rd] = r[ins.rs1] | r[ins.rs2]; break;
      case Opcode::LD: {
        const auto addr = static_cast<uint64_t>(r[ins.rs1] + ins.imm);
        ev.kind = EventKind::Load;
        ev.addr = addr;
        if (mmio.contains(addr)) {
          // Read-back of BOSS state is not modeled.
          r[ins.rd] = 0;
          break;
        }
        std::array<uint8_t, 8> buf{};
        if (!t.memory.read(addr, buf)) {
          fault(addr);
          stop = true;
          break;
        }
        r[ins.rd] = load_word(buf);
        break;
      }
      case Opcode::ST:
      case Opcode::VST: {
        const auto addr = static_cast<uint64_t>(r[ins.rs1] + ins.imm);
        ev.addr = addr;
        const unsigned len = ins.op == Opcode::ST ? 8 : ins.width;
        if (mmio.contains(addr) || mmio.contains(addr + len - 1)) {
          auto head = mmio_decode(addr, mmio);
          if (head.kind == MmioTarget::Kind::Config && head.slot == 0 && ins.op == Opcode::ST) {
            ev.kind = EventKind::BossConfigStore;
            ev.value = static_cast<uint64_t>(r[ins.rs2]);
            break;
          }
          if (head.kind == MmioTarget::Kind::Outcome) {
            if (ins.op == Opcode::ST) {
              // Outcome-region scalar stores land one byte in one slot.
              ev.kind = EventKind::BossOutcomeStore;
              ev.lanes = 1;
              ev.value = (r[ins.rs2] & 0xFF) != 0 ? 1 : 0;
              break;
            }
            auto tail = mmio_decode(addr + len - 1, mmio);
            if (tail.kind == MmioTarget::Kind::Outcome && tail.channel == head.channel) {
              ev.kind = EventKind::BossOutcomeStore;
              ev.lanes = ins.width;
              for (unsigned lane = 0; lane < ins.width; ++lane) {
                if ((r[ins.rs2 + lane] & 0xFF) != 0) ev.value |= uint64_t(1) << lane;
              }
              break;
            }
          }
          fault(addr);
          stop = true;
          break;
        }
        ev.kind = EventKind::Store;
        bool ok = false;
        if (ins.op == Opcode::ST) {
          ok = t.memory.write(addr, store_word(r[ins.rs2]));
        } else {
          std::array<uint8_t, 16> bytes{};
          for (unsigned lane = 0; lane < ins.width; ++lane) bytes[lane] = static_cast<uint8_t>(r[ins.rs2 + lane]);
          ok = t.memory.write(addr, std::span<const uint8_t>(bytes.data(), ins.width));
        }
        if (!ok) {
          fault(addr);
          stop = true;
        }
        break;
      }
      case Opcode::BNZ:
      case Opcode::BZ: {
        const bool nz = r[ins.rs1] != 0;
        ev.kind = EventKind::Branch;
        ev.taken = ins.op == Opcode::BNZ ? nz : !nz;
        if (ev.taken) next = ins.target;
        break;
      }
      case Opcode::JMP:
        ev.kind = EventKind::Branch;
        ev.taken = true;
        next = ins.target;
        break;
      case Opcode::HALT:
        t.halted = true;
        stop = true;
        break;
    }
    if (t.faulted) break;
    t.events.push_back(ev);
    if (stop) break;
    pc = next;
  }
  t.truncated = !t.halted && !t.faulted;
  t.instruction_count = t.events.size();
  return t;
}

std::vector<bool> branch_profile(const DynTrace& trace, const Program& program, uint32_t pc) {
  if (pc >= program.code.size() || !is_branch(program.code[pc].op)) {
    throw Error("pc " + std::to_string(pc) + " is not a branch");
  }
  std::vector<bool> out;
  for (const auto& e : trace.events) {
    if (e.pc == pc && e.kind == EventKind::Branch) out.push_back(e.taken);
  }
  return out;
}

double adjacent_generation_agreement(const std::vector<bool>& profile, size_t generation_length) {
  if (generation_length == 0 || profile.size() <= generation_length) return 0.0;
  size_t same = 0;
  for (size_t i = generation_length; i < profile.size(); ++i) same += profile[i] == profile[i - generation_length];
  return double(same) / double(profile.size() - generation_length);
}

void write_trace(std::ostream& os, const DynTrace& trace) {
  for (const auto& e : trace.events) {
    os << e.seq << '\t' << e.pc << '\t' << event_kind_name(e.kind) << '\t' << e.addr << '\t';
    if (e.kind == EventKind::Branch) {
      os << (e.taken ? 'T' : 'N');
    } else {
      os << '-';
    }
    os << '\n';
  }
}

std::vector<DynEvent> strip_boss_events(const std::vector<DynEvent>& events) {
  std::vector<DynEvent> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    if (e.kind == EventKind::BossConfigStore || e.kind == EventKind::BossOutcomeStore) continue;
    out.push_back(e);
    out.back().seq = out.size() - 1;
  }
  return out;
}

}  // namespace boss
