#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "boss/ir.hpp"

namespace boss {

/// A loop bound: either a constant or a loop-invariant register.
struct LoopBound {
  bool is_reg = false;
  uint8_t reg = 0;
  int64_t value = 0;

  static LoopBound constant(int64_t v) { return {false, 0, v}; }
  static LoopBound in_reg(uint8_t r) { return {true, r, 0}; }
  bool operator==(const LoopBound&) const = default;
};

/// Instruction in source form: branch targets and BOSS config words are
/// still symbolic.
struct SrcInstr {
  struct ConfigRef {
    std::string target;
    std::string end;
    bool persist = false;
    bool operator==(const ConfigRef&) const = default;
  };

  Instruction ins;
  std::string target_label;
  std::optional<ConfigRef> config;  // MOVI rd, config(Target, End[, persist])
  int line = 0;
  /// Parse-order identity of user-written instructions; 0 for inserted code.
  uint32_t id = 0;
};

struct SrcLabel {
  std::string name;
  int line = 0;
};

struct Node;

/// `for (k = start; k < end; k += step)` with a rotated, guarded lowering.
/// The back edge is a BZ on `CMP_GE k, end`.
struct StructuredLoop {
  uint8_t induction = 0;
  LoopBound start;
  LoopBound end;
  int64_t step = 1;
  std::vector<Node> body;
  std::string target_label;  // designated target branch, optional
  std::string end_label;     // designated End label, optional
  int line = 0;
};

/// `do { body } while (cond_reg != 0)` (or `== 0` when `while_nonzero` is false).
struct DoWhile {
  std::vector<Node> body;
  uint8_t cond_reg = 0;
  bool while_nonzero = true;
  int line = 0;
};

struct Node {
  std::variant<SrcInstr, SrcLabel, StructuredLoop, DoWhile> v;
};

struct SliceAnnotation {
  std::string branch;
  std::vector<std::string> loads;
};

/// Structured program: what `.bss` text parses into before lowering.
struct SourceProgram {
  std::vector<Node> body;
  MemoryImage memory;
  std::string entry_label;
  MmioLayout mmio;
  std::vector<SliceAnnotation> slices;
};

SourceProgram parse_source(std::string_view text);
/// Flattens loops, resolves labels and config references.
Program lower(const SourceProgram& src);

/// Lowered program plus, per PC, the SrcInstr::id it came from (0 for
/// loop control and inserted instrumentation).
struct Lowered {
  Program program;
  std::vector<uint32_t> origin;
};
Lowered lower_with_origin(const SourceProgram& src);
Program assemble(std::string_view text);

std::string disassemble(const Program& program);
std::string print_source(const SourceProgram& src);
std::string format_instruction(const Instruction& ins, std::string_view target_name);

/// Position of a designated target branch inside a loop body.
struct TargetSite {
  size_t label_index = 0;   // index of the SrcLabel node in `body`
  size_t instr_index = 0;   // index of the branch SrcInstr node in `body`
};

/// Locates `label` as a conditional branch directly in `loop.body`.
/// Throws AsmError when the branch is nested under other control flow
/// (inside an inner loop, or skipped by an earlier forward branch).
/// Returns nullopt if the label is not in this loop at all.
std::optional<TargetSite> find_target_site(const StructuredLoop& loop, std::string_view label);

/// Walks the tree looking for a label; returns true if found anywhere.
bool contains_label(const std::vector<Node>& body, std::string_view label);

/// Every register referenced anywhere in the source (operands, inductions, bounds).
std::vector<bool> used_registers(const SourceProgram& src);

}  // namespace boss
