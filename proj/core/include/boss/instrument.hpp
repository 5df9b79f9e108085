#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "boss/assembler.hpp"
#include "boss/error.hpp"

namespace boss {

enum class InstrumentErrorCode : uint8_t {
  TargetNotFound,
  NotCanonical,
  LoopCarriedDependence,
  NestedTargetBranch,
  SliceEscapesLoop,
  InvalidOptions,
  NoFreeRegisters,
};

std::string_view instrument_error_name(InstrumentErrorCode c);

class InstrumentError : public Error {
 public:
  InstrumentError(InstrumentErrorCode code, const std::string& msg);
  InstrumentErrorCode code() const { return code_; }

 private:
  InstrumentErrorCode code_;
};

struct Induction {
  uint8_t reg = 0;
  LoopBound start;
  LoopBound end;
  int64_t step = 1;

  /// Known only when both bounds are constants.
  std::optional<int64_t> trip_count() const;
};

/// Throws InstrumentError(NotCanonical) when the body writes the induction
/// register or a register bound.
Induction find_induction(const StructuredLoop& loop);

struct Backslice {
  std::vector<SrcInstr> instrs;  // program order; last one defines cond_reg
  std::vector<uint8_t> live_ins;
  std::vector<size_t> loads;     // indices into instrs
  uint8_t cond_reg = 0;
  Opcode branch_op = Opcode::BNZ;
};

/// Backward dataflow from the branch labelled `target` inside `loop`.
Backslice extract_backslice(const StructuredLoop& loop, std::string_view target);

enum class Variant : uint8_t { Plain, Unrolled, Vectorized };
enum class Placement : uint8_t { Earliest, Adjacent };

struct InstrumentOptions {
  uint32_t channel = 0;
  Variant variant = Variant::Plain;
  uint32_t factor = 1;  // unroll factor or vector width
  std::optional<std::pair<int64_t, int64_t>> range;  // inclusive iteration indices
  uint32_t strip_cap = 256;
  Placement placement = Placement::Earliest;
};

/// "plain", "unroll:N", "vec:W".
void parse_variant(std::string_view text, InstrumentOptions& opts);
std::string variant_text(const InstrumentOptions& opts);

struct InstrumentResult {
  bool ok = false;
  SourceProgram source;
  Program program;
  std::string diagnostic;
  std::optional<InstrumentErrorCode> code;
  std::vector<std::string> warnings;
};

/// On failure the original program comes back unchanged with a diagnostic.
InstrumentResult instrument(const SourceProgram& src, std::string_view target, const InstrumentOptions& opts);

/// Labels the slice loads of `target` and records them as `.slice`
/// metadata. No-op if already annotated.
void annotate_backslice(SourceProgram& src, std::string_view target);

/// Loop whose direct body holds the branch labelled `target`.
const StructuredLoop* find_target_loop(const SourceProgram& src, std::string_view target);

}  // namespace boss
