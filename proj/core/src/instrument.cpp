#include "boss/instrument.hpp"

#include <algorithm>
#include <array>
#include <charconv>

namespace boss {

std::string_view instrument_error_name(InstrumentErrorCode c) {
  switch (c) {
    case InstrumentErrorCode::TargetNotFound: return "TargetNotFound";
    case InstrumentErrorCode::NotCanonical: return "NotCanonical";
    case InstrumentErrorCode::LoopCarriedDependence: return "LoopCarriedDependence";
    case InstrumentErrorCode::NestedTargetBranch: return "NestedTargetBranch";
    case InstrumentErrorCode::SliceEscapesLoop: return "SliceEscapesLoop";
    case InstrumentErrorCode::InvalidOptions: return "InvalidOptions";
    case InstrumentErrorCode::NoFreeRegisters: return "NoFreeRegisters";
  }
  return "?";
}

InstrumentError::InstrumentError(InstrumentErrorCode code, const std::string& msg)
    : Error(std::string(instrument_error_name(code)) + ": " + msg), code_(code) {}

std::optional<int64_t> Induction::trip_count() const {
  if (start.is_reg || end.is_reg) return std::nullopt;
  if (end.value <= start.value) return 0;
  return (end.value - start.value + step - 1) / step;
}

namespace {

[[noreturn]] void fail(InstrumentErrorCode code, const std::string& msg) { throw InstrumentError(code, msg); }

std::string reg_name(uint8_t r) { return "r" + std::to_string(r); }

/// True if anything in `body` (loop control included) may write `r`.
bool writes_reg(const std::vector<Node>& body, uint8_t r) {
  for (const auto& n : body) {
    if (const auto* si = std::get_if<SrcInstr>(&n.v)) {
      if (writes_register(si->ins) && si->ins.rd == r) return true;
    } else if (const auto* l = std::get_if<StructuredLoop>(&n.v)) {
      if (l->induction == r || r == kScratchReg || writes_reg(l->body, r)) return true;
    } else if (const auto* d = std::get_if<DoWhile>(&n.v)) {
      if (writes_reg(d->body, r)) return true;
    }
  }
  return false;
}

void collect_stores(const std::vector<Node>& body, std::vector<const Instruction*>& out) {
  for (const auto& n : body) {
    if (const auto* si = std::get_if<SrcInstr>(&n.v)) {
      if (is_store(si->ins.op)) out.push_back(&si->ins);
    } else if (const auto* l = std::get_if<StructuredLoop>(&n.v)) {
      collect_stores(l->body, out);
    } else if (const auto* d = std::get_if<DoWhile>(&n.v)) {
      collect_stores(d->body, out);
    }
  }
}

std::optional<TargetSite> site_or_throw(const StructuredLoop& loop, std::string_view target) {
  try {
    return find_target_site(loop, target);
  } catch (const AsmError& e) {
    const std::string msg = e.what();
    if (msg.find("nested") != std::string::npos) fail(InstrumentErrorCode::NestedTargetBranch, msg);
    fail(InstrumentErrorCode::NotCanonical, msg);
  }
}

/// Body indices of the slice instructions (program order) and the
/// registers left live-in. Throws SliceEscapesLoop when an inner loop
/// defines a needed register.
struct RawSlice {
  std::vector<size_t> picked;
  std::vector<bool> need;
};

RawSlice raw_slice(const StructuredLoop& loop, const TargetSite& site) {
  const auto& body = loop.body;
  const auto& br = std::get<SrcInstr>(body[site.instr_index].v);
  RawSlice rs;
  rs.need.assign(kNumRegs, false);
  rs.need[br.ins.rs1] = true;
  for (size_t i = site.label_index; i-- > 0;) {
    const auto& n = body[i];
    if (const auto* si = std::get_if<SrcInstr>(&n.v)) {
      if (!writes_register(si->ins) || !rs.need[si->ins.rd]) continue;
      rs.need[si->ins.rd] = false;
      for (auto r : source_registers(si->ins)) rs.need[r] = true;
      rs.picked.push_back(i);
    } else if (std::holds_alternative<StructuredLoop>(n.v) || std::holds_alternative<DoWhile>(n.v)) {
      const std::vector<Node> one{n};
      for (uint8_t r = 0; r < kNumRegs; ++r) {
        if (rs.need[r] && writes_reg(one, r)) {
          fail(InstrumentErrorCode::SliceEscapesLoop, reg_name(r) + " feeding the target is defined by an inner loop");
        }
      }
    }
  }
  std::reverse(rs.picked.begin(), rs.picked.end());
  return rs;
}

// Path from the root body down to the loop holding `target` directly.
struct PathStep {
  std::vector<Node>* body;
  size_t index;
};

bool direct_label(const std::vector<Node>& body, std::string_view target) {
  return std::any_of(body.begin(), body.end(), [&](const Node& n) {
    const auto* lab = std::get_if<SrcLabel>(&n.v);
    return lab && lab->name == target;
  });
}

bool locate(std::vector<Node>& body, std::string_view target, std::vector<PathStep>& path) {
  for (size_t i = 0; i < body.size(); ++i) {
    auto& n = body[i];
    path.push_back({&body, i});
    if (auto* l = std::get_if<StructuredLoop>(&n.v)) {
      if (direct_label(l->body, target)) {
        site_or_throw(*l, target);
        return true;
      }
      if (locate(l->body, target, path)) return true;
    } else if (auto* d = std::get_if<DoWhile>(&n.v)) {
      if (locate(d->body, target, path)) return true;
    }
    path.pop_back();
  }
  return false;
}

StructuredLoop& loop_at(const PathStep& s) { return std::get<StructuredLoop>((*s.body)[s.index].v); }

}  // namespace

Induction find_induction(const StructuredLoop& loop) {
  if (loop.step <= 0) fail(InstrumentErrorCode::NotCanonical, "loop step must be positive");
  if (writes_reg(loop.body, loop.induction)) {
    fail(InstrumentErrorCode::NotCanonical, "induction " + reg_name(loop.induction) + " is written in the loop body");
  }
  for (const auto* b : {&loop.start, &loop.end}) {
    if (b->is_reg && b->reg != loop.induction && writes_reg(loop.body, b->reg)) {
      fail(InstrumentErrorCode::NotCanonical, "loop bound " + reg_name(b->reg) + " is written in the loop body");
    }
  }
  return Induction{loop.induction, loop.start, loop.end, loop.step};
}

Backslice extract_backslice(const StructuredLoop& loop, std::string_view target) {
  const auto site = site_or_throw(loop, target);
  if (!site) fail(InstrumentErrorCode::TargetNotFound, "'" + std::string(target) + "' is not in this loop");
  const auto rs = raw_slice(loop, *site);
  const auto& br = std::get<SrcInstr>(loop.body[site->instr_index].v);

  Backslice out;
  out.cond_reg = br.ins.rs1;
  out.branch_op = br.ins.op;
  for (auto i : rs.picked) {
    const auto& si = std::get<SrcInstr>(loop.body[i].v);
    if (si.ins.op == Opcode::LD) out.loads.push_back(out.instrs.size());
    out.instrs.push_back(si);
  }
  for (uint8_t r = 0; r < kNumRegs; ++r) {
    if (!rs.need[r]) continue;
    out.live_ins.push_back(r);
    if (r == loop.induction) continue;
    if (r == kScratchReg) {
      fail(InstrumentErrorCode::LoopCarriedDependence, "slice reads the loop scratch register r31");
    }
    if (writes_reg(loop.body, r)) {
      fail(InstrumentErrorCode::LoopCarriedDependence, "live-in " + reg_name(r) + " is written inside the loop");
    }
  }

  // Slice-defined registers, for the alias rule below.
  std::vector<bool> defined(kNumRegs, false);
  for (const auto& si : out.instrs) defined[si.ins.rd] = true;
  std::vector<const Instruction*> stores;
  collect_stores(loop.body, stores);
  for (auto li : out.loads) {
    const auto& ld = out.instrs[li].ins;
    const bool invariant_base = ld.rs1 != loop.induction && !defined[ld.rs1];
    for (const auto* st : stores) {
      const int64_t len = st->op == Opcode::ST ? 8 : st->width;
      const bool disjoint = invariant_base && st->rs1 == ld.rs1 &&
                            (st->imm + len <= ld.imm || ld.imm + 8 <= st->imm);
      if (!disjoint) {
        fail(InstrumentErrorCode::LoopCarriedDependence,
             "store " + format_instruction(*st, "") + " may alias slice load " + format_instruction(ld, ""));
      }
    }
  }
  return out;
}

const StructuredLoop* find_target_loop(const SourceProgram& src, std::string_view target) {
  auto& body = const_cast<std::vector<Node>&>(src.body);
  std::vector<PathStep> path;
  if (!locate(body, target, path)) return nullptr;
  return &loop_at(path.back());
}

void annotate_backslice(SourceProgram& src, std::string_view target) {
  for (const auto& s : src.slices) {
    if (s.branch == target) return;
  }
  std::vector<PathStep> path;
  try {
    if (!locate(src.body, target, path)) return;
    auto& loop = loop_at(path.back());
    const auto site = find_target_site(loop, target);
    const auto rs = raw_slice(loop, *site);
    SliceAnnotation ann;
    ann.branch = std::string(target);
    std::vector<size_t> loads;
    for (auto i : rs.picked) {
      if (std::get<SrcInstr>(loop.body[i].v).ins.op == Opcode::LD) loads.push_back(i);
    }
    // Insert from the back so earlier indices stay valid.
    for (size_t k = loads.size(); k-- > 0;) {
      std::string name = "__slice_" + std::string(target) + "_" + std::to_string(k);
      loop.body.insert(loop.body.begin() + static_cast<std::ptrdiff_t>(loads[k]), Node{SrcLabel{name, 0}});
      ann.loads.insert(ann.loads.begin(), name);
    }
    if (!ann.loads.empty()) src.slices.push_back(std::move(ann));
  } catch (const Error&) {
    // Unsliceable targets simply get no metadata.
  }
}

void parse_variant(std::string_view text, InstrumentOptions& out) {
  InstrumentOptions opts = out;
  auto number = [&](std::string_view s) {
    uint32_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      fail(InstrumentErrorCode::InvalidOptions, "bad variant '" + std::string(text) + "'");
    }
    return v;
  };
  if (text == "plain" || text == "loop") {
    opts.variant = Variant::Plain;
    opts.factor = 1;
  } else if (text.rfind("unroll:", 0) == 0) {
    opts.variant = Variant::Unrolled;
    opts.factor = number(text.substr(7));
  } else if (text.rfind("vec:", 0) == 0) {
    opts.variant = Variant::Vectorized;
    opts.factor = number(text.substr(4));
  } else {
    fail(InstrumentErrorCode::InvalidOptions, "unknown variant '" + std::string(text) + "'");
  }
  out = opts;
}

std::string variant_text(const InstrumentOptions& opts) {
  switch (opts.variant) {
    case Variant::Plain: return "plain";
    case Variant::Unrolled: return "unroll:" + std::to_string(opts.factor);
    case Variant::Vectorized: return "vec:" + std::to_string(opts.factor);
  }
  return "?";
}

namespace {

class RegPool {
 public:
  explicit RegPool(std::vector<bool> used) : used_(std::move(used)) { used_[kScratchReg] = true; }

  uint8_t take() {
    for (uint8_t r = 0; r < kNumRegs; ++r) {
      if (!used_[r]) {
        used_[r] = true;
        return r;
      }
    }
    fail(InstrumentErrorCode::NoFreeRegisters, "out of free registers");
  }

  void release(uint8_t r) { used_[r] = false; }

  uint8_t take_run(uint32_t n) {
    for (uint32_t r = 0; r + n <= kNumRegs; ++r) {
      bool ok = true;
      for (uint32_t j = 0; j < n && ok; ++j) ok = !used_[r + j];
      if (!ok) continue;
      for (uint32_t j = 0; j < n; ++j) used_[r + j] = true;
      return static_cast<uint8_t>(r);
    }
    fail(InstrumentErrorCode::NoFreeRegisters, "no " + std::to_string(n) + " consecutive free registers for vector lanes");
  }

 private:
  std::vector<bool> used_;
};

Node instr(Opcode op, uint8_t rd, uint8_t rs1 = 0, uint8_t rs2 = 0, int64_t imm = 0, uint8_t width = 0) {
  SrcInstr si;
  si.ins = Instruction{op, rd, rs1, rs2, imm};
  si.ins.width = width;
  return Node{std::move(si)};
}

bool uses_rs1(Opcode op) { return op != Opcode::MOVI && op != Opcode::JMP && op != Opcode::HALT; }
bool uses_rs2(Opcode op) {
  switch (op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::CMP_EQ:
    case Opcode::CMP_LE:
    case Opcode::CMP_GE:
    case Opcode::ST:
    case Opcode::VST: return true;
    default: return false;
  }
}
bool is_compare(Opcode op) { return op == Opcode::CMP_EQ || op == Opcode::CMP_LE || op == Opcode::CMP_GE; }

struct PreexecBuilder {
  const Backslice& slice;
  const Induction& ind;
  RegPool& pool;
  std::array<int, kNumRegs> fresh{};  // original reg -> temp, -1 if none
  int zero = -1;

  PreexecBuilder(const Backslice& s, const Induction& i, RegPool& p) : slice(s), ind(i), pool(p) { fresh.fill(-1); }

  bool needs_zero() const {
    const bool cmp = !slice.instrs.empty() && is_compare(slice.instrs.back().ins.op);
    return !(cmp && slice.branch_op == Opcode::BNZ);
  }

  uint8_t temp_for(uint8_t r) {
    if (fresh[r] < 0) fresh[r] = pool.take();
    return static_cast<uint8_t>(fresh[r]);
  }

  // Slice for induction value `iv`; the 0/1 taken flag lands in `dst`.
  void emit(std::vector<Node>& out, uint8_t iv, uint8_t dst) {
    std::array<uint8_t, kNumRegs> map{};
    for (uint8_t r = 0; r < kNumRegs; ++r) map[r] = r;
    map[ind.reg] = iv;
    for (const auto& si : slice.instrs) {
      Instruction ins = si.ins;
      if (uses_rs1(ins.op)) ins.rs1 = map[ins.rs1];
      if (uses_rs2(ins.op)) ins.rs2 = map[ins.rs2];
      const uint8_t t = temp_for(ins.rd);
      map[ins.rd] = t;
      ins.rd = t;
      SrcInstr copy;
      copy.ins = ins;
      out.push_back(Node{std::move(copy)});
    }
    const uint8_t v = map[slice.cond_reg];
    const bool cmp = !slice.instrs.empty() && is_compare(slice.instrs.back().ins.op);
    const auto z = static_cast<uint8_t>(zero);
    if (cmp && slice.branch_op == Opcode::BNZ) {
      std::get<SrcInstr>(out.back().v).ins.rd = dst;
    } else if (slice.branch_op == Opcode::BZ) {
      out.push_back(instr(Opcode::CMP_EQ, dst, v, z));
    } else {
      const uint8_t t = temp_for(kScratchReg);
      out.push_back(instr(Opcode::CMP_EQ, t, v, z));
      out.push_back(instr(Opcode::CMP_EQ, dst, t, z));
    }
  }
};

LoopBound bound_reg_or_const(std::vector<Node>& out, const LoopBound& b, int64_t add, RegPool& pool) {
  if (!b.is_reg) return LoopBound::constant(b.value + add);
  if (add == 0) return b;
  const uint8_t r = pool.take();
  out.push_back(instr(Opcode::ADDI, r, b.reg, 0, add));
  return LoopBound::in_reg(r);
}

uint8_t materialize(std::vector<Node>& out, const LoopBound& b, RegPool& pool) {
  if (b.is_reg) return b.reg;
  const uint8_t r = pool.take();
  out.push_back(instr(Opcode::MOVI, r, 0, 0, b.value));
  return r;
}

// dst = min(a, b) without branches.
void emit_min(std::vector<Node>& out, uint8_t dst, uint8_t a, uint8_t b, RegPool& pool) {
  const uint8_t t = pool.take();
  const uint8_t d = pool.take();
  out.push_back(instr(Opcode::CMP_GE, t, a, b));
  out.push_back(instr(Opcode::SUB, d, b, a));
  out.push_back(instr(Opcode::MUL, d, d, t));
  out.push_back(instr(Opcode::ADD, dst, a, d));
}

Node make_loop(uint8_t k, LoopBound start, LoopBound end, int64_t step, std::vector<Node> body) {
  StructuredLoop l;
  l.induction = k;
  l.start = start;
  l.end = end;
  l.step = step;
  l.body = std::move(body);
  return Node{std::move(l)};
}

std::vector<Node> build_preexec(const Backslice& slice, const Induction& ind, const InstrumentOptions& opts,
                                const MmioLayout& mmio, RegPool& pool) {
  std::vector<Node> out;
  PreexecBuilder b(slice, ind, pool);
  if (b.needs_zero()) {
    b.zero = pool.take();
    out.push_back(instr(Opcode::MOVI, static_cast<uint8_t>(b.zero), 0, 0, 0));
  }
  const int64_t n = opts.range ? opts.range->first : 0;
  const uint8_t ptr = pool.take();
  out.push_back(instr(Opcode::MOVI, ptr, 0, 0, static_cast<int64_t>(mmio.outcome_address(opts.channel, uint32_t(n)))));

  const int64_t s = ind.step;
  LoopBound start = bound_reg_or_const(out, ind.start, n * s, pool);
  LoopBound end = ind.end;
  if (opts.range) {
    const int64_t span = (opts.range->second + 1) * s;
    if (!ind.start.is_reg && !ind.end.is_reg) {
      end = LoopBound::constant(std::min(ind.end.value, ind.start.value + span));
    } else {
      const LoopBound cap = bound_reg_or_const(out, ind.start, span, pool);
      const uint8_t capr = materialize(out, cap, pool);
      const uint8_t endr = materialize(out, ind.end, pool);
      const uint8_t m = pool.take();
      emit_min(out, m, capr, endr, pool);
      end = LoopBound::in_reg(m);
    }
  }

  const uint8_t k = pool.take();
  auto scalar_body = [&]() {
    std::vector<Node> body;
    const uint8_t v = b.temp_for(slice.cond_reg);
    b.emit(body, k, v);
    body.push_back(instr(Opcode::ST, 0, ptr, v, 0));
    body.push_back(instr(Opcode::ADDI, ptr, ptr, 0, 1));
    return body;
  };

  if (opts.variant == Variant::Plain || opts.factor <= 1) {
    out.push_back(make_loop(k, start, end, s, scalar_body()));
    return out;
  }

  const uint32_t f = opts.factor;
  const LoopBound main_end = bound_reg_or_const(out, end, -int64_t(f - 1) * s, pool);
  std::vector<Node> body;
  const uint8_t iv = pool.take();
  auto lane_iv = [&](std::vector<Node>& dst, uint32_t j) {
    if (j == 0) return k;
    dst.push_back(instr(Opcode::ADDI, iv, k, 0, int64_t(j) * s));
    return iv;
  };
  if (opts.variant == Variant::Unrolled) {
    const uint8_t v = b.temp_for(slice.cond_reg);
    for (uint32_t j = 0; j < f; ++j) {
      const uint8_t x = lane_iv(body, j);
      b.emit(body, x, v);
      body.push_back(instr(Opcode::ST, 0, ptr, v, int64_t(j)));
    }
  } else {
    const uint8_t lane0 = pool.take_run(f);
    for (uint32_t j = 0; j < f; ++j) {
      const uint8_t x = lane_iv(body, j);
      b.emit(body, x, static_cast<uint8_t>(lane0 + j));
    }
    body.push_back(instr(Opcode::VST, 0, ptr, lane0, 0, static_cast<uint8_t>(f)));
  }
  body.push_back(instr(Opcode::ADDI, ptr, ptr, 0, int64_t(f)));
  out.push_back(make_loop(k, start, main_end, int64_t(f) * s, std::move(body)));
  out.push_back(make_loop(k, LoopBound::in_reg(k), end, s, scalar_body()));
  return out;
}

std::string fresh_label(const SourceProgram& src, const std::string& stem) {
  for (int i = 0;; ++i) {
    std::string name = stem + std::to_string(i);
    if (!contains_label(src.body, name)) return name;
  }
}

void validate_options(const InstrumentOptions& o, const MmioLayout& mmio) {
  if (o.channel >= mmio.channels) {
    fail(InstrumentErrorCode::InvalidOptions, "channel " + std::to_string(o.channel) + " out of range");
  }
  if (o.variant == Variant::Unrolled && (o.factor < 2 || o.factor > 64)) {
    fail(InstrumentErrorCode::InvalidOptions, "unroll factor must be in 2..64");
  }
  if (o.variant == Variant::Vectorized && o.factor != 4 && o.factor != 8 && o.factor != 16) {
    fail(InstrumentErrorCode::InvalidOptions, "vector width must be 4, 8 or 16");
  }
  if (o.range && (o.range->first < 0 || o.range->first > o.range->second)) {
    fail(InstrumentErrorCode::InvalidOptions, "coverage range needs 0 <= n <= m");
  }
  if (o.strip_cap == 0 || o.strip_cap > 256) {
    fail(InstrumentErrorCode::InvalidOptions, "strip-mine cap must be in 1..256");
  }
}

// Rewrites the loop at path.back() into a chunk loop around an inner loop
// of at most `cap` iterations. Returns the chunk End label.
std::string strip_mine(SourceProgram& src, std::vector<PathStep>& path, Induction& ind, uint32_t cap,
                       RegPool& pool) {
  auto& parent = *path.back().body;
  const size_t idx = path.back().index;
  StructuredLoop inner = std::get<StructuredLoop>(parent[idx].v);
  const std::string chunk_end = fresh_label(src, "__chunk_end");
  const int64_t chunk = int64_t(cap) * ind.step;

  const uint8_t c = pool.take();
  const uint8_t ce = pool.take();
  std::vector<Node> chunk_body;
  chunk_body.push_back(instr(Opcode::ADDI, ce, c, 0, chunk));
  const uint8_t endr = materialize(chunk_body, ind.end, pool);
  emit_min(chunk_body, ce, ce, endr, pool);
  inner.start = LoopBound::in_reg(c);
  inner.end = LoopBound::in_reg(ce);
  chunk_body.push_back(Node{std::move(inner)});
  chunk_body.push_back(Node{SrcLabel{chunk_end, 0}});

  std::vector<Node> replacement;
  if (ind.start.is_reg) {
    if (ind.start.reg != ind.reg) replacement.push_back(instr(Opcode::MOV, ind.reg, ind.start.reg));
  } else {
    replacement.push_back(instr(Opcode::MOVI, ind.reg, 0, 0, ind.start.value));
  }
  replacement.push_back(make_loop(c, ind.start, ind.end, chunk, std::move(chunk_body)));

  parent.erase(parent.begin() + static_cast<std::ptrdiff_t>(idx));
  parent.insert(parent.begin() + static_cast<std::ptrdiff_t>(idx), replacement.begin(), replacement.end());
  auto& outer = std::get<StructuredLoop>(parent[idx + replacement.size() - 1].v);
  path.back().index = idx + replacement.size() - 1;
  const size_t inner_idx = outer.body.size() - 2;
  path.push_back({&outer.body, inner_idx});
  ind.start = LoopBound::in_reg(c);
  ind.end = LoopBound::in_reg(ce);
  return chunk_end;
}

void transform(SourceProgram& out, std::string_view target, const InstrumentOptions& opts,
               std::vector<std::string>& warnings) {
  validate_options(opts, out.mmio);
  annotate_backslice(out, target);

  std::vector<PathStep> path;
  if (!locate(out.body, target, path)) {
    if (contains_label(out.body, target)) {
      fail(InstrumentErrorCode::NotCanonical, "'" + std::string(target) + "' is not directly inside a counted loop");
    }
    fail(InstrumentErrorCode::TargetNotFound, "no target branch '" + std::string(target) + "'");
  }
  Induction ind = find_induction(loop_at(path.back()));
  const Backslice slice = extract_backslice(loop_at(path.back()), target);

  InstrumentOptions o = opts;
  const auto trip = ind.trip_count();
  const bool strip = !trip || *trip > int64_t(o.strip_cap);
  if (strip && o.range) {
    fail(InstrumentErrorCode::InvalidOptions, "coverage ranges need a static trip count of at most the strip cap");
  }
  if (o.range && *trip > 0 && o.range->second >= *trip) {
    warnings.push_back("coverage range clamped to trip count " + std::to_string(*trip));
    o.range->second = *trip - 1;
  }
  if (o.range && o.range->first > o.range->second) {
    fail(InstrumentErrorCode::InvalidOptions, "coverage range starts beyond the trip count");
  }

  RegPool pool(used_registers(out));
  std::string end_label;
  if (strip) {
    if (!loop_at(path.back()).end_label.empty()) {
      fail(InstrumentErrorCode::InvalidOptions, "cannot strip-mine a loop with an explicit End label");
    }
    end_label = strip_mine(out, path, ind, o.strip_cap, pool);
  } else {
    auto& parent = *path.back().body;
    const size_t idx = path.back().index;
    end_label = loop_at(path.back()).end_label;
    if (end_label.empty() && idx + 1 < parent.size()) {
      if (const auto* lab = std::get_if<SrcLabel>(&parent[idx + 1].v)) end_label = lab->name;
    }
    if (end_label.empty()) {
      end_label = fresh_label(out, "__boss_end");
      parent.insert(parent.begin() + static_cast<std::ptrdiff_t>(idx + 1), Node{SrcLabel{end_label, 0}});
    }
  }

  // Pre-execute block, hoisted as far up the parent body as it stays legal.
  std::vector<bool> pinned(kNumRegs, false);
  for (auto r : slice.live_ins) {
    if (r != ind.reg) pinned[r] = true;
  }
  if (ind.start.is_reg) pinned[ind.start.reg] = true;
  if (ind.end.is_reg) pinned[ind.end.reg] = true;
  // The open sequence runs once before the pre-execute block, so its two
  // registers are free again afterwards.
  const uint8_t cfg = pool.take();
  const uint8_t addr = pool.take();
  pool.release(cfg);
  pool.release(addr);
  auto block = build_preexec(slice, ind, o, out.mmio, pool);
  auto& parent = *path.back().body;
  size_t pos = path.back().index;
  if (o.placement == Placement::Earliest) {
    while (pos > 0) {
      const auto* si = std::get_if<SrcInstr>(&parent[pos - 1].v);
      if (!si || is_branch(si->ins.op) || is_store(si->ins.op) || si->ins.op == Opcode::HALT) break;
      if (writes_register(si->ins) && (pinned[si->ins.rd] || si->ins.rd == kScratchReg)) break;
      --pos;
    }
  }
  parent.insert(parent.begin() + static_cast<std::ptrdiff_t>(pos), block.begin(), block.end());

  // BOSS_open once, ahead of the outermost enclosing structure.
  size_t top = 0;
  {
    std::vector<PathStep> p2;
    locate(out.body, target, p2);
    top = p2.front().index;
    if (path.size() == 1) top = pos;  // target loop is top level
  }
  while (top > 0 && std::holds_alternative<SrcLabel>(out.body[top - 1].v)) --top;
  SrcInstr movcfg;
  movcfg.ins = Instruction{Opcode::MOVI, cfg};
  movcfg.config = SrcInstr::ConfigRef{std::string(target), end_label, false};
  std::vector<Node> open{Node{std::move(movcfg)},
                         instr(Opcode::MOVI, addr, 0, 0, static_cast<int64_t>(out.mmio.config_address(o.channel))),
                         instr(Opcode::ST, 0, addr, cfg, 0)};
  out.body.insert(out.body.begin() + static_cast<std::ptrdiff_t>(top), open.begin(), open.end());
}

}  // namespace

InstrumentResult instrument(const SourceProgram& src, std::string_view target, const InstrumentOptions& opts) {
  InstrumentResult r;
  r.source = src;
  try {
    transform(r.source, target, opts, r.warnings);
    r.program = lower(r.source);
    r.ok = true;
  } catch (const InstrumentError& e) {
    r.code = e.code();
    r.diagnostic = e.what();
  } catch (const Error& e) {
    r.code = InstrumentErrorCode::NotCanonical;
    r.diagnostic = e.what();
  }
  if (!r.ok) {
    r.source = src;
    try {
      r.program = lower(src);
    } catch (const Error&) {
      r.program = Program{};
    }
  }
  return r;
}

}  // namespace boss
