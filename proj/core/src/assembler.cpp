#include "boss/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "boss/error.hpp"

namespace boss {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_ident(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

/// Splits on commas that are not inside parentheses or brackets.
std::vector<std::string_view> split_operands(std::string_view s) {
  std::vector<std::string_view> out;
  int depth = 0;
  size_t start = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(' || s[i] == '[') ++depth;
    if (s[i] == ')' || s[i] == ']') --depth;
    if (s[i] == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  auto last = trim(s.substr(start));
  if (!last.empty() || !out.empty()) out.push_back(last);
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<int64_t> try_int(std::string_view s) {
  s = trim(s);
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  auto r = static_cast<int64_t>(v);
  return neg ? -r : r;
}

int64_t parse_int(std::string_view s, int line) {
  auto v = try_int(s);
  if (!v) throw AsmError(line, "malformed immediate '" + std::string(s) + "'");
  return *v;
}

std::optional<uint8_t> try_reg(std::string_view s, int line) {
  s = trim(s);
  if (s.size() < 2 || (s[0] != 'r' && s[0] != 'R')) return std::nullopt;
  unsigned v = 0;
  auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  if (v >= kNumRegs) throw AsmError(line, "register out of range '" + std::string(s) + "'");
  return static_cast<uint8_t>(v);
}

uint8_t parse_reg(std::string_view s, int line) {
  auto r = try_reg(s, line);
  if (!r) throw AsmError(line, "malformed register operand '" + std::string(s) + "'");
  return *r;
}

/// `[rN+imm]`, `[rN-imm]` or `[rN]`.
std::pair<uint8_t, int64_t> parse_mem(std::string_view s, int line) {
  s = trim(s);
  if (s.size() < 3 || s.front() != '[' || s.back() != ']') {
    throw AsmError(line, "malformed memory operand '" + std::string(s) + "'");
  }
  auto inner = trim(s.substr(1, s.size() - 2));
  size_t pos = inner.find_first_of("+-");
  if (pos == std::string_view::npos) return {parse_reg(inner, line), 0};
  uint8_t base = parse_reg(inner.substr(0, pos), line);
  int64_t off = parse_int(inner.substr(pos + 1), line);
  return {base, inner[pos] == '-' ? -off : off};
}

void expect_count(const std::vector<std::string_view>& ops, size_t n, std::string_view op, int line) {
  if (ops.size() != n) {
    throw AsmError(line, std::string(op) + " expects " + std::to_string(n) + " operands, got " +
                             std::to_string(ops.size()));
  }
}

SrcInstr parse_instruction(std::string_view mnemonic, std::string_view rest, int line) {
  std::string upper(mnemonic);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  auto op = parse_opcode(upper);
  if (!op) throw AsmError(line, "unknown opcode '" + std::string(mnemonic) + "'");
  auto ops = split_operands(rest);
  SrcInstr si;
  si.line = line;
  Instruction& ins = si.ins;
  ins.op = *op;
  switch (*op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::CMP_EQ:
    case Opcode::CMP_LE:
    case Opcode::CMP_GE:
      expect_count(ops, 3, upper, line);
      ins.rd = parse_reg(ops[0], line);
      ins.rs1 = parse_reg(ops[1], line);
      ins.rs2 = parse_reg(ops[2], line);
      break;
    case Opcode::ADDI:
      expect_count(ops, 3, upper, line);
      ins.rd = parse_reg(ops[0], line);
      ins.rs1 = parse_reg(ops[1], line);
      ins.imm = parse_int(ops[2], line);
      break;
    case Opcode::MOVI: {
      expect_count(ops, 2, upper, line);
      ins.rd = parse_reg(ops[0], line);
      auto v = trim(ops[1]);
      if (v.rfind("config(", 0) == 0 && v.back() == ')') {
        auto args = split_operands(v.substr(7, v.size() - 8));
        if (args.size() < 2 || args.size() > 3 || !is_ident(args[0]) || !is_ident(args[1])) {
          throw AsmError(line, "config() expects (TargetLabel, EndLabel[, persist])");
        }
        SrcInstr::ConfigRef ref{std::string(args[0]), std::string(args[1]), false};
        if (args.size() == 3) {
          if (args[2] != "persist") throw AsmError(line, "unknown config flag '" + std::string(args[2]) + "'");
          ref.persist = true;
        }
        si.config = std::move(ref);
      } else {
        ins.imm = parse_int(v, line);
      }
      break;
    }
    case Opcode::MOV:
      expect_count(ops, 2, upper, line);
      ins.rd = parse_reg(ops[0], line);
      ins.rs1 = parse_reg(ops[1], line);
      break;
    case Opcode::LD: {
      expect_count(ops, 2, upper, line);
      ins.rd = parse_reg(ops[0], line);
      auto [base, off] = parse_mem(ops[1], line);
      ins.rs1 = base;
      ins.imm = off;
      break;
    }
    case Opcode::ST: {
      expect_count(ops, 2, upper, line);
      auto [base, off] = parse_mem(ops[0], line);
      ins.rs1 = base;
      ins.imm = off;
      ins.rs2 = parse_reg(ops[1], line);
      break;
    }
    case Opcode::VST: {
      expect_count(ops, 3, upper, line);
      auto [base, off] = parse_mem(ops[0], line);
      ins.rs1 = base;
      ins.imm = off;
      ins.rs2 = parse_reg(ops[1], line);
      int64_t w = parse_int(ops[2], line);
      if (w != 4 && w != 8 && w != 16) throw AsmError(line, "VST width must be 4, 8 or 16");
      if (ins.rs2 + w > kNumRegs) throw AsmError(line, "VST lanes exceed the register file");
      ins.width = static_cast<uint8_t>(w);
      break;
    }
    case Opcode::BNZ:
    case Opcode::BZ:
      expect_count(ops, 2, upper, line);
      ins.rs1 = parse_reg(ops[0], line);
      if (!is_ident(ops[1])) throw AsmError(line, "malformed branch target '" + std::string(ops[1]) + "'");
      si.target_label = std::string(ops[1]);
      break;
    case Opcode::JMP:
      expect_count(ops, 1, upper, line);
      if (!is_ident(ops[0])) throw AsmError(line, "malformed branch target '" + std::string(ops[0]) + "'");
      si.target_label = std::string(ops[0]);
      break;
    case Opcode::HALT:
      if (!ops.empty()) throw AsmError(line, "HALT takes no operands");
      break;
  }
  return si;
}

LoopBound parse_bound(std::string_view s, int line) {
  if (auto r = try_reg(s, line)) return LoopBound::in_reg(*r);
  return LoopBound::constant(parse_int(s, line));
}

struct Frame {
  enum class Kind { Loop, Do } kind;
  Node node;
};

}  // namespace

SourceProgram parse_source(std::string_view text) {
  SourceProgram src;
  std::vector<Frame> stack;
  auto current = [&]() -> std::vector<Node>& {
    if (stack.empty()) return src.body;
    auto& n = stack.back().node;
    if (auto* l = std::get_if<StructuredLoop>(&n.v)) return l->body;
    return std::get<DoWhile>(n.v).body;
  };

  int line_no = 0;
  uint32_t next_id = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto c = line.find_first_of(";#"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }

    // Leading labels, possibly followed by an instruction on the same line.
    while (true) {
      auto colon = line.find(':');
      if (colon == std::string_view::npos) break;
      auto name = trim(line.substr(0, colon));
      if (!is_ident(name) || name[0] == '.') break;
      current().push_back(Node{SrcLabel{std::string(name), line_no}});
      line = trim(line.substr(colon + 1));
    }
    if (line.empty()) continue;

    auto sp = line.find_first_of(" \t");
    std::string_view head = line.substr(0, sp);
    std::string_view rest = sp == std::string_view::npos ? std::string_view{} : trim(line.substr(sp));

    if (head == ".data" || head == ".word") {
      auto toks = split_ws(rest);
      if (toks.empty()) throw AsmError(line_no, std::string(head) + " needs an address");
      auto addr = static_cast<uint64_t>(parse_int(toks[0], line_no));
      try {
        if (head == ".data") {
          std::vector<uint8_t> bytes;
          for (size_t i = 1; i < toks.size(); ++i) {
            int64_t b = parse_int(toks[i], line_no);
            if (b < -128 || b > 255) throw AsmError(line_no, "byte value out of range");
            bytes.push_back(static_cast<uint8_t>(b));
          }
          src.memory.add(addr, bytes);
        } else {
          std::vector<int64_t> words;
          for (size_t i = 1; i < toks.size(); ++i) words.push_back(parse_int(toks[i], line_no));
          src.memory.add_words(addr, words);
        }
      } catch (const AsmError&) {
        throw;
      } catch (const Error& e) {
        throw AsmError(line_no, e.what());
      }
    } else if (head == ".zero") {
      auto toks = split_ws(rest);
      if (toks.size() != 2) throw AsmError(line_no, ".zero expects ADDR LEN");
      try {
        src.memory.add_zero(static_cast<uint64_t>(parse_int(toks[0], line_no)),
                            static_cast<uint64_t>(parse_int(toks[1], line_no)));
      } catch (const AsmError&) {
        throw;
      } catch (const Error& e) {
        throw AsmError(line_no, e.what());
      }
    } else if (head == ".entry") {
      if (!is_ident(rest)) throw AsmError(line_no, ".entry expects a label");
      src.entry_label = std::string(rest);
    } else if (head == ".mmio_base") {
      src.mmio.base = static_cast<uint64_t>(parse_int(rest, line_no));
    } else if (head == ".mmio_channels") {
      int64_t n = parse_int(rest, line_no);
      if (n < 1 || n > 64) throw AsmError(line_no, ".mmio_channels out of range");
      src.mmio.channels = static_cast<uint32_t>(n);
    } else if (head == ".slice") {
      auto ops = split_operands(rest);
      if (ops.empty()) throw AsmError(line_no, ".slice expects a branch label");
      SliceAnnotation ann;
      ann.branch = std::string(ops[0]);
      for (size_t i = 1; i < ops.size(); ++i) ann.loads.emplace_back(ops[i]);
      src.slices.push_back(std::move(ann));
    } else if (head == ".loop") {
      auto eq = rest.find('=');
      if (eq == std::string_view::npos) throw AsmError(line_no, ".loop expects 'rK = start, end[, step]'");
      StructuredLoop loop;
      loop.line = line_no;
      loop.induction = parse_reg(rest.substr(0, eq), line_no);
      std::string bounds;
      for (auto tok : split_ws(rest.substr(eq + 1))) {
        if (auto kv = tok.find('='); kv != std::string_view::npos) {
          auto key = tok.substr(0, kv);
          auto val = tok.substr(kv + 1);
          if (!is_ident(val)) throw AsmError(line_no, "malformed loop attribute");
          if (key == "target") {
            loop.target_label = std::string(val);
          } else if (key == "end") {
            loop.end_label = std::string(val);
          } else {
            throw AsmError(line_no, "unknown loop attribute '" + std::string(key) + "'");
          }
        } else {
          bounds += std::string(tok) + " ";
        }
      }
      auto parts = split_operands(bounds);
      if (parts.size() < 2 || parts.size() > 3) throw AsmError(line_no, ".loop expects start, end[, step]");
      loop.start = parse_bound(parts[0], line_no);
      loop.end = parse_bound(parts[1], line_no);
      loop.step = parts.size() == 3 ? parse_int(parts[2], line_no) : 1;
      if (loop.step <= 0) throw AsmError(line_no, "loop step must be positive");
      stack.push_back(Frame{Frame::Kind::Loop, Node{std::move(loop)}});
    } else if (head == ".endloop") {
      if (stack.empty() || stack.back().kind != Frame::Kind::Loop) throw AsmError(line_no, ".endloop without .loop");
      Frame f = std::move(stack.back());
      stack.pop_back();
      current().push_back(std::move(f.node));
    } else if (head == ".do") {
      DoWhile d;
      d.line = line_no;
      stack.push_back(Frame{Frame::Kind::Do, Node{std::move(d)}});
    } else if (head == ".while" || head == ".until") {
      if (stack.empty() || stack.back().kind != Frame::Kind::Do) throw AsmError(line_no, std::string(head) + " without .do");
      Frame f = std::move(stack.back());
      stack.pop_back();
      auto& d = std::get<DoWhile>(f.node.v);
      d.cond_reg = parse_reg(rest, line_no);
      d.while_nonzero = head == ".while";
      current().push_back(std::move(f.node));
    } else if (head[0] == '.') {
      throw AsmError(line_no, "unknown directive '" + std::string(head) + "'");
    } else {
      auto si = parse_instruction(head, rest, line_no);
      si.id = ++next_id;
      current().push_back(Node{std::move(si)});
    }
    if (nl == text.size()) break;
  }
  if (!stack.empty()) {
    throw AsmError(stack.back().kind == Frame::Kind::Loop ? std::get<StructuredLoop>(stack.back().node.v).line
                                                          : std::get<DoWhile>(stack.back().node.v).line,
                   "unterminated block");
  }
  return src;
}

// ---------------------------------------------------------------------------
// Lowering

namespace {

class Lowerer {
 public:
  explicit Lowerer(const SourceProgram& src) : src_(src) {}

  Lowered run() {
    for (const auto& n : src_.body) emit_node(n);

    Program p;
    p.code = std::move(code_);
    p.labels = labels_;
    p.memory = src_.memory;
    p.mmio = src_.mmio;
    for (size_t pc = 0; pc < p.code.size(); ++pc) {
      auto& ins = p.code[pc];
      if (!targets_[pc].empty()) ins.target = resolve(targets_[pc], lines_[pc]);
      if (configs_[pc]) {
        ChannelConfig cfg;
        cfg.target_pc = resolve(configs_[pc]->target, lines_[pc]);
        cfg.end_pc = resolve(configs_[pc]->end, lines_[pc]);
        cfg.persist = configs_[pc]->persist;
        ins.imm = static_cast<int64_t>(cfg.encode());
      }
    }
    if (!src_.entry_label.empty()) p.entry = resolve(src_.entry_label, 0);
    for (const auto& s : src_.slices) {
      uint32_t br = resolve(s.branch, 0);
      std::vector<uint32_t> loads;
      for (const auto& l : s.loads) loads.push_back(resolve(l, 0));
      p.backslice_loads[br] = std::move(loads);
    }
    p.validate();
    return Lowered{std::move(p), std::move(origin_)};
  }

 private:
  uint32_t resolve(const std::string& name, int line) const {
    auto it = labels_.find(name);
    if (it == labels_.end()) throw AsmError(line, "undefined label '" + name + "'");
    if (it->second >= code_size()) throw AsmError(line, "label '" + name + "' does not precede an instruction");
    return it->second;
  }

  uint32_t code_size() const { return static_cast<uint32_t>(targets_.size()); }

  void define(const std::string& name, int line) {
    if (!labels_.emplace(name, code_size()).second) throw AsmError(line, "duplicate label '" + name + "'");
  }

  void emit(const Instruction& ins, std::string target, int line,
            std::optional<SrcInstr::ConfigRef> cfg = std::nullopt, uint32_t origin = 0) {
    code_.push_back(ins);
    origin_.push_back(origin);
    targets_.push_back(std::move(target));
    configs_.push_back(std::move(cfg));
    lines_.push_back(line);
  }

  void emit_bound_compare(const StructuredLoop& l, Opcode branch, const std::string& target) {
    uint8_t rhs = kScratchReg;
    if (l.end.is_reg) {
      rhs = l.end.reg;
    } else {
      emit(Instruction{Opcode::MOVI, kScratchReg, 0, 0, l.end.value}, "", l.line);
    }
    emit(Instruction{Opcode::CMP_GE, kScratchReg, l.induction, rhs}, "", l.line);
    emit(Instruction{branch, 0, kScratchReg}, target, l.line);
  }

  void emit_node(const Node& n) {
    if (const auto* si = std::get_if<SrcInstr>(&n.v)) {
      emit(si->ins, si->target_label, si->line, si->config, si->id);
    } else if (const auto* lab = std::get_if<SrcLabel>(&n.v)) {
      define(lab->name, lab->line);
    } else if (const auto* loop = std::get_if<StructuredLoop>(&n.v)) {
      emit_loop(*loop);
    } else {
      const auto& d = std::get<DoWhile>(n.v);
      const std::string top = "__do" + std::to_string(next_id_++) + "_top";
      define(top, d.line);
      for (const auto& c : d.body) emit_node(c);
      emit(Instruction{d.while_nonzero ? Opcode::BNZ : Opcode::BZ, 0, d.cond_reg}, top, d.line);
    }
  }

  void emit_loop(const StructuredLoop& l) {
    if (!l.target_label.empty()) {
      if (!find_target_site(l, l.target_label)) {
        throw AsmError(l.line, "designated target '" + l.target_label + "' is not in this loop");
      }
    }
    const int id = next_id_++;
    const std::string top = "__loop" + std::to_string(id) + "_top";
    const std::string exit = "__loop" + std::to_string(id) + "_exit";

    if (l.start.is_reg) {
      if (l.start.reg != l.induction) emit(Instruction{Opcode::MOV, l.induction, l.start.reg}, "", l.line);
    } else {
      emit(Instruction{Opcode::MOVI, l.induction, 0, 0, l.start.value}, "", l.line);
    }
    const bool statically_entered = !l.start.is_reg && !l.end.is_reg && l.start.value < l.end.value;
    if (!statically_entered) emit_bound_compare(l, Opcode::BNZ, exit);
    define(top, l.line);
    for (const auto& c : l.body) emit_node(c);
    emit(Instruction{Opcode::ADDI, l.induction, l.induction, 0, l.step}, "", l.line);
    emit_bound_compare(l, Opcode::BZ, top);
    define(exit, l.line);
  }

  const SourceProgram& src_;
  std::vector<Instruction> code_;
  std::vector<std::string> targets_;
  std::vector<std::optional<SrcInstr::ConfigRef>> configs_;
  std::vector<int> lines_;
  std::vector<uint32_t> origin_;
  std::map<std::string, uint32_t> labels_;
  int next_id_ = 0;
};

}  // namespace

Lowered lower_with_origin(const SourceProgram& src) { return Lowerer(src).run(); }

Program lower(const SourceProgram& src) { return Lowerer(src).run().program; }

Program assemble(std::string_view text) { return lower(parse_source(text)); }

// ---------------------------------------------------------------------------
// Printing

std::string format_instruction(const Instruction& ins, std::string_view target_name) {
  std::ostringstream os;
  auto r = [](uint8_t reg) { return "r" + std::to_string(reg); };
  auto mem = [&](uint8_t base, int64_t off) {
    return "[" + r(base) + (off < 0 ? "-" : "+") + std::to_string(off < 0 ? -off : off) + "]";
  };
  os << opcode_name(ins.op);
  switch (ins.op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::CMP_EQ:
    case Opcode::CMP_LE:
    case Opcode::CMP_GE:
      os << ' ' << r(ins.rd) << ", " << r(ins.rs1) << ", " << r(ins.rs2);
      break;
    case Opcode::ADDI:
      os << ' ' << r(ins.rd) << ", " << r(ins.rs1) << ", " << ins.imm;
      break;
    case Opcode::MOVI:
      os << ' ' << r(ins.rd) << ", " << ins.imm;
      break;
    case Opcode::MOV:
      os << ' ' << r(ins.rd) << ", " << r(ins.rs1);
      break;
    case Opcode::LD:
      os << ' ' << r(ins.rd) << ", " << mem(ins.rs1, ins.imm);
      break;
    case Opcode::ST:
      os << ' ' << mem(ins.rs1, ins.imm) << ", " << r(ins.rs2);
      break;
    case Opcode::VST:
      os << ' ' << mem(ins.rs1, ins.imm) << ", " << r(ins.rs2) << ", " << int(ins.width);
      break;
    case Opcode::BNZ:
    case Opcode::BZ:
      os << ' ' << r(ins.rs1) << ", " << target_name;
      break;
    case Opcode::JMP:
      os << ' ' << target_name;
      break;
    case Opcode::HALT:
      break;
  }
  return os.str();
}

namespace {

std::string hex(uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

void print_memory(std::ostream& os, const MemoryImage& mem) {
  for (const auto& [base, bytes] : mem.segments()) {
    // Zero runs are common (scratch arrays); keep them compact.
    if (bytes.size() >= 64 && std::all_of(bytes.begin(), bytes.end(), [](uint8_t b) { return b == 0; })) {
      os << ".zero " << hex(base) << ' ' << bytes.size() << '\n';
      continue;
    }
    for (size_t i = 0; i < bytes.size(); i += 32) {
      os << ".data " << hex(base + i);
      for (size_t j = i; j < std::min(bytes.size(), i + 32); ++j) os << ' ' << int(bytes[j]);
      os << '\n';
    }
  }
}

void print_header(std::ostream& os, const MmioLayout& mmio) {
  os << ".mmio_base " << hex(mmio.base) << '\n';
  if (mmio.channels != MmioLayout{}.channels) os << ".mmio_channels " << mmio.channels << '\n';
}

}  // namespace

std::string disassemble(const Program& p) {
  const auto n = static_cast<uint32_t>(p.code.size());
  std::vector<std::vector<std::string>> names(n + 1);
  for (const auto& [name, pc] : p.labels) names[std::min(pc, n)].push_back(name);
  auto name_of = [&](uint32_t pc) -> std::string {
    if (names[pc].empty()) names[pc].push_back("__pc" + std::to_string(pc));
    return names[pc].front();
  };
  // Make sure every referenced PC is nameable before printing.
  for (const auto& ins : p.code) {
    if (is_branch(ins.op)) name_of(ins.target);
  }
  std::string entry = name_of(p.entry);
  for (const auto& [br, loads] : p.backslice_loads) {
    name_of(br);
    for (auto ld : loads) name_of(ld);
  }

  std::ostringstream os;
  print_header(os, p.mmio);
  os << ".entry " << entry << '\n';
  print_memory(os, p.memory);
  for (uint32_t pc = 0; pc <= n; ++pc) {
    for (const auto& name : names[pc]) os << name << ":\n";
    if (pc < n) {
      const auto& ins = p.code[pc];
      os << "    " << format_instruction(ins, is_branch(ins.op) ? names[ins.target].front() : "") << '\n';
    }
  }
  for (const auto& [br, loads] : p.backslice_loads) {
    os << ".slice " << names[br].front();
    for (auto ld : loads) os << ", " << names[ld].front();
    os << '\n';
  }
  return os.str();
}

namespace {

std::string bound_text(const LoopBound& b) {
  return b.is_reg ? "r" + std::to_string(b.reg) : std::to_string(b.value);
}

void print_nodes(std::ostream& os, const std::vector<Node>& body, int depth) {
  const std::string pad(4 * (depth + 1), ' ');
  const std::string lpad(4 * depth, ' ');
  for (const auto& n : body) {
    if (const auto* si = std::get_if<SrcInstr>(&n.v)) {
      if (si->config) {
        os << pad << "MOVI r" << int(si->ins.rd) << ", config(" << si->config->target << ", " << si->config->end
           << (si->config->persist ? ", persist" : "") << ")\n";
      } else {
        os << pad << format_instruction(si->ins, si->target_label) << '\n';
      }
    } else if (const auto* lab = std::get_if<SrcLabel>(&n.v)) {
      os << lpad << lab->name << ":\n";
    } else if (const auto* l = std::get_if<StructuredLoop>(&n.v)) {
      os << pad << ".loop r" << int(l->induction) << " = " << bound_text(l->start) << ", " << bound_text(l->end)
         << ", " << l->step;
      if (!l->target_label.empty()) os << " target=" << l->target_label;
      if (!l->end_label.empty()) os << " end=" << l->end_label;
      os << '\n';
      print_nodes(os, l->body, depth + 1);
      os << pad << ".endloop\n";
    } else {
      const auto& d = std::get<DoWhile>(n.v);
      os << pad << ".do\n";
      print_nodes(os, d.body, depth + 1);
      os << pad << (d.while_nonzero ? ".while r" : ".until r") << int(d.cond_reg) << '\n';
    }
  }
}

}  // namespace

std::string print_source(const SourceProgram& src) {
  std::ostringstream os;
  print_header(os, src.mmio);
  if (!src.entry_label.empty()) os << ".entry " << src.entry_label << '\n';
  print_memory(os, src.memory);
  print_nodes(os, src.body, 0);
  for (const auto& s : src.slices) {
    os << ".slice " << s.branch;
    for (const auto& l : s.loads) os << ", " << l;
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Structure queries

bool contains_label(const std::vector<Node>& body, std::string_view label) {
  for (const auto& n : body) {
    if (const auto* lab = std::get_if<SrcLabel>(&n.v)) {
      if (lab->name == label) return true;
    } else if (const auto* l = std::get_if<StructuredLoop>(&n.v)) {
      if (contains_label(l->body, label)) return true;
    } else if (const auto* d = std::get_if<DoWhile>(&n.v)) {
      if (contains_label(d->body, label)) return true;
    }
  }
  return false;
}

namespace {

void collect_branch_targets(const std::vector<Node>& body, std::set<std::string>& out) {
  for (const auto& n : body) {
    if (const auto* si = std::get_if<SrcInstr>(&n.v)) {
      if (is_branch(si->ins.op)) out.insert(si->target_label);
    } else if (const auto* l = std::get_if<StructuredLoop>(&n.v)) {
      collect_branch_targets(l->body, out);
    } else if (const auto* d = std::get_if<DoWhile>(&n.v)) {
      collect_branch_targets(d->body, out);
    }
  }
}

}  // namespace

std::optional<TargetSite> find_target_site(const StructuredLoop& loop, std::string_view label) {
  const auto& body = loop.body;
  std::optional<size_t> label_idx;
  for (size_t i = 0; i < body.size(); ++i) {
    if (const auto* lab = std::get_if<SrcLabel>(&body[i].v); lab && lab->name == label) {
      label_idx = i;
      break;
    }
  }
  if (!label_idx) {
    if (contains_label(body, label)) {
      throw AsmError(loop.line, "nested designated target branch '" + std::string(label) + "'");
    }
    return std::nullopt;
  }
  size_t j = *label_idx + 1;
  while (j < body.size() && std::holds_alternative<SrcLabel>(body[j].v)) ++j;
  const auto* br = j < body.size() ? std::get_if<SrcInstr>(&body[j].v) : nullptr;
  if (br == nullptr || !is_cond_branch(br->ins.op)) {
    throw AsmError(loop.line, "target label '" + std::string(label) + "' does not name a conditional branch");
  }

  // A branch before the target that lands after it makes the target
  // control dependent on another branch.
  std::set<std::string> later_labels;
  for (size_t k = j + 1; k < body.size(); ++k) {
    if (const auto* lab = std::get_if<SrcLabel>(&body[k].v)) later_labels.insert(lab->name);
  }
  std::set<std::string> earlier_targets;
  std::vector<Node> prefix(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(*label_idx));
  collect_branch_targets(prefix, earlier_targets);
  for (const auto& t : earlier_targets) {
    if (later_labels.count(t)) {
      throw AsmError(loop.line, "nested designated target branch '" + std::string(label) + "' (guarded by a branch to " +
                                    t + ")");
    }
  }
  return TargetSite{*label_idx, j};
}

namespace {

void mark_regs(const std::vector<Node>& body, std::vector<bool>& used) {
  for (const auto& n : body) {
    if (const auto* si = std::get_if<SrcInstr>(&n.v)) {
      if (writes_register(si->ins)) used[si->ins.rd] = true;
      for (auto r : source_registers(si->ins)) used[r] = true;
    } else if (const auto* l = std::get_if<StructuredLoop>(&n.v)) {
      used[l->induction] = true;
      if (l->start.is_reg) used[l->start.reg] = true;
      if (l->end.is_reg) used[l->end.reg] = true;
      used[kScratchReg] = true;
      mark_regs(l->body, used);
    } else if (const auto* d = std::get_if<DoWhile>(&n.v)) {
      used[d->cond_reg] = true;
      mark_regs(d->body, used);
    }
  }
}

}  // namespace

std::vector<bool> used_registers(const SourceProgram& src) {
  std::vector<bool> used(kNumRegs, false);
  mark_regs(src.body, used);
  return used;
}

}  // namespace boss
