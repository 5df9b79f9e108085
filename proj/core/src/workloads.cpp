#include "boss/workloads.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "boss/error.hpp"
#include "boss/exec.hpp"
#include "boss/instrument.hpp"

namespace boss {

std::string workload_kind_name(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::KillNeighbours: return "kill_neighbours";
    case WorkloadKind::KillOrConnect: return "kill_or_connect";
    case WorkloadKind::RecordReplay: return "record_replay";
    case WorkloadKind::Correlated: return "correlated";
    case WorkloadKind::Synthetic: return "synthetic";
  }
  return "?";
}

WorkloadKind parse_workload_kind(const std::string& name) {
  for (auto k : {WorkloadKind::KillNeighbours, WorkloadKind::KillOrConnect, WorkloadKind::RecordReplay,
                 WorkloadKind::Correlated, WorkloadKind::Synthetic}) {
    if (workload_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown workload kind '" + name + "'");
}

std::string memory_class_name(MemoryClass m) { return m == MemoryClass::Hot ? "hot" : "cold"; }

MemoryClass parse_memory_class(const std::string& name) {
  if (name == "hot") return MemoryClass::Hot;
  if (name == "cold") return MemoryClass::Cold;
  throw ConfigError("unknown memory class '" + name + "'");
}

void WorkloadSpec::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("probability must be in [0, 1]");
  if (trip == 0) throw ConfigError("trip count must be at least 1");
  if (generations == 0) throw ConfigError("generations must be at least 1");
  if (chain_depth < 1 || chain_depth > 2) throw ConfigError("chain depth must be 1 or 2");
}

namespace {

class Rng {
 public:
  explicit Rng(uint64_t seed) : g_(seed) {}
  double uniform() { return double(g_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return uniform() < p; }
  uint64_t below(uint64_t n) { return g_() % n; }
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 g_;
};

class Memory {
 public:
  uint64_t alloc(uint64_t bytes) {
    const uint64_t a = next_;
    img_.add_zero(a, bytes);
    next_ = (a + bytes + 127) / 64 * 64;
    return a;
  }
  void put(uint64_t addr, int64_t v) {
    if (!img_.write(addr, store_word(v))) throw Error("workload data outside its segment");
  }
  MemoryImage take() { return std::move(img_); }

 private:
  MemoryImage img_;
  uint64_t next_ = 0x10000;
};

/// Assembly text with a couple of conveniences.
class Text {
 public:
  Text& line(const std::string& s) {
    os_ << "    " << s << '\n';
    return *this;
  }
  Text& label(const std::string& s) {
    os_ << s << ":\n";
    return *this;
  }
  Text& raw(const std::string& s) {
    os_ << s << '\n';
    return *this;
  }
  Text& filler(uint32_t n, int reg) {
    for (uint32_t i = 0; i < n; ++i) line("ADDI r" + std::to_string(reg) + ", r" + std::to_string(reg) + ", 1");
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

std::string num(int64_t v) { return std::to_string(v); }
std::string hexnum(uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

struct Generated {
  std::string text;
  MemoryImage memory;
  std::vector<bool> schedule;
  std::string target;
  std::string end;
};

/// Emits BOSS_open for `target` ending at `end` via scratch registers.
void emit_open(Text& t, const MmioLayout& mmio, uint32_t ch, const std::string& target, const std::string& end,
               bool persist) {
  t.line("MOVI r26, config(" + target + ", " + end + (persist ? ", persist" : "") + ")");
  t.line("MOVI r27, " + hexnum(mmio.config_address(ch)));
  t.line("ST [r27+0], r26");
}

// ---------------------------------------------------------------------------

Generated gen_synthetic(const WorkloadSpec& s) {
  Rng rng(s.seed);
  Memory mem;
  const bool cold = s.memory == MemoryClass::Cold;
  const uint64_t stride = cold ? 64 : 8;
  const uint64_t trip = s.trip;
  // Hot data reuses a pool of at most 4096 elements; cold data never repeats.
  const uint64_t pool_gens = cold ? s.generations : std::max<uint64_t>(1, std::min<uint64_t>(s.generations, 4096 / trip));
  const uint64_t elems = pool_gens * trip;
  const uint64_t a_base = mem.alloc(elems * stride);
  const uint64_t b_base = s.chain_depth == 2 ? mem.alloc(elems * stride) : 0;
  const uint64_t table = mem.alloc(uint64_t(s.generations) * 8);

  std::vector<bool> outcome(elems);
  for (uint64_t e = 0; e < elems; ++e) {
    outcome[e] = rng.chance(s.probability);
    const int64_t v = outcome[e] ? 1 : 0;
    if (s.chain_depth == 2) {
      mem.put(a_base + e * stride, int64_t(b_base + e * stride));
      mem.put(b_base + e * stride, v);
    } else {
      mem.put(a_base + e * stride, v);
    }
  }
  Generated g;
  for (uint64_t gen = 0; gen < s.generations; ++gen) {
    const uint64_t first = (gen % pool_gens) * trip;
    mem.put(table + gen * 8, int64_t(a_base + first * stride));
    for (uint64_t i = 0; i < trip; ++i) g.schedule.push_back(outcome[first + i]);
  }

  Text t;
  t.raw(".entry main").label("main");
  t.line("MOVI r2, " + hexnum(table)).line("MOVI r3, " + num(int64_t(stride))).line("MOVI r4, 1");
  t.line("MOVI r10, 0").line("MOVI r11, " + num(s.generations));
  if (!cold) {
    // Hot data is cache resident before the measured loop: touch every line.
    t.line("MOVI r13, 64").line("MOVI r14, " + hexnum(a_base));
    t.raw(".loop r1 = 0, " + num(int64_t((elems * stride + 63) / 64)) + ", 1");
    t.line("MUL r15, r1, r13").line("ADD r15, r15, r14").line("LD r15, [r15+0]");
    t.raw(".endloop");
    if (s.chain_depth == 2) {
      t.line("MOVI r14, " + hexnum(b_base));
      t.raw(".loop r1 = 0, " + num(int64_t((elems * stride + 63) / 64)) + ", 1");
      t.line("MUL r15, r1, r13").line("ADD r15, r15, r14").line("LD r15, [r15+0]");
      t.raw(".endloop");
    }
  }
  t.raw(".do");
  t.line("LD r9, [r2+0]").line("ADDI r2, r2, 8");
  t.filler(s.lead_filler, 16);
  t.raw(".loop r1 = 0, " + num(int64_t(trip)) + ", 1 target=T");
  t.line("MUL r5, r1, r3").line("ADD r5, r5, r9").line("LD r6, [r5+0]");
  if (s.chain_depth == 2) t.line("LD r6, [r6+0]");
  t.line("CMP_EQ r7, r6, r4");
  t.label("T").line("BNZ r7, T_skip").line("ADDI r12, r12, 1").label("T_skip");
  t.raw(".endloop");
  t.label("T_end").line("ADDI r10, r10, 1").line("CMP_GE r8, r10, r11");
  t.raw(".until r8").line("HALT");
  g.text = t.str();
  g.memory = mem.take();
  g.target = "T";
  g.end = "T_end";
  return g;
}

// Square board of `w` x `w` words; interior squares have all four
// neighbours on the board.
struct Board {
  uint32_t w = 0;
  std::vector<uint32_t> interior;
  std::array<int64_t, 4> dirs{};  // byte offsets

  explicit Board(uint32_t min_interior) {
    w = 9;
    while ((w - 2) * (w - 2) < min_interior) ++w;
    for (uint32_t y = 1; y + 1 < w; ++y) {
      for (uint32_t x = 1; x + 1 < w; ++x) interior.push_back(y * w + x);
    }
    dirs = {-8, 8, -8 * int64_t(w), 8 * int64_t(w)};
  }
  uint32_t squares() const { return w * w; }
};

Generated gen_kill_neighbours(const WorkloadSpec& s) {
  Rng rng(s.seed);
  Memory mem;
  Board board(s.generations);
  const uint64_t dirs = mem.alloc(32);
  const uint64_t square = mem.alloc(uint64_t(board.squares()) * 8);
  const uint64_t next = mem.alloc(uint64_t(board.squares()) * 8);
  constexpr int64_t kColor = 1;
  for (int k = 0; k < 4; ++k) mem.put(dirs + 8 * k, board.dirs[k]);
  std::vector<int64_t> color(board.squares());
  for (uint32_t q = 0; q < board.squares(); ++q) {
    color[q] = rng.chance(s.probability) ? kColor : (rng.chance(0.5) ? 0 : 2);
    mem.put(square + 8 * q, color[q]);
  }
  // Pointer-chasing cycle through distinct interior squares.
  auto order = board.interior;
  rng.shuffle(order);
  order.resize(s.generations);
  for (size_t j = 0; j < order.size(); ++j) {
    mem.put(next + 8 * uint64_t(order[j]), 8 * int64_t(order[(j + 1) % order.size()]));
  }
  Generated g;
  for (auto pos : order) {
    for (int k = 0; k < 4; ++k) {
      const int64_t ai = int64_t(pos) + board.dirs[k] / 8;
      g.schedule.push_back(color[ai] != kColor);  // BZ: taken when not our colour
    }
  }

  Text t;
  t.raw(".entry main").label("main");
  t.line("MOVI r3, 8").line("MOVI r10, " + hexnum(dirs)).line("MOVI r11, " + hexnum(square));
  t.line("MOVI r12, " + num(kColor)).line("MOVI r14, " + hexnum(next));
  t.line("MOVI r9, " + num(8 * int64_t(order[0]))).line("MOVI r15, " + num(8 * int64_t(order[0])));
  t.raw(".do");
  t.filler(s.lead_filler, 16);
  t.raw(".loop r1 = 0, 4, 1 target=KN");
  t.line("MUL r5, r1, r3").line("ADD r5, r5, r10").line("LD r6, [r5+0]");
  t.line("ADD r7, r9, r6").line("ADD r7, r7, r11").line("LD r8, [r7+0]").line("CMP_EQ r8, r8, r12");
  t.label("KN").line("BZ r8, KN_skip").line("ADDI r13, r13, 1").label("KN_skip");
  t.raw(".endloop");
  t.label("KN_end").line("ADD r17, r14, r9").line("LD r9, [r17+0]").line("CMP_EQ r19, r9, r15");
  t.raw(".until r19").line("HALT");
  g.text = t.str();
  g.memory = mem.take();
  g.target = "KN";
  g.end = "KN_end";
  return g;
}

Generated gen_kill_or_connect(const WorkloadSpec& s) {
  Rng rng(s.seed);
  Memory mem;
  Board board(16);
  constexpr uint32_t kGroups = 16;
  const uint64_t dirs = mem.alloc(32);
  const uint64_t parent = mem.alloc(uint64_t(board.squares()) * 8);
  const uint64_t libs = mem.alloc(kGroups * 8);
  const uint64_t vertices = mem.alloc(uint64_t(s.generations) * 8);
  for (int k = 0; k < 4; ++k) mem.put(dirs + 8 * k, board.dirs[k]);
  std::vector<int64_t> group_libs(kGroups);
  for (uint32_t r = 0; r < kGroups; ++r) {
    group_libs[r] = rng.chance(s.probability) ? int64_t(rng.below(2)) : int64_t(2 + rng.below(4));
    mem.put(libs + 8 * r, group_libs[r]);
  }
  std::vector<uint32_t> root(board.squares());
  for (uint32_t q = 0; q < board.squares(); ++q) {
    root[q] = uint32_t(rng.below(kGroups));
    mem.put(parent + 8 * q, int64_t(libs + 8 * root[q]));
  }
  Generated g;
  for (uint32_t v = 0; v < s.generations; ++v) {
    const uint32_t pos = board.interior[rng.below(board.interior.size())];
    mem.put(vertices + 8 * v, 8 * int64_t(pos));
    for (int k = 0; k < 4; ++k) {
      const int64_t ai = int64_t(pos) + board.dirs[k] / 8;
      const bool brk = group_libs[root[ai]] <= 1;
      g.schedule.push_back(brk);
      if (brk) break;
    }
  }

  Text t;
  t.raw(".entry main").label("main");
  t.line("MOVI r3, 8").line("MOVI r17, " + hexnum(dirs)).line("MOVI r18, " + hexnum(parent));
  t.line("MOVI r19, 1").line("MOVI r4, " + hexnum(vertices));
  t.line("MOVI r10, 0").line("MOVI r11, " + num(s.generations));
  t.raw(".do");
  t.line("LD r9, [r4+0]").line("ADDI r4, r4, 8");
  t.filler(s.lead_filler, 16);
  t.raw(".loop r1 = 0, 4, 1 target=KC end=KC_found");
  t.line("MUL r5, r1, r3").line("ADD r5, r5, r17").line("LD r6, [r5+0]");
  t.line("ADD r7, r9, r6").line("ADD r7, r7, r18").line("LD r12, [r7+0]").line("LD r13, [r12+0]");
  t.line("CMP_LE r14, r13, r19");
  t.label("KC").line("BNZ r14, KC_found").line("ADDI r15, r15, 1");
  t.raw(".endloop");
  t.label("KC_found").line("ADDI r10, r10, 1").line("CMP_GE r8, r10, r11");
  t.raw(".until r8").line("HALT");
  g.text = t.str();
  g.memory = mem.take();
  g.target = "KC";
  g.end = "KC_found";
  return g;
}

// Positions to flip so that exactly round((1 - p) * n) of `n` outcomes change.
std::vector<size_t> flips(Rng& rng, size_t n, double p) {
  const auto count = static_cast<size_t>(std::llround((1.0 - p) * double(n)));
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  idx.resize(count);
  return idx;
}

struct HintOptions {
  bool enabled = false;
  uint32_t channel = 0;
  MmioLayout mmio;
};

Generated gen_record_replay(const WorkloadSpec& s, const HintOptions& h) {
  Rng rng(s.seed);
  Memory mem;
  const uint64_t trip = s.trip;
  const uint64_t data = mem.alloc(uint64_t(s.generations) * trip * 8);
  const uint64_t moves = mem.alloc(uint64_t(s.generations) * trip * 8);
  Generated g;
  std::vector<bool> cur(trip);
  for (auto&& b : cur) b = rng.chance(0.5);
  for (uint32_t gen = 0; gen < s.generations; ++gen) {
    if (gen > 0) {
      for (auto i : flips(rng, trip, s.probability)) cur[i] = !cur[i];
    }
    for (uint64_t i = 0; i < trip; ++i) {
      mem.put(data + (uint64_t(gen) * trip + i) * 8, cur[i] ? 1 : 0);
      g.schedule.push_back(cur[i]);
    }
  }

  Text t;
  t.raw(".entry main").label("main");
  t.line("MOVI r2, " + hexnum(data)).line("MOVI r3, 8").line("MOVI r4, 1");
  t.line("MOVI r17, " + hexnum(moves)).line("MOVI r10, 0").line("MOVI r11, " + num(s.generations));
  if (h.enabled) emit_open(t, h.mmio, h.channel, "RR", "RR_end", true);
  t.raw(".do");
  if (h.enabled) t.line("MOVI r18, " + hexnum(h.mmio.outcome_address(h.channel, 0)));
  t.filler(s.lead_filler, 16);
  t.raw(".loop r1 = 0, " + num(int64_t(trip)) + ", 1 target=RR");
  t.line("MUL r5, r1, r3").line("ADD r5, r5, r2").line("LD r6, [r5+0]").line("CMP_EQ r7, r6, r4");
  t.label("RR").line("BNZ r7, RR_skip").line("ST [r17+0], r1").line("ADDI r17, r17, 8");
  t.label("RR_skip");
  if (h.enabled) t.line("ST [r18+0], r7").line("ADDI r18, r18, 1");
  t.raw(".endloop");
  t.label("RR_end").line("MOVI r19, " + num(int64_t(trip * 8))).line("ADD r2, r2, r19");
  t.line("ADDI r10, r10, 1").line("CMP_GE r8, r10, r11");
  t.raw(".until r8").line("HALT");
  g.text = t.str();
  g.memory = mem.take();
  g.target = "RR";
  g.end = "RR_end";
  return g;
}

Generated gen_correlated(const WorkloadSpec& s, const HintOptions& h) {
  Rng rng(s.seed);
  Memory mem;
  const uint64_t trip = s.trip;
  const uint64_t n = uint64_t(s.generations) * trip;
  const uint64_t src = mem.alloc(n * 8);
  const uint64_t tgt = mem.alloc(n * 8);
  std::vector<bool> a(n), b(n);
  for (uint64_t i = 0; i < n; ++i) a[i] = b[i] = rng.chance(0.5);
  for (auto i : flips(rng, n, s.probability)) b[i] = !b[i];
  Generated g;
  for (uint64_t i = 0; i < n; ++i) {
    mem.put(src + 8 * i, a[i] ? 1 : 0);
    mem.put(tgt + 8 * i, b[i] ? 1 : 0);
    g.schedule.push_back(b[i]);
  }

  Text t;
  t.raw(".entry main").label("main");
  t.line("MOVI r2, " + hexnum(src)).line("MOVI r3, 8").line("MOVI r4, 1").line("MOVI r20, " + hexnum(tgt));
  t.line("MOVI r10, 0").line("MOVI r11, " + num(s.generations));
  if (h.enabled) emit_open(t, h.mmio, h.channel, "CT", "CT_end", false);
  t.raw(".do");
  if (h.enabled) t.line("MOVI r18, " + hexnum(h.mmio.outcome_address(h.channel, 0)));
  t.raw(".loop r1 = 0, " + num(int64_t(trip)) + ", 1");
  t.line("MUL r5, r1, r3").line("ADD r5, r5, r2").line("LD r6, [r5+0]").line("CMP_EQ r7, r6, r4");
  if (h.enabled) t.line("ST [r18+0], r7").line("ADDI r18, r18, 1");
  t.label(kCorrelatedSourceLabel).line("BNZ r7, CS_skip").line("ADDI r12, r12, 1").label("CS_skip");
  t.raw(".endloop");
  t.filler(s.lead_filler, 16);
  t.raw(".loop r1 = 0, " + num(int64_t(trip)) + ", 1 target=CT");
  t.line("MUL r5, r1, r3").line("ADD r5, r5, r20").line("LD r6, [r5+0]").line("CMP_EQ r7, r6, r4");
  t.label("CT").line("BNZ r7, CT_skip").line("ADDI r13, r13, 1").label("CT_skip");
  t.raw(".endloop");
  t.label("CT_end").line("MOVI r19, " + num(int64_t(trip * 8))).line("ADD r2, r2, r19").line("ADD r20, r20, r19");
  t.line("ADDI r10, r10, 1").line("CMP_GE r8, r10, r11");
  t.raw(".until r8").line("HALT");
  g.text = t.str();
  g.memory = mem.take();
  g.target = "CT";
  g.end = "CT_end";
  return g;
}

Generated generate(const WorkloadSpec& s, const HintOptions& h) {
  switch (s.kind) {
    case WorkloadKind::KillNeighbours: return gen_kill_neighbours(s);
    case WorkloadKind::KillOrConnect: return gen_kill_or_connect(s);
    case WorkloadKind::RecordReplay: return gen_record_replay(s, h);
    case WorkloadKind::Correlated: return gen_correlated(s, h);
    case WorkloadKind::Synthetic: return gen_synthetic(s);
  }
  throw Error("unknown workload kind");
}

template <class Body, class Out>
void flatten(Body& body, Out& out) {
  for (auto& n : body) {
    if (auto* si = std::get_if<SrcInstr>(&n.v)) {
      out.push_back(si);
    } else if (auto* l = std::get_if<StructuredLoop>(&n.v)) {
      flatten(l->body, out);
    } else if (auto* d = std::get_if<DoWhile>(&n.v)) {
      flatten(d->body, out);
    }
  }
}

// Hinted text is the original with lines inserted; carry the original
// instruction ids over and leave inserted ones at 0.
void adopt_ids(const SourceProgram& original, SourceProgram& hinted) {
  std::vector<const SrcInstr*> a;
  std::vector<SrcInstr*> b;
  flatten(original.body, a);
  flatten(hinted.body, b);
  size_t i = 0;
  for (auto* si : b) {
    if (i < a.size() && si->ins == a[i]->ins && si->target_label == a[i]->target_label && !si->config) {
      si->id = a[i++]->id;
    } else {
      si->id = 0;
    }
  }
  if (i != a.size()) throw Error("hinted program does not contain the original");
}

SourceProgram to_source(Generated& g) {
  SourceProgram src = parse_source(g.text);
  src.memory = std::move(g.memory);
  return src;
}

}  // namespace

Workload build_workload(const WorkloadSpec& spec) {
  spec.validate();
  Generated g = generate(spec, HintOptions{});
  Workload w;
  w.spec = spec;
  w.schedule = std::move(g.schedule);
  w.target_label = g.target;
  w.end_label = g.end;
  w.source = to_source(g);
  annotate_backslice(w.source, w.target_label);
  w.program = lower(w.source);
  w.target_pc = *w.program.label_pc(w.target_label);
  w.end_pc = *w.program.label_pc(w.end_label);

  const DynTrace trace = execute(w.program);
  if (!trace.halted) throw Error("workload " + workload_kind_name(spec.kind) + " does not halt");
  if (branch_profile(trace, w.program, w.target_pc) != w.schedule) {
    throw Error("workload " + workload_kind_name(spec.kind) + " disagrees with its outcome schedule");
  }
  return w;
}

SourceProgram build_record_replay_instrumentation(const Workload& w, uint32_t channel) {
  if (w.spec.kind != WorkloadKind::RecordReplay) throw Error("record-replay hints need a record_replay workload");
  HintOptions h{true, channel, w.source.mmio};
  if (channel >= h.mmio.channels) throw ConfigError("channel out of range");
  Generated g = generate(w.spec, h);
  SourceProgram src = to_source(g);
  annotate_backslice(src, w.target_label);
  adopt_ids(w.source, src);
  return src;
}

SourceProgram build_correlated_instrumentation(const Workload& w, uint32_t channel) {
  if (w.spec.kind != WorkloadKind::Correlated) throw Error("correlation hints need a correlated workload");
  HintOptions h{true, channel, w.source.mmio};
  if (channel >= h.mmio.channels) throw ConfigError("channel out of range");
  Generated g = generate(w.spec, h);
  SourceProgram src = to_source(g);
  annotate_backslice(src, w.target_label);
  adopt_ids(w.source, src);
  return src;
}

}  // namespace boss
