#include "boss/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include "json.hpp"
#include <sstream>

#include "boss/error.hpp"

namespace boss {

std::string hint_mode_name(HintMode m) {
  switch (m) {
    case HintMode::None: return "none";
    case HintMode::Preexec: return "preexec";
    case HintMode::RecordReplay: return "record_replay";
    case HintMode::Correlated: return "correlated";
  }
  return "?";
}

namespace {

HintMode parse_hint_mode(const std::string& s) {
  for (auto m : {HintMode::None, HintMode::Preexec, HintMode::RecordReplay, HintMode::Correlated}) {
    if (hint_mode_name(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + s + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

uint64_t to_u64(const std::string& v) {
  size_t used = 0;
  uint64_t x = 0;
  try {
    x = std::stoull(v, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || v.front() == '-') throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return x;
}

uint32_t to_u32(const std::string& v) {
  const uint64_t x = to_u64(v);
  if (x > 0xFFFFFFFFull) throw ConfigError("value '" + v + "' is too large");
  return static_cast<uint32_t>(x);
}

double to_double(const std::string& v) {
  size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected on/off, got '" + v + "'");
}

std::pair<int64_t, int64_t> to_range(const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) throw ConfigError("range must look like n:m, got '" + v + "'");
  return {int64_t(to_u64(v.substr(0, colon))), int64_t(to_u64(v.substr(colon + 1)))};
}

Placement to_placement(const std::string& v) {
  if (v == "earliest") return Placement::Earliest;
  if (v == "adjacent") return Placement::Adjacent;
  throw ConfigError("placement must be earliest or adjacent, got '" + v + "'");
}

std::string placement_name(Placement p) { return p == Placement::Earliest ? "earliest" : "adjacent"; }

void set_top(Experiment& e, const std::string& k, const std::string& v) {
  auto& w = e.workload;
  auto& p = e.predictor;
  auto& c = e.core;
  if (k == "name") e.name = v;
  else if (k == "output") e.output_dir = v;
  else if (k == "workload") w.kind = parse_workload_kind(v);
  else if (k == "trip") w.trip = to_u32(v);
  else if (k == "generations") w.generations = to_u32(v);
  else if (k == "seed") w.seed = to_u64(v);
  else if (k == "probability") w.probability = to_double(v);
  else if (k == "chain_depth") w.chain_depth = to_u32(v);
  else if (k == "memory") w.memory = parse_memory_class(v);
  else if (k == "lead_filler") w.lead_filler = to_u32(v);
  else if (k == "predictor") p.kind = parse_predictor_kind(v);
  else if (k == "predictor.entries") p.entries = to_u32(v);
  else if (k == "predictor.history_bits") p.history_bits = to_u32(v);
  else if (k == "predictor.base_entries") p.base_entries = to_u32(v);
  else if (k == "predictor.tagged_entries") p.tagged_entries = to_u32(v);
  else if (k == "predictor.seed") p.seed = to_u64(v);
  else if (k == "core.width") c.width = to_u32(v);
  else if (k == "core.window") c.window = to_u32(v);
  else if (k == "core.resolve_delay") c.resolve_delay = to_u32(v);
  else if (k == "core.refill_penalty") c.refill_penalty = to_u32(v);
  else if (k == "core.boss") c.boss_enabled = to_bool(v);
  else if (k == "core.wrong_path_pollution") c.wrong_path_pollution = to_bool(v);
  else if (k == "core.dataflow_window") c.dataflow_window = to_u32(v);
  else if (k == "core.channels") c.channels = to_u32(v);
  else if (k == "core.step_limit") c.step_limit = to_u64(v);
  else if (k == "cache.line") c.cache.line_bytes = to_u32(v);
  else if (k == "cache.l1d_size") c.cache.l1d.size_bytes = to_u32(v);
  else if (k == "cache.l1d_ways") c.cache.l1d.ways = to_u32(v);
  else if (k == "cache.l1d_latency") c.cache.l1d.latency = to_u32(v);
  else if (k == "cache.l2_size") c.cache.l2.size_bytes = to_u32(v);
  else if (k == "cache.l2_ways") c.cache.l2.ways = to_u32(v);
  else if (k == "cache.l2_latency") c.cache.l2.latency = to_u32(v);
  else if (k == "cache.memory_latency") c.cache.memory_latency = to_u32(v);
  else throw ConfigError("unknown key '" + k + "'");
}

void set_variant(VariantSpec& s, const std::string& k, const std::string& v) {
  auto& o = s.options;
  if (k == "mode") {
    s.mode = parse_hint_mode(v);
  } else if (k == "variant") {
    try {
      parse_variant(v, o);
    } catch (const InstrumentError& e) {
      throw ConfigError(e.what());
    }
  } else if (k == "range") {
    o.range = to_range(v);
  } else if (k == "channel") {
    o.channel = to_u32(v);
  } else if (k == "placement") {
    o.placement = to_placement(v);
  } else if (k == "strip_cap") {
    o.strip_cap = to_u32(v);
  } else {
    throw ConfigError("unknown variant key '" + k + "'");
  }
}

}  // namespace

Experiment parse_experiment(std::string_view text) {
  Experiment e;
  VariantSpec* current = nullptr;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    try {
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError("unterminated section header");
        const std::string sec = trim(s.substr(1, s.size() - 2));
        if (sec.rfind("variant.", 0) != 0 || sec.size() == 8) {
          throw ConfigError("sections must be [variant.NAME], got [" + sec + "]");
        }
        const std::string name = sec.substr(8);
        if (name == "baseline") throw ConfigError("'baseline' is reserved");
        for (const auto& v : e.variants) {
          if (v.name == name) throw ConfigError("duplicate variant '" + name + "'");
        }
        VariantSpec vs;
        vs.name = name;
        e.variants.push_back(vs);
        current = &e.variants.back();
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key = value");
      const std::string k = trim(s.substr(0, eq));
      const std::string v = trim(s.substr(eq + 1));
      if (k.empty() || v.empty()) throw ConfigError("empty key or value");
      if (current) {
        set_variant(*current, k, v);
      } else {
        set_top(e, k, v);
      }
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(line) + ": " + err.what());
    }
  }
  e.workload.validate();
  e.core.validate();
  make_predictor(e.predictor);
  return e;
}

Experiment load_experiment(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_experiment(ss.str());
}

std::string fixed6(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Derived derive(const SimStats& b, const SimStats& v) {
  Derived d;
  d.speedup = v.cycles ? double(b.cycles) / double(v.cycles) : 0.0;
  d.ipc_gain = b.ipc() > 0 ? v.ipc() / b.ipc() : 0.0;
  d.overhead = b.committed ? double(v.committed) / double(b.committed) : 0.0;
  const auto inst = v.total_target_instances();
  d.target_mispredict_rate = inst ? double(v.total_target_mispredicts()) / double(inst) : 0.0;
  d.mpki = v.mpki();
  d.hint_accuracy = v.hinted ? 1.0 - double(v.wrong_hints) / double(v.hinted) : 0.0;
  return d;
}

std::string describe_workload(const WorkloadSpec& w) {
  std::ostringstream os;
  os << "kind=" << workload_kind_name(w.kind) << " trip=" << w.trip << " generations=" << w.generations
     << " seed=" << w.seed << " probability=" << fixed6(w.probability) << " chain_depth=" << w.chain_depth
     << " memory=" << memory_class_name(w.memory) << " lead_filler=" << w.lead_filler;
  return os.str();
}

std::string describe_predictor(const PredictorConfig& p) {
  std::ostringstream os;
  os << "kind=" << predictor_kind_name(p.kind) << " entries=" << p.entries << " history_bits=" << p.history_bits
     << " base_entries=" << p.base_entries << " tagged_entries=" << p.tagged_entries << " seed=" << p.seed;
  return os.str();
}

std::string describe_core(const CoreConfig& c) {
  std::ostringstream os;
  os << "width=" << c.width << " window=" << c.window << " resolve_delay=" << c.resolve_delay
     << " refill_penalty=" << c.refill_penalty << " boss=" << (c.boss_enabled ? "on" : "off")
     << " pollution=" << (c.wrong_path_pollution ? "on" : "off") << " dataflow_window=" << c.dataflow_window
     << " channels=" << c.channels << " line=" << c.cache.line_bytes << " l1d=" << c.cache.l1d.size_bytes << "/"
     << c.cache.l1d.ways << "/" << c.cache.l1d.latency << " l2=" << c.cache.l2.size_bytes << "/" << c.cache.l2.ways
     << "/" << c.cache.l2.latency << " mem=" << c.cache.memory_latency;
  return os.str();
}

namespace {

SimTargets targets_for(const Program& p, const Workload& w) {
  SimTargets t;
  if (auto pc = p.label_pc(w.target_label)) t.target_pcs.push_back(*pc);
  if (auto pc = p.label_pc(w.end_label)) t.end_pc = *pc;
  return t;
}

VariantResult run_variant(const VariantSpec& spec, const Workload& w, const Experiment& exp) {
  VariantResult r;
  r.spec = spec;
  Program prog;
  try {
    switch (spec.mode) {
      case HintMode::None: prog = w.program; break;
      case HintMode::Preexec: {
        auto ir = instrument(w.source, w.target_label, spec.options);
        if (!ir.ok) {
          r.status = "rejected";
          r.diagnostic = ir.diagnostic;
          return r;
        }
        prog = std::move(ir.program);
        break;
      }
      case HintMode::RecordReplay: prog = lower(build_record_replay_instrumentation(w, spec.options.channel)); break;
      case HintMode::Correlated: prog = lower(build_correlated_instrumentation(w, spec.options.channel)); break;
    }
  } catch (const Error& e) {
    r.status = "rejected";
    r.diagnostic = e.what();
    return r;
  }
  r.static_instructions = prog.code.size();
  try {
    r.stats = run_sim(prog, exp.predictor, exp.core, targets_for(prog, w)).stats;
    if (r.stats.non_terminating) {
      r.status = "failed";
      r.diagnostic = "simulation did not terminate";
    }
  } catch (const Error& e) {
    r.status = "failed";
    r.diagnostic = e.what();
  }
  return r;
}

}  // namespace

Report run_experiment(const Experiment& exp) {
  const Workload w = build_workload(exp.workload);
  Report rep;
  rep.name = exp.name;
  rep.workload = describe_workload(exp.workload);
  rep.predictor = describe_predictor(exp.predictor);
  rep.core = describe_core(exp.core);
  VariantSpec base{"baseline", HintMode::None, {}};
  rep.rows.push_back(run_variant(base, w, exp));
  if (rep.rows.front().status != "ok") throw Error("baseline simulation failed: " + rep.rows.front().diagnostic);
  for (const auto& v : exp.variants) rep.rows.push_back(run_variant(v, w, exp));
  return rep;
}

namespace {

std::string range_text(const InstrumentOptions& o) {
  return o.range ? std::to_string(o.range->first) + ":" + std::to_string(o.range->second) : "full";
}

std::string options_text(const VariantSpec& s) {
  return s.mode == HintMode::Preexec ? variant_text(s.options) : "-";
}

}  // namespace

void write_report_csv(std::ostream& os, const Report& r) {
  os << "variant,mode,options,range,status,cycles,committed,branches,mispredicts,target_mispredicts,"
        "target_instances,target_mispredict_rate,mpki,ipc,speedup,ipc_gain,overhead,boss_hits,boss_misses,"
        "hinted,wrong_hints,hint_accuracy\n";
  const auto& base = r.rows.front().stats;
  for (const auto& row : r.rows) {
    const auto& s = row.stats;
    os << row.spec.name << ',' << hint_mode_name(row.spec.mode) << ',' << options_text(row.spec) << ','
       << (row.spec.mode == HintMode::Preexec ? range_text(row.spec.options) : "-") << ',' << row.status;
    if (row.status != "ok") {
      os << ",,,,,,,,,,,,,,,,,\n";
      continue;
    }
    const Derived d = derive(base, s);
    os << ',' << s.cycles << ',' << s.committed << ',' << s.committed_branches << ',' << s.mispredicts << ','
       << s.total_target_mispredicts() << ',' << s.total_target_instances() << ',' << fixed6(d.target_mispredict_rate)
       << ',' << fixed6(d.mpki) << ',' << fixed6(s.ipc()) << ',' << fixed6(d.speedup) << ',' << fixed6(d.ipc_gain)
       << ',' << fixed6(d.overhead) << ',' << s.boss_hits << ',' << s.boss_misses << ',' << s.hinted << ','
       << s.wrong_hints << ',' << fixed6(d.hint_accuracy) << '\n';
  }
}

namespace {

using nlohmann::json;

json stats_json(const SimStats& s) {
  json j;
  j["cycles"] = s.cycles;
  j["committed"] = s.committed;
  j["committed_branches"] = s.committed_branches;
  j["committed_cond_branches"] = s.committed_cond_branches;
  j["mispredicts"] = s.mispredicts;
  json tm = json::object(), ti = json::object();
  for (const auto& [pc, n] : s.target_mispredicts) tm[std::to_string(pc)] = n;
  for (const auto& [pc, n] : s.target_instances) ti[std::to_string(pc)] = n;
  j["target_mispredicts"] = tm;
  j["target_instances"] = ti;
  j["boss_hits"] = s.boss_hits;
  j["boss_misses"] = s.boss_misses;
  j["hinted"] = s.hinted;
  j["wrong_hints"] = s.wrong_hints;
  j["squashes"] = s.squashes;
  j["wrong_path_fetched"] = s.wrong_path_fetched;
  j["l1d_misses"] = s.l1d_misses;
  j["l2_misses"] = s.l2_misses;
  j["commit_mismatches"] = s.commit_mismatches;
  j["snapshot_violations"] = s.snapshot_violations;
  j["non_terminating"] = s.non_terminating;
  return j;
}

SimStats stats_from_json(const json& j) {
  SimStats s;
  s.cycles = j.at("cycles");
  s.committed = j.at("committed");
  s.committed_branches = j.at("committed_branches");
  s.committed_cond_branches = j.at("committed_cond_branches");
  s.mispredicts = j.at("mispredicts");
  for (const auto& [k, v] : j.at("target_mispredicts").items()) s.target_mispredicts[uint32_t(std::stoul(k))] = v;
  for (const auto& [k, v] : j.at("target_instances").items()) s.target_instances[uint32_t(std::stoul(k))] = v;
  s.boss_hits = j.at("boss_hits");
  s.boss_misses = j.at("boss_misses");
  s.hinted = j.at("hinted");
  s.wrong_hints = j.at("wrong_hints");
  s.squashes = j.at("squashes");
  s.wrong_path_fetched = j.at("wrong_path_fetched");
  s.l1d_misses = j.at("l1d_misses");
  s.l2_misses = j.at("l2_misses");
  s.commit_mismatches = j.at("commit_mismatches");
  s.snapshot_violations = j.at("snapshot_violations");
  s.non_terminating = j.at("non_terminating");
  return s;
}

}  // namespace

void write_report_json(std::ostream& os, const Report& r) {
  json j;
  j["name"] = r.name;
  j["workload"] = r.workload;
  j["predictor"] = r.predictor;
  j["core"] = r.core;
  j["rows"] = json::array();
  for (const auto& row : r.rows) {
    json x;
    x["name"] = row.spec.name;
    x["mode"] = hint_mode_name(row.spec.mode);
    x["variant"] = variant_text(row.spec.options);
    x["range"] = row.spec.options.range ? json::array({row.spec.options.range->first, row.spec.options.range->second})
                                        : json(nullptr);
    x["channel"] = row.spec.options.channel;
    x["placement"] = placement_name(row.spec.options.placement);
    x["strip_cap"] = row.spec.options.strip_cap;
    x["status"] = row.status;
    x["diagnostic"] = row.diagnostic;
    x["static_instructions"] = row.static_instructions;
    x["stats"] = stats_json(row.stats);
    j["rows"].push_back(std::move(x));
  }
  os << j.dump(2) << '\n';
}

Report read_report_json(std::istream& is) {
  Report r;
  try {
    const json j = json::parse(is);
    r.name = j.at("name");
    r.workload = j.at("workload");
    r.predictor = j.at("predictor");
    r.core = j.at("core");
    for (const auto& x : j.at("rows")) {
      VariantResult row;
      row.spec.name = x.at("name");
      row.spec.mode = parse_hint_mode(x.at("mode"));
      parse_variant(x.at("variant").get<std::string>(), row.spec.options);
      if (!x.at("range").is_null()) row.spec.options.range = {x.at("range")[0], x.at("range")[1]};
      row.spec.options.channel = x.at("channel");
      row.spec.options.placement = to_placement(x.at("placement"));
      row.spec.options.strip_cap = x.at("strip_cap");
      row.status = x.at("status");
      row.diagnostic = x.at("diagnostic");
      row.static_instructions = x.at("static_instructions");
      row.stats = stats_from_json(x.at("stats"));
      r.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  } catch (const InstrumentError& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  if (r.rows.empty() || r.rows.front().spec.name != "baseline") throw ConfigError("report has no baseline row");
  return r;
}

void write_summary(std::ostream& os, const Report& r) {
  os << "experiment " << r.name << '\n' << "workload   " << r.workload << '\n' << "predictor  " << r.predictor << '\n'
     << "core       " << r.core << '\n';
  const auto& base = r.rows.front().stats;
  for (const auto& row : r.rows) {
    os << '\n' << row.spec.name << " (" << hint_mode_name(row.spec.mode) << ' ' << options_text(row.spec) << ") "
       << row.status;
    if (!row.diagnostic.empty()) os << ": " << row.diagnostic;
    os << '\n';
    if (row.status != "ok") continue;
    const Derived d = derive(base, row.stats);
    os << "  cycles " << row.stats.cycles << "  committed " << row.stats.committed << "  speedup " << fixed6(d.speedup)
       << "  overhead " << fixed6(d.overhead) << '\n'
       << "  mpki " << fixed6(d.mpki) << "  target mispredict rate " << fixed6(d.target_mispredict_rate)
       << "  hints " << row.stats.hinted << " (wrong " << row.stats.wrong_hints << ")\n";
  }
}

void write_report_files(const Report& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(std::filesystem::path(dir) / name);
    if (!f) throw Error("cannot write " + (std::filesystem::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("report.csv");
    write_report_csv(f, r);
  }
  {
    auto f = open("report.json");
    write_report_json(f, r);
  }
  {
    auto f = open("summary.txt");
    write_summary(f, r);
  }
  for (const auto& row : r.rows) {
    if (row.status != "ok") continue;
    auto f = open("histogram_" + row.spec.name + ".csv");
    write_histogram_csv(f, row.stats);
  }
}

void write_comparison_csv(std::ostream& os, const std::vector<Report>& reports) {
  if (reports.empty()) throw ConfigError("nothing to compare");
  for (const auto& r : reports) {
    if (r.workload != reports.front().workload) throw ConfigError("reports use different workloads");
    if (r.predictor != reports.front().predictor) throw ConfigError("reports use different predictors");
    if (r.core != reports.front().core) throw ConfigError("reports use different core configurations");
  }
  os << "report,variant,options,range,speedup,ipc_gain,overhead,normalized_overhead,target_mispredict_rate,mpki\n";
  std::vector<double> speedup, gain, overhead;
  for (const auto& r : reports) {
    const auto& base = r.rows.front().stats;
    for (const auto& row : r.rows) {
      if (row.status != "ok") continue;
      const Derived d = derive(base, row.stats);
      std::string norm;
      if (row.spec.mode == HintMode::Preexec) {
        for (const auto& full : r.rows) {
          if (full.status == "ok" && full.spec.mode == HintMode::Preexec && !full.spec.options.range &&
              variant_text(full.spec.options) == variant_text(row.spec.options)) {
            norm = fixed6(d.overhead / derive(base, full.stats).overhead);
            break;
          }
        }
      }
      os << r.name << ',' << row.spec.name << ',' << options_text(row.spec) << ','
         << (row.spec.mode == HintMode::Preexec ? range_text(row.spec.options) : "-") << ',' << fixed6(d.speedup)
         << ',' << fixed6(d.ipc_gain) << ',' << fixed6(d.overhead) << ',' << norm << ','
         << fixed6(d.target_mispredict_rate) << ',' << fixed6(d.mpki) << '\n';
      speedup.push_back(d.speedup);
      gain.push_back(d.ipc_gain);
      overhead.push_back(d.overhead);
    }
  }
  auto row = [&](const std::string& label, const std::function<double(const std::vector<double>&)>& f) {
    os << label << ",,,," << fixed6(f(speedup)) << ',' << fixed6(f(gain)) << ',' << fixed6(f(overhead)) << ",,,\n";
  };
  row("min", [](const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); });
  row("max", [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); });
  row("geomean", [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += std::log(x);
    return std::exp(s / double(v.size()));
  });
}

}  // namespace boss
