// boss: experiment driver, instrumenter and trace tools.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "boss/assembler.hpp"
#include "boss/boss_unit.hpp"
#include "boss/error.hpp"
#include "boss/exec.hpp"
#include "boss/frontend.hpp"
#include "boss/instrument.hpp"
#include "boss/report.hpp"
#include "boss/workloads.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kSim = 3, kLegality = 4 };

struct SimFailure : boss::Error {
  using boss::Error::Error;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw boss::ConfigError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Writes to `path`, or stdout for "" and "-".
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream f(path);
  if (!f) throw boss::ConfigError("cannot write '" + path + "'");
  fn(f);
}

int cmd_run(const std::string& config, const std::string& out) {
  auto exp = boss::load_experiment(config);
  if (!out.empty()) exp.output_dir = out;
  boss::Report rep;
  try {
    rep = boss::run_experiment(exp);
  } catch (const boss::ConfigError&) {
    throw;
  } catch (const boss::Error& e) {
    throw SimFailure(e.what());
  }
  boss::write_report_files(rep, exp.output_dir);
  boss::write_summary(std::cout, rep);
  int code = kOk;
  for (const auto& row : rep.rows) {
    if (row.status == "rejected" && code == kOk) code = kLegality;
    if (row.status == "failed") code = kSim;
  }
  return code;
}

int cmd_instrument(const std::string& target, const std::string& variant, const std::string& range, uint32_t channel,
                   const std::string& placement, uint32_t strip_cap, const std::string& in, const std::string& out) {
  const auto src = boss::parse_source(slurp(in));
  boss::InstrumentOptions opts;
  try {
    boss::parse_variant(variant, opts);
  } catch (const boss::InstrumentError& e) {
    throw boss::ConfigError(e.what());
  }
  opts.channel = channel;
  opts.strip_cap = strip_cap;
  if (placement == "adjacent") {
    opts.placement = boss::Placement::Adjacent;
  } else if (placement != "earliest") {
    throw boss::ConfigError("placement must be earliest or adjacent");
  }
  if (!range.empty()) {
    const auto colon = range.find(':');
    if (colon == std::string::npos) throw boss::ConfigError("range must look like n:m");
    try {
      opts.range = {std::stoll(range.substr(0, colon)), std::stoll(range.substr(colon + 1))};
    } catch (const std::exception&) {
      throw boss::ConfigError("range must look like n:m");
    }
  }
  const auto r = boss::instrument(src, target, opts);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  emit(out, [&](std::ostream& os) { os << boss::print_source(r.source); });
  if (!r.ok) {
    std::cerr << "error[" << boss::instrument_error_name(*r.code) << "]: " << r.diagnostic << '\n';
    return *r.code == boss::InstrumentErrorCode::InvalidOptions ? kConfig : kLegality;
  }
  return kOk;
}

int cmd_compare(const std::vector<std::string>& files, const std::string& out) {
  std::vector<boss::Report> reports;
  for (const auto& f : files) {
    std::istringstream in(slurp(f));
    reports.push_back(boss::read_report_json(in));
  }
  std::ostringstream table;
  boss::write_comparison_csv(table, reports);
  emit(out, [&](std::ostream& os) { os << table.str(); });
  return kOk;
}

int cmd_dump_trace(const std::string& in, const std::string& out, bool events, uint64_t step_limit) {
  const auto prog = boss::assemble(slurp(in));
  if (!events) {
    const auto trace = boss::execute(prog, step_limit);
    emit(out, [&](std::ostream& os) { boss::write_trace(os, trace); });
    if (trace.faulted) throw SimFailure("program faulted at pc " + std::to_string(trace.events.back().pc));
    return trace.truncated ? kSim : kOk;
  }
  boss::CoreConfig core;
  core.step_limit = step_limit;
  core.record_boss_log = true;
  boss::SimResult res;
  try {
    res = boss::run_sim(prog, boss::PredictorConfig{}, core);
  } catch (const boss::Error& e) {
    throw SimFailure(e.what());
  }
  emit(out, [&](std::ostream& os) { boss::write_event_log(os, res.boss_log); });
  return kOk;
}

int cmd_sim(const std::string& in, const std::string& predictor, bool no_boss, const std::string& target,
            const std::string& end, const std::string& histogram) {
  const auto prog = boss::assemble(slurp(in));
  boss::PredictorConfig pc;
  pc.kind = boss::parse_predictor_kind(predictor);
  boss::CoreConfig core;
  core.boss_enabled = !no_boss;
  boss::SimTargets targets;
  if (!target.empty()) {
    auto pc_of = prog.label_pc(target);
    if (!pc_of) throw boss::ConfigError("no label '" + target + "'");
    targets.target_pcs.push_back(*pc_of);
  }
  if (!end.empty()) {
    auto pc_of = prog.label_pc(end);
    if (!pc_of) throw boss::ConfigError("no label '" + end + "'");
    targets.end_pc = *pc_of;
  }
  boss::SimResult res;
  try {
    res = boss::run_sim(prog, pc, core, targets);
  } catch (const boss::ConfigError&) {
    throw;
  } catch (const boss::Error& e) {
    throw SimFailure(e.what());
  }
  boss::write_stats(std::cout, res.stats);
  if (!histogram.empty()) emit(histogram, [&](std::ostream& os) { boss::write_histogram_csv(os, res.stats); });
  return res.stats.non_terminating ? kSim : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BOSS branch pre-resolution simulator and instrumenter"};
  app.require_subcommand(1);

  std::string config, out;
  auto* run = app.add_subcommand("run", "Run an experiment config (baseline plus variants)");
  run->add_option("config", config, "Experiment file")->required();
  run->add_option("--out", out, "Output directory (overrides the config)");

  std::string target, variant = "plain", range, placement = "earliest", input, output;
  uint32_t channel = 0, strip_cap = 256;
  auto* ins = app.add_subcommand("instrument", "Insert a pre-execute loop for one target branch");
  ins->add_option("--target", target, "Label of the target branch")->required();
  ins->add_option("--variant", variant, "plain | unroll:N | vec:W");
  ins->add_option("--range", range, "Coverage range n:m (iteration indices)");
  ins->add_option("--channel", channel, "BOSS channel");
  ins->add_option("--placement", placement, "earliest | adjacent");
  ins->add_option("--strip-cap", strip_cap, "Strip-mining chunk size");
  ins->add_option("input", input, "Input .bss")->required();
  ins->add_option("-o,--output", output, "Output .bss (default stdout)");

  std::vector<std::string> reports;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare", "Tabulate report.json files side by side");
  cmp->add_option("reports", reports, "report.json files")->required();
  cmp->add_option("-o,--output", cmp_out, "Output CSV (default stdout)");

  std::string trace_in, trace_out;
  bool events = false;
  uint64_t step_limit = boss::kDefaultStepLimit;
  auto* dump = app.add_subcommand("dump-trace", "Print the oracle trace or the BOSS event log");
  dump->add_option("input", trace_in, "Program .bss")->required();
  dump->add_option("-o,--output", trace_out, "Output file (default stdout)");
  dump->add_flag("--boss-events", events, "Simulate and print the BOSS unit event log instead");
  dump->add_option("--step-limit", step_limit, "Oracle step limit");

  uint32_t channels = 4, iters = 256;
  auto* storage = app.add_subcommand("storage", "BOSS storage cost in bytes");
  storage->add_option("--channels", channels, "Channel count");
  storage->add_option("--iters", iters, "Outcome slots per channel");

  std::string wl_kind = "synthetic", wl_memory = "hot", wl_hints = "none", wl_out;
  boss::WorkloadSpec spec;
  auto* wl = app.add_subcommand("workload", "Emit a built-in workload as .bss");
  wl->add_option("--kind", wl_kind, "kill_neighbours | kill_or_connect | record_replay | correlated | synthetic");
  wl->add_option("--trip", spec.trip, "Trip count");
  wl->add_option("--generations", spec.generations, "Outer generations");
  wl->add_option("--seed", spec.seed, "Data seed");
  wl->add_option("--probability", spec.probability, "Bias / repeat / correlation probability");
  wl->add_option("--chain-depth", spec.chain_depth, "Synthetic load chain depth");
  wl->add_option("--memory", wl_memory, "hot | cold");
  wl->add_option("--lead-filler", spec.lead_filler, "Filler instructions ahead of the target loop");
  wl->add_option("--hints", wl_hints, "none | record_replay | correlated");
  wl->add_option("-o,--output", wl_out, "Output .bss (default stdout)");

  std::string sim_in, predictor = "tage", sim_target, sim_end, histogram;
  bool no_boss = false;
  auto* sim = app.add_subcommand("sim", "Simulate one program and print key=value stats");
  sim->add_option("input", sim_in, "Program .bss")->required();
  sim->add_option("--predictor", predictor, "always_taken | bimodal | gshare | tage");
  sim->add_flag("--no-boss", no_boss, "Ignore BOSS stores");
  sim->add_option("--target", sim_target, "Target branch label for per-branch stats");
  sim->add_option("--end", sim_end, "End label delimiting iterations in the histogram");
  sim->add_option("--histogram", histogram, "Write the per-iteration histogram CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(config, out);
    if (*ins) return cmd_instrument(target, variant, range, channel, placement, strip_cap, input, output);
    if (*cmp) return cmd_compare(reports, cmp_out);
    if (*dump) return cmd_dump_trace(trace_in, trace_out, events, step_limit);
    if (*storage) {
      std::cout << boss::storage_bytes(channels, iters) << '\n';
      return kOk;
    }
    if (*wl) {
      spec.kind = boss::parse_workload_kind(wl_kind);
      spec.memory = boss::parse_memory_class(wl_memory);
      const auto w = boss::build_workload(spec);
      boss::SourceProgram src = w.source;
      if (wl_hints == "record_replay") {
        src = boss::build_record_replay_instrumentation(w);
      } else if (wl_hints == "correlated") {
        src = boss::build_correlated_instrumentation(w);
      } else if (wl_hints != "none") {
        throw boss::ConfigError("unknown hints '" + wl_hints + "'");
      }
      emit(wl_out, [&](std::ostream& os) { os << boss::print_source(src); });
      return kOk;
    }
    if (*sim) return cmd_sim(sim_in, predictor, no_boss, sim_target, sim_end, histogram);
  } catch (const SimFailure& e) {
    std::cerr << "simulation failed: " << e.what() << '\n';
    return kSim;
  } catch (const boss::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
