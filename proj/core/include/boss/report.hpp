#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "boss/frontend.hpp"
#include "boss/instrument.hpp"
#include "boss/predictor.hpp"
#include "boss/workloads.hpp"

namespace boss {

enum class HintMode : uint8_t { None, Preexec, RecordReplay, Correlated };

std::string hint_mode_name(HintMode m);

struct VariantSpec {
  std::string name;
  HintMode mode = HintMode::Preexec;
  InstrumentOptions options;

  bool operator==(const VariantSpec&) const = default;
};

struct Experiment {
  std::string name = "experiment";
  WorkloadSpec workload;
  PredictorConfig predictor;
  CoreConfig core;
  /// Never contains the baseline; run_experiment adds it as the first row.
  std::vector<VariantSpec> variants;
  std::string output_dir = "report";
};

/// Flat `key = value` lines with `[variant.NAME]` sections. Throws
/// ConfigError naming the offending line.
Experiment parse_experiment(std::string_view text);
Experiment load_experiment(const std::string& path);

struct VariantResult {
  VariantSpec spec;
  std::string status = "ok";  // ok | rejected | failed
  std::string diagnostic;
  SimStats stats;
  uint64_t static_instructions = 0;
};

struct Report {
  std::string name;
  std::string workload;   // canonical description, used to match reports
  std::string predictor;
  std::string core;
  std::vector<VariantResult> rows;  // rows[0] is the baseline
};

/// Derived columns of one row against the baseline.
struct Derived {
  double speedup = 0;
  double ipc_gain = 0;
  double overhead = 0;
  double target_mispredict_rate = 0;
  double mpki = 0;
  double hint_accuracy = 0;
};

Derived derive(const SimStats& baseline, const SimStats& variant);

std::string describe_workload(const WorkloadSpec& w);
std::string describe_predictor(const PredictorConfig& p);
std::string describe_core(const CoreConfig& c);

/// Runs the baseline and every variant. A failing variant is recorded and
/// the run continues.
Report run_experiment(const Experiment& exp);

void write_report_csv(std::ostream& os, const Report& r);
void write_report_json(std::ostream& os, const Report& r);
void write_summary(std::ostream& os, const Report& r);
/// report.csv, report.json, summary.txt and histogram_<variant>.csv.
void write_report_files(const Report& r, const std::string& dir);
Report read_report_json(std::istream& is);

/// Rows of several reports side by side plus min / max / geomean rows.
/// Coverage-range variants also get their overhead relative to the
/// full-coverage variant of the same shape. Throws ConfigError when the
/// reports disagree on workload, predictor or core.
void write_comparison_csv(std::ostream& os, const std::vector<Report>& reports);

/// Fixed six-decimal formatting used in every table.
std::string fixed6(double v);

}  // namespace boss
