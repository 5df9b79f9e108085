#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "boss/error.hpp"
#include "boss/report.hpp"

using namespace boss;

namespace {

const char* kExperiment = R"(# small synthetic run
name = smoke
workload = synthetic
trip = 64
generations = 4
memory = cold
predictor = gshare
predictor.entries = 1024
core.refill_penalty = 14

[variant.plain]
mode = preexec
variant = plain

[variant.vec8]
variant = vec:8
range = 0:31
; comment
[variant.off]
mode = preexec
variant = unroll:4
)";

int error_line(const std::string& text) {
  try {
    parse_experiment(text);
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    if (m.rfind("line ", 0) != 0) return 0;
    return std::stoi(m.substr(5));
  }
  return -1;
}

}  // namespace

TEST(Experiment, ParsesKeysAndSections) {
  const auto e = parse_experiment(kExperiment);
  EXPECT_EQ(e.name, "smoke");
  EXPECT_EQ(e.workload.trip, 64u);
  EXPECT_EQ(e.workload.memory, MemoryClass::Cold);
  EXPECT_EQ(e.predictor.kind, PredictorKind::Gshare);
  EXPECT_EQ(e.predictor.entries, 1024u);
  EXPECT_EQ(e.core.refill_penalty, 14u);
  ASSERT_EQ(e.variants.size(), 3u);
  EXPECT_EQ(e.variants[1].options.variant, Variant::Vectorized);
  EXPECT_EQ(e.variants[1].options.factor, 8u);
  EXPECT_EQ(e.variants[1].options.range, (std::pair<int64_t, int64_t>{0, 31}));
}

TEST(Experiment, ErrorsNameTheLine) {
  EXPECT_EQ(error_line("name = a\nbogus = 1\n"), 2);
  EXPECT_EQ(error_line("trip = -4\n"), 1);
  EXPECT_EQ(error_line("\n\n[variant.baseline]\n"), 3);
  EXPECT_EQ(error_line("[variant.a]\n[variant.a]\n"), 2);
  EXPECT_EQ(error_line("[variant.a]\nvariant = vec:5x\n"), 2);
  EXPECT_EQ(error_line("no equals sign\n"), 1);
  EXPECT_EQ(error_line("predictor = perceptron\n"), 1);
  EXPECT_EQ(error_line("[variant.a]\nrange = 3\n"), 2);
}

TEST(Experiment, DeriveAgainstBaseline) {
  SimStats b, v;
  b.cycles = 1000;
  b.committed = 500;
  v.cycles = 800;
  v.committed = 600;
  v.hinted = 50;
  v.wrong_hints = 5;
  v.target_instances[3] = 100;
  v.target_mispredicts[3] = 2;
  const auto d = derive(b, v);
  EXPECT_DOUBLE_EQ(d.speedup, 1.25);
  EXPECT_DOUBLE_EQ(d.overhead, 1.2);
  EXPECT_DOUBLE_EQ(d.ipc_gain, (600.0 / 800.0) / (500.0 / 1000.0));
  EXPECT_DOUBLE_EQ(d.hint_accuracy, 0.9);
  EXPECT_DOUBLE_EQ(d.target_mispredict_rate, 0.02);
}

TEST(Experiment, RunsBaselineFirstAndRecordsRejections) {
  auto e = parse_experiment(kExperiment);
  VariantSpec bad;
  bad.name = "bad";
  bad.options.factor = 3;
  bad.options.variant = Variant::Vectorized;
  e.variants.push_back(bad);
  const auto r = run_experiment(e);
  ASSERT_EQ(r.rows.size(), 5u);
  EXPECT_EQ(r.rows[0].spec.name, "baseline");
  EXPECT_EQ(r.rows[0].spec.mode, HintMode::None);
  for (size_t i = 1; i < 4; ++i) {
    EXPECT_EQ(r.rows[i].status, "ok") << r.rows[i].diagnostic;
    EXPECT_GT(r.rows[i].stats.committed, r.rows[0].stats.committed);
  }
  EXPECT_EQ(r.rows[4].status, "rejected");
  EXPECT_NE(r.rows[4].diagnostic.find("InvalidOptions"), std::string::npos);
}

TEST(Experiment, JsonRoundTripsAndFilesAreWritten) {
  const auto r = run_experiment(parse_experiment(kExperiment));
  std::stringstream js;
  write_report_json(js, r);
  const auto back = read_report_json(js);
  ASSERT_EQ(back.rows.size(), r.rows.size());
  EXPECT_EQ(back.workload, r.workload);
  for (size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].stats.cycles, r.rows[i].stats.cycles);
    EXPECT_EQ(back.rows[i].spec.name, r.rows[i].spec.name);
  }
  const auto dir = std::filesystem::temp_directory_path() / "boss_report_test";
  std::filesystem::remove_all(dir);
  write_report_files(r, dir.string());
  for (auto f : {"report.csv", "report.json", "summary.txt", "histogram_plain.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream csv(dir / "report.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header.rfind("variant,mode,options,range,status,cycles", 0), 0u);
}

TEST(Experiment, ComparisonRequiresMatchingConfigs) {
  auto e = parse_experiment(kExperiment);
  const auto a = run_experiment(e);
  e.name = "second";
  const auto b = run_experiment(e);
  std::ostringstream os;
  write_comparison_csv(os, {a, b});
  const std::string s = os.str();
  EXPECT_NE(s.find("geomean"), std::string::npos);
  EXPECT_NE(s.find("second"), std::string::npos);
  e.core.refill_penalty = 20;
  const auto c = run_experiment(e);
  std::ostringstream bad;
  EXPECT_THROW(write_comparison_csv(bad, {a, c}), ConfigError);
}

TEST(Experiment, FixedSixDecimals) {
  EXPECT_EQ(fixed6(1.0 / 3.0), "0.333333");
  EXPECT_EQ(fixed6(2), "2.000000");
}
