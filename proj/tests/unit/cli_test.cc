#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "commands.h"
#include "driftscope/csv.h"
#include "driftscope/errors.h"
#include "fixtures.h"
#include "pipeline.h"

namespace driftscope {
namespace {

using testing::TempDir;

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

cli::GenDataOptions small_scenario(const std::string& dir, int n, double frac) {
  cli::GenDataOptions gen;
  gen.scenario.n_episodes = n;
  gen.scenario.deterioration_fraction = frac;
  gen.scenario.seed = 4;
  gen.out_dir = dir;
  return gen;
}

TEST(GenData, ByteStable) {
  TempDir a("gen_a"), b("gen_b");
  std::ostringstream log;
  cli::cmd_gen_data(small_scenario(a.str(), 10, 0.5), log);
  cli::cmd_gen_data(small_scenario(b.str(), 10, 0.5), log);
  const auto events = csv::read_file(a.file("events.jsonl"));
  EXPECT_EQ(events, csv::read_file(b.file("events.jsonl")));
  EXPECT_EQ(csv::read_file(a.file("truth.jsonl")), csv::read_file(b.file("truth.jsonl")));
  std::istringstream in(events);
  EXPECT_EQ(parse_event_log(in, scenario_catalog(ScenarioConfig{})).size(), 10u);
  EXPECT_NE(log.str().find("episodes: 10"), std::string::npos);
}

TEST(GenData, ExtremeFractions) {
  TempDir none("gen_none"), all("gen_all");
  std::ostringstream log;
  cli::cmd_gen_data(small_scenario(none.str(), 40, 0.0), log);
  EXPECT_EQ(csv::read_file(none.file("truth.jsonl")), "");
  cli::cmd_gen_data(small_scenario(all.str(), 40, 1.0), log);
  EXPECT_EQ(count_lines(csv::read_file(all.file("truth.jsonl"))), 40);
}

TEST(GenData, InvalidFieldIsUsageError) {
  TempDir d("gen_bad");
  std::ostringstream log;
  auto gen = small_scenario(d.str(), 10, 0.5);
  gen.scenario.noise_scale = 3.0;
  try {
    cli::cmd_gen_data(gen, log);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "noise_scale");
  }
}

class TrainedDir : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("trained");
    std::ostringstream log;
    auto gen = small_scenario(dir_->str(), 80, 0.5);
    gen.scenario.train_fraction = 0.5;
    gen.scenario.validation_fraction = 0.2;
    cli::cmd_gen_data(gen, log);
    cli::cmd_train(train_options(dir_->str(), 0.0), log);
  }
  static void TearDownTestSuite() { delete dir_; }

  static cli::TrainOptions train_options(const std::string& out, double eta) {
    cli::TrainOptions tr;
    tr.events = dir_->file("events.jsonl");
    tr.out_dir = out;
    tr.model.hidden_size = 6;
    tr.model.max_epochs = 2;
    tr.model.eta = eta;
    tr.model.seed = 8;
    return tr;
  }

  static cli::ExplainOptions explain_options(const std::string& out) {
    cli::ExplainOptions ex;
    ex.events = dir_->file("events.jsonl");
    ex.checkpoint = dir_->file("checkpoint.json");
    ex.bins = dir_->file("bins.json");
    ex.truth = dir_->file("truth.jsonl");
    ex.out_dir = out;
    ex.m = 8;
    return ex;
  }

  static TempDir* dir_;
};

TempDir* TrainedDir::dir_ = nullptr;

TEST_F(TrainedDir, ZeroEpochsWritesInitialParams) {
  TempDir out("train0");
  std::ostringstream log;
  auto tr = train_options(out.str(), 0.0);
  tr.model.max_epochs = 0;
  cli::cmd_train(tr, log);
  const auto cat = scenario_catalog(ScenarioConfig{});
  const auto ckpt = checkpoint_from_json(csv::read_file(out.file("checkpoint.json")), cat);
  EXPECT_EQ(ckpt.params.flatten(), model_init(tr.model, 2 * cat.size() + 1).flatten());
}

TEST_F(TrainedDir, RerunIsByteIdentical) {
  TempDir out("train_again");
  std::ostringstream log;
  cli::cmd_train(train_options(out.str(), 0.0), log);
  EXPECT_EQ(csv::read_file(out.file("checkpoint.json")),
            csv::read_file(dir_->file("checkpoint.json")));
  EXPECT_EQ(csv::read_file(out.file("training_report.csv")),
            csv::read_file(dir_->file("training_report.csv")));
}

TEST_F(TrainedDir, SmoothingChangesReport) {
  TempDir out("train_eta");
  std::ostringstream log;
  cli::cmd_train(train_options(out.str(), 0.005), log);
  EXPECT_NE(csv::read_file(out.file("training_report.csv")),
            csv::read_file(dir_->file("training_report.csv")));
  EXPECT_NE(csv::read_file(out.file("checkpoint.json")),
            csv::read_file(dir_->file("checkpoint.json")));
}

TEST_F(TrainedDir, CatalogMismatchIsDataError) {
  TempDir out("train_cat");
  const auto cat = testing::catalog_of(3);
  csv::write_file_atomic(out.file("catalog.json"), cat.to_json());
  std::ostringstream log;
  auto tr = train_options(out.str(), 0.0);
  tr.catalog = out.file("catalog.json");
  EXPECT_THROW(cli::cmd_train(tr, log), DataError);
}

TEST_F(TrainedDir, EightRowGroupsPerWindow) {
  TempDir out("explain_all");
  std::ostringstream log;
  auto ex = explain_options(out.str());
  ex.k = 1;
  cli::cmd_explain(ex, log);
  const auto cat = scenario_catalog(ScenarioConfig{});
  std::ifstream in(out.file("explanations.csv"));
  const auto rows = explanations_from_csv(in, cat);
  std::ifstream tin(out.file("windows.jsonl"));
  const auto windows = truth_from_jsonl(tin, cat);
  ASSERT_FALSE(windows.empty());
  std::map<std::string, std::set<Method>> groups;
  for (const auto& row : rows) {
    EXPECT_LE(row.explanation.items.size(), 1u);
    groups[row.episode_id].insert(row.method);
  }
  // The random method always selects; the others may come back empty when
  // every weight in the window is zero.
  for (const auto& w : windows) EXPECT_TRUE(groups[w.episode_id].count(Method::kRandom));
  std::size_t full = 0;
  for (const auto& [id, methods] : groups) full += methods.size() == 8;
  EXPECT_GT(full, windows.size() / 2);
  const auto series = csv::read_file(out.file("risk_series.csv"));
  EXPECT_EQ(series.substr(0, series.find('\n')), "episode,step,time_s,hours,p");
}

TEST_F(TrainedDir, AlertModeWritesCohort) {
  TempDir out("explain_alerts");
  std::ostringstream log;
  auto ex = explain_options(out.str());
  ex.truth.clear();
  ex.split = "all";
  ex.methods = "random,gradient";
  ex.rule.min_new_events = 0;
  ex.rule.floor = 0.01;
  ex.rule.ratio_threshold = 1.0001;
  cli::cmd_explain(ex, log);
  const auto alerts = csv::read_file(out.file("alerts.csv"));
  EXPECT_EQ(count_lines(alerts) - 1, count_lines(csv::read_file(out.file("windows.jsonl"))));
}

TEST_F(TrainedDir, AlertsCommand) {
  TempDir out("alerts");
  std::ostringstream log;
  cli::AlertsOptions al;
  al.events = dir_->file("events.jsonl");
  al.checkpoint = dir_->file("checkpoint.json");
  al.out_dir = out.str();
  al.rule.min_new_events = 0;
  cli::cmd_alerts(al, log);
  const auto text = csv::read_file(out.file("alerts.csv"));
  EXPECT_EQ(text.substr(0, text.find('\n')), "episode,t0,t1,t0_time,t1_time,p0,p1,new_events");
}

TEST_F(TrainedDir, EvaluateIsolatesMethods) {
  TempDir out("evaluate");
  std::ostringstream log;
  cli::cmd_explain(explain_options(out.str()), log);
  cli::EvaluateOptions ev;
  ev.explanations = out.file("explanations.csv");
  ev.truth = out.file("windows.jsonl");
  ev.out_dir = out.str();
  ev.resamples = 300;
  ev.methods = "random";
  ev.out_name = "one.csv";
  cli::cmd_evaluate(ev, log);
  ev.methods = "random,integrated_gradients";
  ev.out_name = "two.csv";
  cli::cmd_evaluate(ev, log);
  const auto one = csv::read_file(out.file("one.csv"));
  const auto two = csv::read_file(out.file("two.csv"));
  EXPECT_EQ(count_lines(one), 2);
  EXPECT_EQ(count_lines(two), 3);
  EXPECT_EQ(two.substr(0, one.size()), one);
}

TEST(Evaluate, EmptyEvaluation) {
  TempDir d("empty_eval");
  csv::write_file_atomic(d.file("ex.csv"),
                         "episode,method,rank,step,time_s,feature,raw_value,weight\n");
  csv::write_file_atomic(d.file("truth.jsonl"), "");
  cli::EvaluateOptions ev;
  ev.explanations = d.file("ex.csv");
  ev.truth = d.file("truth.jsonl");
  ev.out_dir = d.str();
  std::ostringstream log;
  try {
    cli::cmd_evaluate(ev, log);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("empty evaluation"), std::string::npos);
  }
}

TEST(Golden, SeededPipelineReproducesCommittedResults) {
  TempDir a("golden_a");
  const std::string results = testing::run_golden_pipeline(a.str());
  if (std::getenv("DRIFTSCOPE_UPDATE_GOLDEN")) {
    csv::write_file_atomic(testing::golden_path(), results);
  }
  EXPECT_EQ(results, csv::read_file(testing::golden_path()));
}

int run(const std::string& args) {
  const std::string cmd = std::string(DRIFTSCOPE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  TempDir d("binary");
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("gen-data --n-episodes 5 --out-dir " + d.str()), 0);
  EXPECT_EQ(run("gen-data --deterioration-fraction 2 --out-dir " + d.str()), 1);
  EXPECT_EQ(run("train --events " + d.file("missing.jsonl")), 1);
  csv::write_file_atomic(d.file("bad.jsonl"), "{\"episode\": \"a\", \"time_s\": -1}\n");
  EXPECT_EQ(run("train --events " + d.file("bad.jsonl") + " --out-dir " + d.str()), 2);
  EXPECT_EQ(run("train --events " + d.file("events.jsonl") + " --max-epochs 0 --hidden-size 4 "
                "--out-dir " + d.str()),
            0);
  EXPECT_EQ(run("explain --events " + d.file("events.jsonl") + " --checkpoint " +
                d.file("checkpoint.json") + " --methods saliency --out-dir " + d.str()),
            1);
}

TEST(Binary, ConfigFileAndFlagPrecedence) {
  TempDir d("config");
  csv::write_file_atomic(d.file("cfg.json"),
                         "{\"gen-data\": {\"n-episodes\": 7, \"seed\": 3, \"out-dir\": \"" +
                             d.str() + "\"}}");
  EXPECT_EQ(run("--config " + d.file("cfg.json") + " gen-data"), 0);
  std::ifstream in(d.file("events.jsonl"));
  EXPECT_EQ(parse_event_log(in, scenario_catalog(ScenarioConfig{})).size(), 7u);
  EXPECT_EQ(run("--config " + d.file("cfg.json") + " gen-data --n-episodes 4"), 0);
  std::ifstream in2(d.file("events.jsonl"));
  EXPECT_EQ(parse_event_log(in2, scenario_catalog(ScenarioConfig{})).size(), 4u);
}

TEST(Binary, SeedFromEnvironment) {
  TempDir a("env_a"), b("env_b");
  ASSERT_EQ(run("gen-data --n-episodes 3 --seed 9 --out-dir " + a.str()), 0);
  ASSERT_EQ(run("gen-data --n-episodes 3 --out-dir " + b.str()), 0);
  const std::string cmd = "DRIFTSCOPE_SEED=9 " + std::string(DRIFTSCOPE_CLI_PATH) +
                          " gen-data --n-episodes 3 --out-dir " + b.str() + " >/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(csv::read_file(a.file("events.jsonl")), csv::read_file(b.file("events.jsonl")));
}

}  // namespace
}  // namespace driftscope
