#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "driftscope/alerts.h"
#include "driftscope/seqmodel.h"
#include "driftscope/stats_attr.h"
#include "driftscope/synth_eval.h"

namespace driftscope::cli {

struct GenDataOptions {
  ScenarioConfig scenario;
  std::string out_dir = ".";
};

struct TrainOptions {
  std::string events;
  std::string catalog;  // empty: synthetic catalog
  std::string out_dir = ".";
  ModelConfig model;
  StatWeightConfig bins;
};

struct AlertsOptions {
  std::string events;
  std::string catalog;
  std::string checkpoint;
  std::string out_dir = ".";
  std::string split = "test";  // or "all"
  AlertRule rule;
  int jobs = 1;
};

struct ExplainOptions {
  std::string events;
  std::string catalog;
  std::string checkpoint;
  std::string smoothed_checkpoint;  // optional, for smoothed_derivative
  std::string bins;
  std::string truth;  // checkpoint windows; empty selects alert mode
  std::string out_dir = ".";
  std::string split = "test";
  std::string methods = "all";
  int k = 3;
  int m = 64;
  std::uint64_t seed = 0;
  double laplace_alpha = 0.5;
  AlertRule rule;
  int jobs = 1;
};

struct EvaluateOptions {
  std::string explanations;
  std::string truth;
  std::string catalog;
  std::string out_dir = ".";
  std::string methods;  // empty: methods present in the explanations
  std::string out_name = "results.csv";
  int k = 3;
  int resamples = 2000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Each command writes its files under out_dir and a short summary to log.
void cmd_gen_data(const GenDataOptions& opts, std::ostream& log);
void cmd_train(const TrainOptions& opts, std::ostream& log);
void cmd_alerts(const AlertsOptions& opts, std::ostream& log);
void cmd_explain(const ExplainOptions& opts, std::ostream& log);
void cmd_evaluate(const EvaluateOptions& opts, std::ostream& log);

}  // namespace driftscope::cli
