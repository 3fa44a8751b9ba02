#pragma once

#include <cstdlib>
#include <sstream>
#include <string>

#include "commands.h"
#include "driftscope/csv.h"

namespace driftscope::testing {

// Small seeded end-to-end run through the command layer: generate, train,
// explain with every method, evaluate. Returns the results CSV.
inline std::string run_golden_pipeline(const std::string& dir, int jobs = 1) {
  std::ostringstream log;
  cli::GenDataOptions gen;
  gen.scenario.seed = 21;
  gen.scenario.n_episodes = 150;
  gen.scenario.deterioration_fraction = 0.5;
  gen.scenario.train_fraction = 0.5;
  gen.scenario.validation_fraction = 0.2;
  gen.out_dir = dir;
  cli::cmd_gen_data(gen, log);

  cli::TrainOptions tr;
  tr.events = dir + "/events.jsonl";
  tr.out_dir = dir;
  tr.model.hidden_size = 8;
  tr.model.max_epochs = 3;
  tr.model.seed = 21;
  cli::cmd_train(tr, log);

  cli::ExplainOptions ex;
  ex.events = tr.events;
  ex.checkpoint = dir + "/checkpoint.json";
  ex.bins = dir + "/bins.json";
  ex.truth = dir + "/truth.jsonl";
  ex.out_dir = dir;
  ex.m = 16;
  ex.seed = 21;
  ex.jobs = jobs;
  cli::cmd_explain(ex, log);

  cli::EvaluateOptions ev;
  ev.explanations = dir + "/explanations.csv";
  ev.truth = dir + "/windows.jsonl";
  ev.out_dir = dir;
  ev.resamples = 500;
  ev.seed = 21;
  cli::cmd_evaluate(ev, log);
  return csv::read_file(dir + "/results.csv");
}

inline std::string golden_path() {
  return std::string(DRIFTSCOPE_GOLDEN_DIR) + "/results.csv";
}

}  // namespace driftscope::testing
