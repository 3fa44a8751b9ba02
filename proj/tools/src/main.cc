#include <cstdlib>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "commands.h"
#include "driftscope/errors.h"
#include <nlohmann/json.hpp>

namespace {

using driftscope::kHour;
namespace cli = driftscope::cli;

// Reads a JSON object as a CLI11 config: top-level keys are global options,
// nested objects named after a subcommand hold that command's options.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError("config", e.what());
    }
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    if (!j.is_object()) throw CLI::ConversionError("config", "expected a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        flatten(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

void add_rule_options(CLI::App* cmd, driftscope::AlertRule& rule, double& anchor_h,
                      double& horizon_h, double& interval_h) {
  cmd->add_option("--ratio-threshold", rule.ratio_threshold, "Alert when p1 >= ratio * p0")
      ->capture_default_str();
  cmd->add_option("--floor", rule.floor, "Minimum alerting probability")
      ->capture_default_str();
  cmd->add_option("--anchor-hours", anchor_h, "Anchor time after admission")
      ->capture_default_str();
  cmd->add_option("--horizon-hours", horizon_h, "Last check time")->capture_default_str();
  cmd->add_option("--check-interval-hours", interval_h, "Time between checks")
      ->capture_default_str();
  cmd->add_option("--min-new-events", rule.min_new_events,
                  "Drop alerts with fewer new events since the anchor")
      ->capture_default_str();
  cmd->add_flag("--all-alerts{false}", rule.first_alert_only,
                "Keep every alert rather than the first per episode");
}

void apply_rule_hours(driftscope::AlertRule& rule, double anchor_h, double horizon_h,
                      double interval_h) {
  rule.anchor_time_s = anchor_h * kHour;
  rule.horizon_s = horizon_h * kHour;
  rule.check_interval_s = interval_h * kHour;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribution of risk increases in recurrent risk models"};
  app.name("driftscope");
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; flags override its values");

  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = ".";
  std::string catalog;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Random seed")
        ->envname("DRIFTSCOPE_SEED")
        ->capture_default_str();
    cmd->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  };
  auto add_catalog = [&](CLI::App* cmd) {
    cmd->add_option("--catalog", catalog, "Feature catalog JSON (default: synthetic)")
        ->check(CLI::ExistingFile);
  };

  // gen-data
  cli::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic AKI corpus");
  add_common(gen_cmd);
  gen_cmd->add_option("--n-episodes", gen.scenario.n_episodes)->capture_default_str();
  gen_cmd->add_option("--deterioration-fraction", gen.scenario.deterioration_fraction)
      ->capture_default_str();
  gen_cmd->add_option("--episode-hours", gen.scenario.episode_hours)->capture_default_str();
  gen_cmd->add_option("--train-fraction", gen.scenario.train_fraction)
      ->capture_default_str();
  gen_cmd->add_option("--validation-fraction", gen.scenario.validation_fraction)
      ->capture_default_str();
  gen_cmd->add_option("--noise-scale", gen.scenario.noise_scale)->capture_default_str();

  // train
  cli::TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train the recurrent risk model");
  add_common(train_cmd);
  add_catalog(train_cmd);
  train_cmd->add_option("--events", tr.events, "Event log (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--eta", tr.model.eta, "Smoothing coefficient")
      ->capture_default_str();
  train_cmd->add_option("--hidden-size", tr.model.hidden_size)->capture_default_str();
  train_cmd->add_option("--learning-rate", tr.model.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch-size", tr.model.batch_size)->capture_default_str();
  train_cmd->add_option("--clip-norm", tr.model.clip_norm)->capture_default_str();
  train_cmd->add_option("--input-dropout", tr.model.input_dropout)->capture_default_str();
  train_cmd->add_option("--output-dropout", tr.model.output_dropout)
      ->capture_default_str();
  train_cmd->add_option("--recurrent-dropout", tr.model.recurrent_dropout)
      ->capture_default_str();
  train_cmd->add_option("--max-epochs", tr.model.max_epochs)->capture_default_str();
  train_cmd->add_option("--patience", tr.model.patience)->capture_default_str();
  train_cmd->add_flag("--no-attention{false}", tr.model.attention,
                      "Train without the attention head");
  train_cmd->add_option("--bins-per-feature", tr.bins.bins_per_feature)
      ->capture_default_str();

  // alerts
  cli::AlertsOptions al;
  double al_anchor = 12, al_horizon = 24, al_interval = 2;
  auto* alerts_cmd = app.add_subcommand("alerts", "Run the alert rule over risk series");
  add_common(alerts_cmd);
  add_catalog(alerts_cmd);
  alerts_cmd->add_option("--events", al.events)->required()->check(CLI::ExistingFile);
  alerts_cmd->add_option("--checkpoint", al.checkpoint)
      ->required()
      ->check(CLI::ExistingFile);
  alerts_cmd->add_option("--split", al.split, "train, validation, test or all")
      ->capture_default_str();
  alerts_cmd->add_option("--jobs", jobs)->capture_default_str();
  add_rule_options(alerts_cmd, al.rule, al_anchor, al_horizon, al_interval);

  // explain
  cli::ExplainOptions ex;
  double ex_anchor = 12, ex_horizon = 24, ex_interval = 2;
  auto* explain_cmd = app.add_subcommand(
      "explain", "Explain risk increases over checkpoint or alert windows");
  add_common(explain_cmd);
  add_catalog(explain_cmd);
  explain_cmd->add_option("--events", ex.events)->required()->check(CLI::ExistingFile);
  explain_cmd->add_option("--checkpoint", ex.checkpoint)
      ->required()
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--smoothed-checkpoint", ex.smoothed_checkpoint,
                          "Model used by smoothed_derivative")
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--bins", ex.bins, "Bin table for the statistic methods")
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--truth", ex.truth,
                          "Checkpoint windows (JSONL); without it the alert rule "
                          "selects windows")
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--methods", ex.methods, "Comma-separated list or 'all'")
      ->capture_default_str();
  explain_cmd->add_option("--k", ex.k)->capture_default_str();
  explain_cmd->add_option("--m", ex.m, "Integration steps")->capture_default_str();
  explain_cmd->add_option("--laplace-alpha", ex.laplace_alpha)->capture_default_str();
  explain_cmd->add_option("--split", ex.split)->capture_default_str();
  explain_cmd->add_option("--jobs", jobs)->capture_default_str();
  add_rule_options(explain_cmd, ex.rule, ex_anchor, ex_horizon, ex_interval);

  // evaluate
  cli::EvaluateOptions ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score explanations against truth");
  add_common(eval_cmd);
  add_catalog(eval_cmd);
  eval_cmd->add_option("--explanations", ev.explanations)
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--truth", ev.truth)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--methods", ev.methods, "Default: methods in the explanations");
  eval_cmd->add_option("--k", ev.k)->capture_default_str();
  eval_cmd->add_option("--resamples", ev.resamples)->capture_default_str();
  eval_cmd->add_option("--level", ev.level)->capture_default_str();
  eval_cmd->add_option("--output", ev.out_name, "Results file name")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (jobs < 1) throw driftscope::ConfigError("jobs", "must be at least 1");
    if (gen_cmd->parsed()) {
      gen.scenario.seed = seed;
      gen.out_dir = out_dir;
      cli::cmd_gen_data(gen, std::cout);
    } else if (train_cmd->parsed()) {
      tr.model.seed = seed;
      tr.out_dir = out_dir;
      tr.catalog = catalog;
      cli::cmd_train(tr, std::cout);
    } else if (alerts_cmd->parsed()) {
      apply_rule_hours(al.rule, al_anchor, al_horizon, al_interval);
      al.out_dir = out_dir;
      al.catalog = catalog;
      al.jobs = jobs;
      cli::cmd_alerts(al, std::cout);
    } else if (explain_cmd->parsed()) {
      apply_rule_hours(ex.rule, ex_anchor, ex_horizon, ex_interval);
      ex.seed = seed;
      ex.out_dir = out_dir;
      ex.catalog = catalog;
      ex.jobs = jobs;
      cli::cmd_explain(ex, std::cout);
    } else if (eval_cmd->parsed()) {
      ev.seed = seed;
      ev.out_dir = out_dir;
      ev.catalog = catalog;
      cli::cmd_evaluate(ev, std::cout);
    }
  } catch (const driftscope::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const driftscope::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const driftscope::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
