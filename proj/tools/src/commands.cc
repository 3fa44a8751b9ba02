#include "commands.h"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "driftscope/csv.h"
#include "driftscope/errors.h"
#include "driftscope/parallel.h"

namespace driftscope::cli {
namespace {

std::string path_in(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

FeatureCatalog load_catalog(const std::string& path) {
  if (path.empty()) return scenario_catalog(ScenarioConfig{});
  return FeatureCatalog::from_json(csv::read_file(path));
}

std::vector<EventSequence> load_events(const std::string& path,
                                       const FeatureCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open events file '" + path + "'");
  return parse_event_log(in, catalog);
}

Checkpoint load_checkpoint(const std::string& path, const FeatureCatalog& catalog) {
  return checkpoint_from_json(csv::read_file(path), catalog);
}

std::optional<Split> parse_split_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  try {
    return parse_split(s);
  } catch (const std::exception&) {
    throw ConfigError("split", "expected train, validation, test or all");
  }
}

std::string risk_series_csv(const std::vector<std::string>& ids,
                            const std::vector<RiskSeries>& risks) {
  std::string out = "episode,step,time_s,hours,p\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const RiskSeries& r = risks[i];
    for (int t = 0; t <= r.steps(); ++t) {
      const double time_s = t == 0 ? 0.0 : r.step_time[t - 1];
      out += csv::join({ids[i], std::to_string(t), csv::format_double(time_s),
                        csv::format_double(time_s / kHour, 8),
                        csv::format_double(r.at(t), 12)});
      out += '\n';
    }
  }
  return out;
}

std::vector<RiskSeries> risk_series_for(const EncodedCorpus& encoded,
                                        const ModelParams& params, int jobs) {
  std::vector<RiskSeries> risks(encoded.steps.size());
  parallel_for(static_cast<int>(risks.size()), jobs, [&](int i) {
    risks[i] = forward(params, encoded.steps[i]).risk;
  });
  return risks;
}

std::vector<std::string> ids_of(const EncodedCorpus& encoded) {
  std::vector<std::string> ids;
  for (const auto* seq : encoded.raw) ids.push_back(seq->episode_id);
  return ids;
}

// Re-reads written explanations and checks each row against its window.
void validate_explanations(const std::string& text, const FeatureCatalog& catalog,
                           const std::vector<GroundTruthEntry>& truth, int k) {
  std::istringstream in(text);
  const auto rows = explanations_from_csv(in, catalog);
  std::map<std::string, Window> windows;
  for (const auto& e : truth) windows[e.episode_id] = e.window;
  for (const auto& row : rows) {
    const auto it = windows.find(row.episode_id);
    if (it == windows.end()) {
      throw DataError("explanation for unknown window '" + row.episode_id + "'");
    }
    const auto& items = row.explanation.items;
    if (static_cast<int>(items.size()) > k) {
      throw DataError("explanation longer than k for '" + row.episode_id + "'");
    }
    std::set<int> features;
    for (const auto& item : items) {
      if (!it->second.contains(item.step)) {
        throw DataError("explanation step outside window for '" + row.episode_id + "'");
      }
      if (!features.insert(item.feature).second) {
        throw DataError("repeated feature in explanation for '" + row.episode_id + "'");
      }
    }
  }
}

}  // namespace

void cmd_gen_data(const GenDataOptions& opts, std::ostream& log) {
  opts.scenario.validate();
  const FeatureCatalog catalog = scenario_catalog(opts.scenario);
  const AkiFeatures aki = AkiFeatures::from_catalog(catalog);
  const auto corpus = generate_corpus(opts.scenario);

  std::vector<GroundTruthEntry> truth;
  int positive = 0;
  std::map<Split, int> per_split;
  for (const auto& seq : corpus) {
    ++per_split[seq.split];
    if (auto w = aki_window(seq, aki)) {
      ++positive;
      truth.push_back(ground_truth_set(seq, aki, *w));
    }
  }
  std::ostringstream events;
  write_event_log(events, corpus, catalog);
  csv::write_file_atomic(path_in(opts.out_dir, "events.jsonl"), events.str());
  csv::write_file_atomic(path_in(opts.out_dir, "truth.jsonl"),
                         truth_to_jsonl(truth, catalog));
  csv::write_file_atomic(path_in(opts.out_dir, "catalog.json"), catalog.to_json());
  log << "episodes: " << corpus.size() << " (train " << per_split[Split::kTrain]
      << ", validation " << per_split[Split::kValidation] << ", test "
      << per_split[Split::kTest] << ")\n"
      << "positive labels: " << positive << "\n";
}

void cmd_train(const TrainOptions& opts, std::ostream& log) {
  opts.model.validate();
  opts.bins.validate();
  const FeatureCatalog catalog = load_catalog(opts.catalog);
  const auto corpus = load_events(opts.events, catalog);
  const FeatureStats stats = fit_feature_stats(corpus, catalog.size());

  std::vector<EncodedEpisode> encoded;
  for (const auto& seq : corpus) {
    if (seq.events.empty() || seq.split == Split::kTest) continue;
    encoded.push_back({seq.episode_id, encode_steps(normalize(seq, stats), catalog),
                       seq.outcome, seq.split});
  }
  const TrainResult result = train(encoded, opts.model);
  const BinTable bins = fit_bins(corpus, catalog.size(), opts.bins);

  csv::write_file_atomic(path_in(opts.out_dir, "checkpoint.json"),
                         checkpoint_to_json(result.params, opts.model, catalog, stats));
  csv::write_file_atomic(path_in(opts.out_dir, "training_report.csv"),
                         result.report.to_csv());
  csv::write_file_atomic(path_in(opts.out_dir, "bins.json"), bins.to_json(catalog));
  log << "epochs: " << result.report.epochs.size()
      << ", best epoch: " << result.report.best_epoch << "\n";
  if (!result.report.epochs.empty()) {
    const auto& best = result.report.best_epoch > 0
                           ? result.report.epochs[result.report.best_epoch - 1]
                           : result.report.epochs.back();
    log << "validation loss: " << best.validation_loss
        << ", validation AUROC: " << best.validation_auroc << "\n";
  }
}

void cmd_alerts(const AlertsOptions& opts, std::ostream& log) {
  opts.rule.validate();
  const FeatureCatalog catalog = load_catalog(opts.catalog);
  const auto corpus = load_events(opts.events, catalog);
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint, catalog);
  const EncodedCorpus encoded =
      encode_corpus(corpus, catalog, ckpt.stats, parse_split_filter(opts.split));
  const auto ids = ids_of(encoded);
  const auto risks = risk_series_for(encoded, ckpt.params, opts.jobs);

  std::vector<std::pair<std::string, RiskSeries>> episodes;
  for (std::size_t i = 0; i < ids.size(); ++i) episodes.emplace_back(ids[i], risks[i]);
  const auto alerts = select_alert_cohort(episodes, opts.rule);
  csv::write_file_atomic(path_in(opts.out_dir, "alerts.csv"), alerts_to_csv(alerts));
  csv::write_file_atomic(path_in(opts.out_dir, "risk_series.csv"),
                         risk_series_csv(ids, risks));
  log << "episodes scanned: " << ids.size() << ", alerts: " << alerts.size() << "\n";
}

void cmd_explain(const ExplainOptions& opts, std::ostream& log) {
  if (opts.k < 1) throw ConfigError("k", "must be at least 1");
  if (opts.m < 1) throw ConfigError("m", "must be at least 1");
  if (opts.jobs < 1) throw ConfigError("jobs", "must be at least 1");
  const std::vector<Method> methods = parse_method_list(opts.methods);
  const FeatureCatalog catalog = load_catalog(opts.catalog);
  const auto corpus = load_events(opts.events, catalog);
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint, catalog);
  std::optional<Checkpoint> smoothed;
  if (!opts.smoothed_checkpoint.empty()) {
    smoothed = load_checkpoint(opts.smoothed_checkpoint, catalog);
  }
  std::optional<BinTable> bins;
  if (!opts.bins.empty()) bins = BinTable::from_json(csv::read_file(opts.bins), catalog);

  BenchmarkConfig config;
  config.methods = methods;
  config.split = parse_split_filter(opts.split);
  config.k = opts.k;
  config.m = opts.m;
  config.seed = opts.seed;
  config.laplace_alpha = opts.laplace_alpha;
  config.rule = opts.rule;
  config.jobs = opts.jobs;
  config.mode = opts.truth.empty() ? WindowMode::kAlertRule : WindowMode::kAkiCheckpoints;
  opts.rule.validate();

  const EncodedCorpus encoded = encode_corpus(corpus, catalog, ckpt.stats, config.split);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < encoded.raw.size(); ++i) {
    index[encoded.raw[i]->episode_id] = i;
  }

  std::vector<GroundTruthEntry> truth;
  std::vector<Alert> alerts;
  if (config.mode == WindowMode::kAkiCheckpoints) {
    std::ifstream in(opts.truth);
    if (!in) throw DataError("cannot open truth file '" + opts.truth + "'");
    for (auto& entry : truth_from_jsonl(in, catalog)) {
      const auto it = index.find(entry.episode_id);
      if (it == index.end()) continue;
      if (entry.window.t1 > encoded.steps[it->second].steps()) {
        throw DataError("truth window beyond episode '" + entry.episode_id + "'");
      }
      truth.push_back(std::move(entry));
    }
  } else {
    truth = benchmark_windows(encoded, catalog, ckpt.params, config, &alerts);
  }

  const ExplainContext ctx{&ckpt.params, smoothed ? &smoothed->params : nullptr,
                           bins ? &*bins : nullptr, opts.laplace_alpha, opts.m,
                           opts.seed};
  const int n_methods = static_cast<int>(methods.size());
  std::vector<ExplanationRow> rows(truth.size() * methods.size());
  parallel_for(static_cast<int>(truth.size()), opts.jobs, [&](int w) {
    const std::size_t i = index.at(truth[w].episode_id);
    for (int j = 0; j < n_methods; ++j) {
      rows[static_cast<std::size_t>(w) * n_methods + j] = {
          truth[w].episode_id, methods[j],
          explain_window(methods[j], ctx, *encoded.raw[i], encoded.steps[i],
                         truth[w].window, opts.k)};
    }
  });

  const std::string text = explanations_to_csv(rows, catalog);
  validate_explanations(text, catalog, truth, opts.k);

  std::vector<std::string> ids;
  std::vector<RiskSeries> risks;
  for (const auto& entry : truth) {
    const std::size_t i = index.at(entry.episode_id);
    ids.push_back(entry.episode_id);
    risks.push_back(forward(ckpt.params, encoded.steps[i]).risk);
  }

  csv::write_file_atomic(path_in(opts.out_dir, "explanations.csv"), text);
  csv::write_file_atomic(path_in(opts.out_dir, "windows.jsonl"),
                         truth_to_jsonl(truth, catalog));
  csv::write_file_atomic(path_in(opts.out_dir, "risk_series.csv"),
                         risk_series_csv(ids, risks));
  if (config.mode == WindowMode::kAlertRule) {
    csv::write_file_atomic(path_in(opts.out_dir, "alerts.csv"), alerts_to_csv(alerts));
  }
  log << "windows: " << truth.size() << ", methods: " << methods.size() << "\n";
}

void cmd_evaluate(const EvaluateOptions& opts, std::ostream& log) {
  if (opts.k < 1) throw ConfigError("k", "must be at least 1");
  if (opts.resamples < 1) throw ConfigError("resamples", "must be at least 1");
  if (!(opts.level > 0.0 && opts.level < 1.0)) {
    throw ConfigError("level", "must be in (0, 1)");
  }
  const FeatureCatalog catalog = load_catalog(opts.catalog);
  std::ifstream ex_in(opts.explanations);
  if (!ex_in) throw DataError("cannot open explanations '" + opts.explanations + "'");
  const auto rows = explanations_from_csv(ex_in, catalog);
  std::ifstream truth_in(opts.truth);
  if (!truth_in) throw DataError("cannot open truth file '" + opts.truth + "'");
  const auto truth = truth_from_jsonl(truth_in, catalog);

  std::vector<Method> methods;
  if (!opts.methods.empty()) {
    methods = parse_method_list(opts.methods);
  } else {
    for (const auto& row : rows) {
      if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) {
        methods.push_back(row.method);
      }
    }
  }
  if (methods.empty()) throw DataError("empty evaluation");

  const auto results =
      score_methods(methods, rows, truth, {opts.k, opts.resamples, opts.level, opts.seed});
  const std::string text = results_to_csv(results);
  csv::write_file_atomic(path_in(opts.out_dir, opts.out_name), text);
  log << text;
}

}  // namespace driftscope::cli
