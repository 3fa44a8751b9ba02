#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "driftscope/alerts.h"
#include "driftscope/attribution.h"
#include "driftscope/events.h"
#include "driftscope/seqmodel.h"
#include "driftscope/stats_attr.h"

namespace driftscope {

inline constexpr double kHour = 3600.0;

// One synthetic lab or vital. Each patient draws a baseline from
// N(population_mean, population_sd); observations add noise.
struct FeatureSpec {
  std::string id;
  std::string display_name;
  double mean_interarrival_h = 1.0;
  double population_mean = 0.0;
  double population_sd = 0.0;
  double noise_sd = 0.0;
};

std::vector<FeatureSpec> default_feature_specs();

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int n_episodes = 2000;
  double deterioration_fraction = 0.3;
  double episode_hours = 36.0;
  double train_fraction = 0.8;
  double validation_fraction = 0.1;  // the rest is test
  double noise_scale = 1.0;          // multiplies every noise level, <= 1.5
  std::vector<FeatureSpec> features = default_feature_specs();

  void validate() const;
};

FeatureCatalog scenario_catalog(const ScenarioConfig& config);

struct AkiFeatures {
  int creatinine = -1;
  int urine = -1;
  static AkiFeatures from_catalog(const FeatureCatalog& catalog);
};

inline constexpr double kCreatinineRise = 0.3;   // mg/dl within 48 h
inline constexpr double kUrineThreshold = 25.0;  // ml/h
inline constexpr double kUrineHours = 6.0;
inline constexpr double kCheckpointInterval = 3 * kHour;

// Deterministic in (config.seed, index). Deteriorating episodes carry a
// creatinine ramp and, for half of them, a urine-rate drop, starting at a
// uniform onset in [12 h, 22 h].
EventSequence generate_patient(const ScenarioConfig& config, int index);
std::vector<EventSequence> generate_corpus(const ScenarioConfig& config);

// KDIGO subset on raw values at time t (seconds):
//  - some creatinine value in (t-48h, t] exceeds an earlier one in the same
//    window by >= 0.3 mg/dl, or
//  - the trailing run of urine-rate observations at or before t is entirely
//    below 25 ml/h, has >= 2 observations, and started >= 6 h before t.
bool aki_label(const EventSequence& seq, const AkiFeatures& features, double t);

// First 3-hourly checkpoint with a positive label, within the episode.
std::optional<double> first_positive_checkpoint(
    const EventSequence& seq, const AkiFeatures& features,
    double interval_s = kCheckpointInterval);

struct TruthItem {
  int step = 0;
  int feature = 0;
  friend bool operator==(const TruthItem&, const TruthItem&) = default;
};

struct GroundTruthEntry {
  std::string episode_id;
  Window window;
  double t0_time_s = 0.0;
  double t1_time_s = 0.0;
  std::vector<TruthItem> items;

  bool excluded() const { return items.empty(); }
};

GroundTruthEntry ground_truth_set(const EventSequence& seq,
                                  const AkiFeatures& features, Window window);

// Window (t0, t1] for the first positive checkpoint c: t1 is the last step
// at or before c, t0 the last step at or before c - interval.
std::optional<Window> aki_window(const EventSequence& seq,
                                 const AkiFeatures& features,
                                 double interval_s = kCheckpointInterval);

std::string truth_to_jsonl(const std::vector<GroundTruthEntry>& truth,
                           const FeatureCatalog& catalog);
std::vector<GroundTruthEntry> truth_from_jsonl(std::istream& in,
                                               const FeatureCatalog& catalog);

struct PrecisionResult {
  double mean = 0.0;
  std::vector<double> per_window;  // included windows only
  std::vector<int> included;       // their indices into the inputs
};

// Per window: |selected ∩ truth| / min(k, |selected|), or 0 for an empty
// selection. Only the first k items of each explanation count. Windows with
// empty truth are skipped.
PrecisionResult precision_at_k(const std::vector<Explanation>& explanations,
                               const std::vector<GroundTruthEntry>& truth,
                               int k);

// Percentile bootstrap of the mean over windows.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                       int resamples, double level,
                                       std::uint64_t seed);

// Expected precision@k of random_guess on one window.
double expected_random_precision(const StepSeries& steps,
                                 const GroundTruthEntry& truth, int k);

enum class Method {
  kRandom,
  kGradient,
  kAttention,
  kSmoothedDerivative,
  kOddsRatioDiffed,
  kRothmanDiffed,
  kOddsRatioRestricted,
  kIntegratedGradients,
};

std::string_view method_name(Method method);
// Throws ConfigError listing the available names.
Method parse_method(std::string_view name);
std::vector<Method> all_methods();
std::vector<Method> parse_method_list(std::string_view comma_separated);

struct ExplainContext {
  const ModelParams* params = nullptr;
  const ModelParams* smoothed = nullptr;  // falls back to params
  const BinTable* bins = nullptr;         // required by statistic methods
  double laplace_alpha = 0.5;
  int m = 64;
  std::uint64_t seed = 0;
};

Explanation explain_window(Method method, const ExplainContext& ctx,
                           const EventSequence& raw, const StepSeries& steps,
                           Window window, int k);

struct ExplanationRow {
  std::string episode_id;
  Method method;
  Explanation explanation;
};

std::string explanations_to_csv(const std::vector<ExplanationRow>& rows,
                                const FeatureCatalog& catalog);
std::vector<ExplanationRow> explanations_from_csv(std::istream& in,
                                                  const FeatureCatalog& catalog);

struct MethodResult {
  Method method;
  int k = 0;
  double mean_precision = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n_windows = 0;
};

struct ScoringConfig {
  int k = 3;
  int resamples = 2000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Scores each method over the truth windows. An episode with no rows for a
// method scores as an empty selection.
std::vector<MethodResult> score_methods(const std::vector<Method>& methods,
                                        const std::vector<ExplanationRow>& rows,
                                        const std::vector<GroundTruthEntry>& truth,
                                        const ScoringConfig& config);

std::string results_to_csv(const std::vector<MethodResult>& results);

enum class WindowMode { kAkiCheckpoints, kAlertRule };

struct BenchmarkConfig {
  std::vector<Method> methods = all_methods();
  WindowMode mode = WindowMode::kAkiCheckpoints;
  AlertRule rule;
  double checkpoint_interval_s = kCheckpointInterval;
  std::optional<Split> split = Split::kTest;  // nullopt: every split
  int k = 3;
  int m = 64;
  std::uint64_t seed = 0;
  int resamples = 2000;
  double level = 0.95;
  double laplace_alpha = 0.5;
  int jobs = 1;
};

struct EncodedCorpus {
  std::vector<const EventSequence*> raw;
  std::vector<StepSeries> steps;
};

// Normalizes and encodes the episodes of the requested split.
EncodedCorpus encode_corpus(const std::vector<EventSequence>& corpus,
                            const FeatureCatalog& catalog,
                            const FeatureStats& stats,
                            std::optional<Split> split);

// Evaluation windows with their ground truth. In alert mode the rule runs
// on the model's risk series.
std::vector<GroundTruthEntry> benchmark_windows(const EncodedCorpus& encoded,
                                                const FeatureCatalog& catalog,
                                                const ModelParams& params,
                                                const BenchmarkConfig& config,
                                                std::vector<Alert>* alerts = nullptr);

struct BenchmarkOutput {
  std::vector<GroundTruthEntry> truth;
  std::vector<ExplanationRow> rows;
  std::vector<MethodResult> results;
  // Mean over included windows of the exact random-guess expectation.
  double expected_random_precision = 0.0;
};

BenchmarkOutput run_benchmark(const std::vector<EventSequence>& corpus,
                              const FeatureCatalog& catalog,
                              const FeatureStats& stats,
                              const ModelParams& params,
                              const ModelParams* smoothed, const BinTable* bins,
                              const BenchmarkConfig& config);

}  // namespace driftscope
