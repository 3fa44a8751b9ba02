#include "driftscope/synth_eval.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>
#include <stdexcept>

#include "driftscope/csv.h"
#include "driftscope/errors.h"
#include "driftscope/parallel.h"
#include "driftscope/rng.h"
#include <nlohmann/json.hpp>

namespace driftscope {

using nlohmann::json;

std::vector<FeatureSpec> default_feature_specs() {
  // id, display, mean inter-arrival (h), population mean, population sd, noise sd
  return {
      {"creatinine", "Creatinine (mg/dl)", 4.0, 0.9, 0.15, 0.04},
      {"urine_rate", "Urine output (ml/h)", 2.0, 70.0, 12.0, 6.0},
      {"heart_rate", "Heart rate (bpm)", 1.0, 85.0, 12.0, 5.0},
      {"resp_rate", "Respiratory rate (/min)", 1.5, 18.0, 3.0, 2.0},
      {"temperature", "Temperature (C)", 3.0, 37.0, 0.4, 0.3},
      {"sbp", "Systolic BP (mmHg)", 1.5, 120.0, 15.0, 8.0},
      {"dbp", "Diastolic BP (mmHg)", 1.5, 70.0, 10.0, 6.0},
      {"spo2", "Oxygen saturation (%)", 1.5, 96.0, 1.5, 1.0},
      {"glucose", "Glucose (mg/dl)", 6.0, 120.0, 25.0, 15.0},
      {"potassium", "Potassium (mmol/l)", 8.0, 4.2, 0.4, 0.2},
      {"sodium", "Sodium (mmol/l)", 8.0, 139.0, 3.0, 1.5},
      {"wbc", "WBC count (K/ul)", 10.0, 9.0, 2.5, 1.0},
  };
}

void ScenarioConfig::validate() const {
  if (n_episodes < 0) throw ConfigError("n_episodes", "must be non-negative");
  if (!(deterioration_fraction >= 0.0 && deterioration_fraction <= 1.0)) {
    throw ConfigError("deterioration_fraction", "must be in [0, 1]");
  }
  if (!(episode_hours >= 24.0)) {
    throw ConfigError("episode_hours", "must cover at least 24 hours");
  }
  if (!(train_fraction > 0.0 && validation_fraction >= 0.0 &&
        train_fraction + validation_fraction <= 1.0)) {
    throw ConfigError("train_fraction", "split fractions must lie in [0, 1]");
  }
  if (!(noise_scale > 0.0 && noise_scale <= 1.5)) {
    throw ConfigError("noise_scale", "must be in (0, 1.5]");
  }
  std::set<std::string> ids;
  for (const auto& f : features) {
    if (!(f.mean_interarrival_h > 0.0)) {
      throw ConfigError("features." + f.id + ".mean_interarrival_h",
                        "must be positive");
    }
    ids.insert(f.id);
  }
  if (!ids.count("creatinine") || !ids.count("urine_rate")) {
    throw ConfigError("features", "must include creatinine and urine_rate");
  }
  if (features.size() < 10) {
    throw ConfigError("features", "need at least 8 distractor features");
  }
}

FeatureCatalog scenario_catalog(const ScenarioConfig& config) {
  std::vector<FeatureCatalog::Entry> entries;
  for (const auto& f : config.features) entries.push_back({f.id, f.display_name});
  return FeatureCatalog(std::move(entries));
}

AkiFeatures AkiFeatures::from_catalog(const FeatureCatalog& catalog) {
  return {catalog.require("creatinine"), catalog.require("urine_rate")};
}

namespace {

double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

// Uniform noise with the given standard deviation; bounded so that the
// labeler can never fire on a stationary patient.
double bounded_noise(Rng& rng, double sd) {
  const double half = std::sqrt(3.0) * sd;
  return rng.uniform(-half, half);
}

struct Trajectory {
  bool deteriorating = false;
  bool urine_drop = false;
  double onset_s = 0.0;
  double creatinine_slope_per_h = 0.0;
};

std::vector<Event> sample_events(const ScenarioConfig& cfg, const AkiFeatures& aki,
                                 const Trajectory& traj, std::uint64_t seed) {
  std::vector<Event> events;
  const double end_s = cfg.episode_hours * kHour;
  for (int f = 0; f < static_cast<int>(cfg.features.size()); ++f) {
    const FeatureSpec& spec = cfg.features[f];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(f)));
    double baseline = rng.normal(spec.population_mean, spec.population_sd);
    if (f == aki.creatinine) baseline = std::clamp(baseline, 0.5, 1.5);
    if (f == aki.urine) baseline = std::clamp(baseline, 45.0, 120.0);
    const double noise = spec.noise_sd * cfg.noise_scale;
    for (double t = rng.exponential(spec.mean_interarrival_h * kHour); t < end_s;
         t += rng.exponential(spec.mean_interarrival_h * kHour)) {
      const double time_s = std::round(t);
      double v = baseline + bounded_noise(rng, noise);
      const double since_onset_h = (time_s - traj.onset_s) / kHour;
      if (traj.deteriorating && since_onset_h > 0.0) {
        if (f == aki.creatinine) v += traj.creatinine_slope_per_h * since_onset_h;
        if (f == aki.urine && traj.urine_drop) v = rng.uniform(8.0, 22.0);
      }
      events.push_back(Event{time_s, f, round_cents(v), round_cents(v)});
    }
  }
  sort_events(events);
  return events;
}

}  // namespace

EventSequence generate_patient(const ScenarioConfig& config, int index) {
  if (index < 0 || index >= config.n_episodes) {
    throw std::invalid_argument("generate_patient: index out of range");
  }
  const FeatureCatalog catalog = scenario_catalog(config);
  const AkiFeatures aki = AkiFeatures::from_catalog(catalog);
  const std::uint64_t episode_seed =
      derive_seed(config.seed, static_cast<std::uint64_t>(index));
  Rng rng(episode_seed);

  EventSequence seq;
  char id[32];
  std::snprintf(id, sizeof(id), "ep%06d", index);
  seq.episode_id = id;

  Trajectory traj;
  traj.deteriorating = rng.uniform() < config.deterioration_fraction;
  const double u = rng.uniform();
  seq.split = u < config.train_fraction ? Split::kTrain
              : u < config.train_fraction + config.validation_fraction
                  ? Split::kValidation
                  : Split::kTest;
  traj.onset_s = rng.uniform(12.0, 22.0) * kHour;
  traj.urine_drop = traj.deteriorating && rng.uniform() < 0.5;
  traj.creatinine_slope_per_h = rng.uniform(0.04, 0.08);
  seq.outcome = traj.deteriorating;

  // Redraw the observation process until a deteriorating trajectory is
  // actually caught by the labeler (sparse sampling can miss it).
  for (std::uint64_t attempt = 1; attempt <= 64; ++attempt) {
    seq.events = sample_events(config, aki, traj, derive_seed(episode_seed, attempt));
    if (!traj.deteriorating) break;
    const auto c = first_positive_checkpoint(seq, aki);
    if (c && *c >= traj.onset_s) break;
  }
  return seq;
}

std::vector<EventSequence> generate_corpus(const ScenarioConfig& config) {
  config.validate();
  std::vector<EventSequence> corpus;
  corpus.reserve(config.n_episodes);
  for (int i = 0; i < config.n_episodes; ++i) {
    corpus.push_back(generate_patient(config, i));
  }
  return corpus;
}

bool aki_label(const EventSequence& seq, const AkiFeatures& features, double t) {
  const double eps = 1e-9;
  // Creatinine: ordered rise within (t - 48h, t].
  double running_min = INFINITY;
  for (const auto& e : seq.events) {
    if (e.time_s > t) break;
    if (e.feature != features.creatinine || e.time_s <= t - 48 * kHour) continue;
    if (e.raw_value - running_min >= kCreatinineRise - eps) return true;
    running_min = std::min(running_min, e.raw_value);
  }
  // Urine: trailing run of low observations covering >= 6 h up to t.
  int run = 0;
  double run_start = 0.0;
  for (const auto& e : seq.events) {
    if (e.time_s > t) break;
    if (e.feature != features.urine) continue;
    if (e.raw_value < kUrineThreshold) {
      if (run == 0) run_start = e.time_s;
      ++run;
    } else {
      run = 0;
    }
  }
  return run >= 2 && t - run_start >= kUrineHours * kHour - eps;
}

std::optional<double> first_positive_checkpoint(const EventSequence& seq,
                                                const AkiFeatures& features,
                                                double interval_s) {
  if (seq.events.empty()) return std::nullopt;
  const double end = seq.events.back().time_s;
  for (int n = 1; n * interval_s <= end; ++n) {
    if (aki_label(seq, features, n * interval_s)) return n * interval_s;
  }
  return std::nullopt;
}

GroundTruthEntry ground_truth_set(const EventSequence& seq,
                                  const AkiFeatures& features, Window window) {
  const int T = static_cast<int>(seq.events.size());
  if (window.t0 < 0 || window.t0 > window.t1 || window.t1 > T) {
    throw std::invalid_argument("ground_truth_set: invalid window");
  }
  GroundTruthEntry entry;
  entry.episode_id = seq.episode_id;
  entry.window = window;
  entry.t0_time_s = window.t0 > 0 ? seq.events[window.t0 - 1].time_s : 0.0;
  entry.t1_time_s = window.t1 > 0 ? seq.events[window.t1 - 1].time_s : 0.0;
  for (int t = window.t0 + 1; t <= window.t1; ++t) {
    const int f = seq.events[t - 1].feature;
    if (f == features.creatinine || f == features.urine) entry.items.push_back({t, f});
  }
  return entry;
}

std::optional<Window> aki_window(const EventSequence& seq,
                                 const AkiFeatures& features, double interval_s) {
  const auto c = first_positive_checkpoint(seq, features, interval_s);
  if (!c) return std::nullopt;
  std::vector<double> times;
  times.reserve(seq.events.size());
  for (const auto& e : seq.events) times.push_back(e.time_s);
  return Window{last_step_at_or_before(times, *c - interval_s),
                last_step_at_or_before(times, *c)};
}

std::string truth_to_jsonl(const std::vector<GroundTruthEntry>& truth,
                           const FeatureCatalog& catalog) {
  std::string out;
  for (const auto& e : truth) {
    json items = json::array();
    for (const auto& it : e.items) {
      items.push_back({{"step", it.step}, {"feature", catalog[it.feature].id}});
    }
    json rec = {{"episode", e.episode_id}, {"t0", e.window.t0},
                {"t1", e.window.t1},       {"t0_time", e.t0_time_s},
                {"t1_time", e.t1_time_s},  {"items", items},
                {"excluded", e.excluded()}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<GroundTruthEntry> truth_from_jsonl(std::istream& in,
                                               const FeatureCatalog& catalog) {
  std::vector<GroundTruthEntry> truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      GroundTruthEntry e;
      e.episode_id = rec.at("episode").get<std::string>();
      e.window = {rec.at("t0").get<int>(), rec.at("t1").get<int>()};
      e.t0_time_s = rec.at("t0_time").get<double>();
      e.t1_time_s = rec.at("t1_time").get<double>();
      for (const auto& it : rec.at("items")) {
        e.items.push_back({it.at("step").get<int>(),
                           catalog.require(it.at("feature").get<std::string>())});
      }
      truth.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw DataError("truth line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return truth;
}

PrecisionResult precision_at_k(const std::vector<Explanation>& explanations,
                               const std::vector<GroundTruthEntry>& truth, int k) {
  if (explanations.size() != truth.size()) {
    throw std::invalid_argument("precision_at_k: explanations and truth differ in length");
  }
  if (k < 1) throw std::invalid_argument("precision_at_k: k < 1");
  PrecisionResult result;
  double sum = 0.0;
  for (std::size_t w = 0; w < truth.size(); ++w) {
    if (truth[w].excluded()) continue;
    const auto& items = explanations[w].items;
    const int n = std::min<int>(k, static_cast<int>(items.size()));
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      const TruthItem key{items[i].step, items[i].feature};
      if (std::find(truth[w].items.begin(), truth[w].items.end(), key) !=
          truth[w].items.end()) {
        ++hits;
      }
    }
    const double precision = n > 0 ? static_cast<double>(hits) / n : 0.0;
    result.per_window.push_back(precision);
    result.included.push_back(static_cast<int>(w));
    sum += precision;
  }
  if (!result.per_window.empty()) {
    result.mean = sum / static_cast<double>(result.per_window.size());
  }
  return result;
}

namespace {

double sorted_quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                       int resamples, double level,
                                       std::uint64_t seed) {
  if (values.empty()) throw std::invalid_argument("bootstrap_ci: no values");
  if (resamples < 1 || !(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("bootstrap_ci: bad resamples or level");
  }
  const std::size_t n = values.size();
  if (n == 1) return {values[0], values[0]};
  Rng rng(seed);
  std::vector<double> means(resamples);
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[rng.below(n)];
    means[r] = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  return {sorted_quantile(means, tail), sorted_quantile(means, 1.0 - tail)};
}

double expected_random_precision(const StepSeries& steps,
                                 const GroundTruthEntry& truth, int k) {
  const Window w = truth.window;
  const auto incl = random_guess_inclusion(steps, w.t0, w.t1, k);
  std::set<int> distinct;
  for (int t = w.t0 + 1; t <= w.t1; ++t) distinct.insert(steps.step_feature[t - 1]);
  const int size = std::min<int>(k, static_cast<int>(distinct.size()));
  if (size == 0) return 0.0;
  double hits = 0.0;
  for (const auto& item : truth.items) hits += incl[item.step - 1];
  return hits / size;
}

namespace {

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::kRandom, "random"},
    {Method::kGradient, "gradient"},
    {Method::kAttention, "attention"},
    {Method::kSmoothedDerivative, "smoothed_derivative"},
    {Method::kOddsRatioDiffed, "odds_ratio_diffed"},
    {Method::kRothmanDiffed, "rothman_diffed"},
    {Method::kOddsRatioRestricted, "odds_ratio_restricted"},
    {Method::kIntegratedGradients, "integrated_gradients"},
};

}  // namespace

std::string_view method_name(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& [m, n] : kMethodNames) {
    if (n == name) return m;
  }
  std::string available;
  for (const auto& [m, n] : kMethodNames) {
    if (!available.empty()) available += ", ";
    available += n;
  }
  throw ConfigError("methods", "unknown method '" + std::string(name) +
                                   "'; available: " + available);
}

std::vector<Method> all_methods() {
  std::vector<Method> out;
  for (const auto& [m, n] : kMethodNames) out.push_back(m);
  return out;
}

std::vector<Method> parse_method_list(std::string_view comma_separated) {
  if (comma_separated == "all") return all_methods();
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= comma_separated.size()) {
    const auto end = std::min(comma_separated.find(',', start), comma_separated.size());
    const auto name = comma_separated.substr(start, end - start);
    if (!name.empty()) {
      const Method m = parse_method(name);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    start = end + 1;
  }
  if (out.empty()) throw ConfigError("methods", "no method given");
  return out;
}

Explanation explain_window(Method method, const ExplainContext& ctx,
                           const EventSequence& raw, const StepSeries& steps,
                           Window window, int k) {
  const auto [t0, t1] = window;
  if (t0 >= t1) return Explanation{{}, true};
  auto need_bins = [&]() -> const BinTable& {
    if (!ctx.bins) throw ConfigError("bins", "statistic methods need a bin table");
    return *ctx.bins;
  };
  auto stat = [&](Statistic s) {
    StatWeightConfig cfg;
    cfg.statistic = s;
    cfg.laplace_alpha = ctx.laplace_alpha;
    return stat_weights(steps, raw, need_bins(), cfg);
  };
  switch (method) {
    case Method::kRandom:
      return random_guess(steps, t0, t1, k, derive_seed(ctx.seed, raw.episode_id));
    case Method::kGradient:
      return top_k_explanations(
          time_restrict(grad_wrt_inputs(*ctx.params, steps, t1), t0, t1), steps, k);
    case Method::kAttention: {
      AttentionResult att = attention_forward(*ctx.params, steps.prefix(t1));
      AttributionMatrix full;
      full.method = "attention";
      full.a = Eigen::MatrixXd::Zero(steps.dim(), steps.steps());
      full.a.leftCols(t1) = att.attribution.a;
      return top_k_explanations(time_restrict(full, t0, t1), steps, k);
    }
    case Method::kSmoothedDerivative: {
      const ModelParams& p = ctx.smoothed ? *ctx.smoothed : *ctx.params;
      const ForwardResult fwd = forward(p, steps);
      return top_k_explanations(
          time_restrict(discrete_time_derivatives(fwd.risk, steps), t0, t1), steps,
          k);
    }
    case Method::kOddsRatioDiffed:
      return top_k_explanations(
          time_diff(stat(Statistic::kOddsRatio), steps, t0, t1, kNeutralRatio),
          steps, k);
    case Method::kRothmanDiffed:
      return top_k_explanations(
          time_diff(stat(Statistic::kRothman), steps, t0, t1, kNeutralRatio), steps,
          k);
    case Method::kOddsRatioRestricted:
      return top_k_explanations(time_restrict(stat(Statistic::kOddsRatio), t0, t1),
                                steps, k);
    case Method::kIntegratedGradients:
      return top_k_explanations(
          integrated_gradients(RecurrentRisk(*ctx.params), steps, t0, t1, ctx.m),
          steps, k);
  }
  throw std::logic_error("explain_window: unhandled method");
}

std::string explanations_to_csv(const std::vector<ExplanationRow>& rows,
                                const FeatureCatalog& catalog) {
  std::string out = "episode,method,rank,step,time_s,feature,raw_value,weight\n";
  for (const auto& row : rows) {
    int rank = 0;
    for (const auto& it : row.explanation.items) {
      out += csv::join({row.episode_id, std::string(method_name(row.method)),
                        std::to_string(++rank), std::to_string(it.step),
                        csv::format_double(it.time_s),
                        catalog[it.feature].id, csv::format_double(it.raw_value),
                        csv::format_double(it.weight, 12)});
      out += '\n';
    }
  }
  return out;
}

std::vector<ExplanationRow> explanations_from_csv(std::istream& in,
                                                  const FeatureCatalog& catalog) {
  const csv::Table table = csv::read(in);
  const auto c_ep = table.column("episode"), c_m = table.column("method"),
             c_rank = table.column("rank"), c_step = table.column("step"),
             c_time = table.column("time_s"), c_f = table.column("feature"),
             c_raw = table.column("raw_value"), c_w = table.column("weight");
  std::vector<ExplanationRow> rows;
  try {
    for (const auto& r : table.rows) {
      const Method m = parse_method(r[c_m]);
      if (rows.empty() || rows.back().episode_id != r[c_ep] || rows.back().method != m) {
        rows.push_back({r[c_ep], m, {}});
      }
      auto& items = rows.back().explanation.items;
      if (std::stoi(r[c_rank]) != static_cast<int>(items.size()) + 1) {
        throw DataError("explanations: ranks out of order for episode '" + r[c_ep] + "'");
      }
      items.push_back({std::stoi(r[c_step]), catalog.require(r[c_f]),
                       std::stod(r[c_time]), std::stod(r[c_raw]), std::stod(r[c_w])});
    }
  } catch (const std::invalid_argument&) {
    throw DataError("explanations: malformed numeric field");
  } catch (const std::out_of_range&) {
    throw DataError("explanations: numeric field out of range");
  }
  return rows;
}

std::vector<MethodResult> score_methods(const std::vector<Method>& methods,
                                        const std::vector<ExplanationRow>& rows,
                                        const std::vector<GroundTruthEntry>& truth,
                                        const ScoringConfig& config) {
  std::map<std::pair<std::string, Method>, const Explanation*> lookup;
  for (const auto& row : rows) lookup[{row.episode_id, row.method}] = &row.explanation;
  std::vector<MethodResult> results;
  for (Method m : methods) {
    std::vector<Explanation> per_window(truth.size());
    for (std::size_t w = 0; w < truth.size(); ++w) {
      auto it = lookup.find({truth[w].episode_id, m});
      if (it != lookup.end()) per_window[w] = *it->second;
    }
    const PrecisionResult p = precision_at_k(per_window, truth, config.k);
    if (p.per_window.empty()) throw DataError("empty evaluation");
    const auto [lo, hi] = bootstrap_ci(
        p.per_window, config.resamples, config.level,
        derive_seed(config.seed, std::string(method_name(m)) + "@" +
                                     std::to_string(config.k)));
    results.push_back({m, config.k, p.mean, lo, hi,
                       static_cast<int>(p.per_window.size())});
  }
  return results;
}

std::string results_to_csv(const std::vector<MethodResult>& results) {
  std::string out = "method,k,mean_precision,ci_lo,ci_hi,n_windows\n";
  for (const auto& r : results) {
    out += csv::join({std::string(method_name(r.method)), std::to_string(r.k),
                      csv::format_double(r.mean_precision, 6),
                      csv::format_double(r.ci_lo, 6), csv::format_double(r.ci_hi, 6),
                      std::to_string(r.n_windows)});
    out += '\n';
  }
  return out;
}

EncodedCorpus encode_corpus(const std::vector<EventSequence>& corpus,
                            const FeatureCatalog& catalog,
                            const FeatureStats& stats, std::optional<Split> split) {
  EncodedCorpus out;
  for (const auto& seq : corpus) {
    if (split && seq.split != *split) continue;
    if (seq.events.empty()) continue;
    out.raw.push_back(&seq);
    out.steps.push_back(encode_steps(normalize(seq, stats), catalog));
  }
  return out;
}

std::vector<GroundTruthEntry> benchmark_windows(const EncodedCorpus& encoded,
                                                const FeatureCatalog& catalog,
                                                const ModelParams& params,
                                                const BenchmarkConfig& config,
                                                std::vector<Alert>* alerts) {
  const AkiFeatures aki = AkiFeatures::from_catalog(catalog);
  std::vector<GroundTruthEntry> truth;
  if (config.mode == WindowMode::kAkiCheckpoints) {
    for (std::size_t i = 0; i < encoded.raw.size(); ++i) {
      if (auto w = aki_window(*encoded.raw[i], aki, config.checkpoint_interval_s)) {
        truth.push_back(ground_truth_set(*encoded.raw[i], aki, *w));
      }
    }
    return truth;
  }
  const int n = static_cast<int>(encoded.raw.size());
  std::vector<std::pair<std::string, RiskSeries>> risks(n);
  parallel_for(n, config.jobs, [&](int i) {
    risks[i] = {encoded.raw[i]->episode_id, forward(params, encoded.steps[i]).risk};
  });
  const std::vector<Alert> cohort = select_alert_cohort(risks, config.rule);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < encoded.raw.size(); ++i) {
    index[encoded.raw[i]->episode_id] = i;
  }
  for (const auto& a : cohort) {
    truth.push_back(ground_truth_set(*encoded.raw[index.at(a.episode_id)], aki,
                                     Window{a.t0, a.t1}));
  }
  if (alerts) *alerts = cohort;
  return truth;
}

BenchmarkOutput run_benchmark(const std::vector<EventSequence>& corpus,
                              const FeatureCatalog& catalog,
                              const FeatureStats& stats, const ModelParams& params,
                              const ModelParams* smoothed, const BinTable* bins,
                              const BenchmarkConfig& config) {
  const EncodedCorpus encoded = encode_corpus(corpus, catalog, stats, config.split);
  BenchmarkOutput out;
  out.truth = benchmark_windows(encoded, catalog, params, config);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < encoded.raw.size(); ++i) {
    index[encoded.raw[i]->episode_id] = i;
  }
  ExplainContext ctx{&params, smoothed, bins, config.laplace_alpha, config.m,
                     config.seed};
  const int n_windows = static_cast<int>(out.truth.size());
  const int n_methods = static_cast<int>(config.methods.size());
  std::vector<ExplanationRow> rows(static_cast<std::size_t>(n_windows) * n_methods);
  std::vector<double> expected(n_windows, -1.0);
  parallel_for(n_windows, config.jobs, [&](int w) {
    const GroundTruthEntry& truth = out.truth[w];
    const std::size_t i = index.at(truth.episode_id);
    for (int j = 0; j < n_methods; ++j) {
      rows[static_cast<std::size_t>(w) * n_methods + j] = {
          truth.episode_id, config.methods[j],
          explain_window(config.methods[j], ctx, *encoded.raw[i], encoded.steps[i],
                         truth.window, config.k)};
    }
    if (!truth.excluded()) {
      expected[w] = expected_random_precision(encoded.steps[i], truth, config.k);
    }
  });
  out.rows = std::move(rows);

  double sum = 0.0;
  int count = 0;
  for (double e : expected) {
    if (e >= 0.0) {
      sum += e;
      ++count;
    }
  }
  out.expected_random_precision = count ? sum / count : 0.0;
  out.results = score_methods(config.methods, out.rows, out.truth,
                              {config.k, config.resamples, config.level, config.seed});
  return out;
}

}  // namespace driftscope
