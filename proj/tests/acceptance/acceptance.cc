// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. argv[1] is the golden directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "driftscope/alerts.h"
#include "driftscope/attribution.h"
#include "driftscope/csv.h"
#include "driftscope/lds_oracle.h"
#include "driftscope/seqmodel.h"
#include "driftscope/synth_eval.h"
#include "fixtures.h"
#include "pipeline.h"

namespace ds = driftscope;
using ds::testing::random_matrix;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::printf("criterion %d %-34s %s  %s\n", id, name.c_str(), o.pass ? "PASS" : "FAIL",
              o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// 1. Closed-form LDS gradients against quad-precision central differences,
// plus completeness of the midpoint integrated gradient.
Outcome lds_fidelity() {
  const auto start = Clock::now();
  ds::Rng rng(101);
  double worst_fd = 0.0, worst_gap = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + static_cast<int>(rng.below(5));
    const int d = 1 + static_cast<int>(rng.below(5));
    const int T = 1 + static_cast<int>(rng.below(20));
    const auto sys = ds::testing::random_system(rng, n, d, rep % 2 == 0);
    const Eigen::MatrixXd x = random_matrix(rng, d, T);
    const Eigen::MatrixXd b = random_matrix(rng, d, T);
    const auto trace = ds::lds::lds_run(sys, x);
    for (int t1 = 1; t1 <= T; ++t1) {
      for (int t = 1; t <= t1; ++t) {
        const Eigen::VectorXd g = ds::lds::lds_input_gradient(sys, trace, t, t1);
        for (int i = 0; i < d; ++i) {
          const double fd = ds::testing::lds_central_difference(sys, x, i, t, t1, 1e-6);
          worst_fd = std::max(worst_fd, ds::testing::rel_error(g(i), fd, 1e-12));
        }
      }
      const double gap = ds::lds::lds_integrated_gradient(sys, b, x, t1).sum() -
                         (trace.risk[t1 - 1] - ds::lds::lds_run(sys, b).risk[t1 - 1]);
      worst_gap = std::max(worst_gap, std::abs(gap));
    }
  }
  const double secs = seconds_since(start);
  return {worst_fd < 1e-6 && worst_gap < 1e-9 && secs < 10.0,
          fmt("max rel %.2e, max gap %.2e, %.1fs", worst_fd, worst_gap, secs)};
}

// 2. BPTT against central differences of the training objective.
double bptt_worst(std::uint64_t seed, int hidden, int T, int nf, bool attention, double eta,
                  bool dropout) {
  ds::Rng rng(seed);
  const auto steps = ds::testing::random_steps(rng, T, nf);
  const auto params = ds::testing::random_params(rng, steps.dim(), hidden, attention);
  const bool outcome = rng.bernoulli(0.5);
  std::optional<ds::DropoutMasks> masks;
  if (dropout) {
    ds::ModelConfig c;
    c.hidden_size = hidden;
    c.input_dropout = c.output_dropout = c.recurrent_dropout = 0.2;
    masks = ds::sample_dropout_masks(c, steps.dim(), hidden, T, rng);
  }
  const ds::DropoutMasks* mp = masks ? &*masks : nullptr;
  const auto fwd = ds::forward(params, steps, mp);
  const auto g = ds::training_backward(params, fwd, steps, outcome, eta);
  auto objective = [&](const ds::ModelParams& p, const ds::StepSeries& s) {
    return ds::training_objective(ds::forward(p, s, mp), outcome, eta);
  };

  const double h = 1e-5;
  double worst = 0.0;
  const Eigen::VectorXd flat = params.flatten();
  const Eigen::VectorXd gflat = g.params.flatten();
  ds::ModelParams work = params;
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Eigen::VectorXd v = flat;
    v(i) += h;
    work.assign(v);
    const double up = objective(work, steps);
    v(i) -= 2 * h;
    work.assign(v);
    const double down = objective(work, steps);
    worst = std::max(worst, ds::testing::rel_error(gflat(i), (up - down) / (2 * h), 1e-6));
  }
  for (int t = 0; t < T; ++t) {
    for (int r = 0; r < steps.dim(); ++r) {
      ds::StepSeries s = steps;
      s.x(r, t) += h;
      const double up = objective(params, s);
      s.x(r, t) -= 2 * h;
      const double down = objective(params, s);
      worst = std::max(worst, ds::testing::rel_error(g.inputs(r, t), (up - down) / (2 * h), 1e-6));
    }
  }
  return worst;
}

Outcome bptt_correctness() {
  const auto start = Clock::now();
  double worst = 0.0;
  const int configs = 24;
  for (int c = 0; c < configs; ++c) {
    const int hidden = 2 + c % 3;
    const int T = 3 + c % 6;
    const int nf = 1 + c % 3;
    const bool attention = c % 2 == 0;
    const double eta = (c % 4 == 1) ? 0.2 : (c % 4 == 3 ? 0.005 : 0.0);
    const bool dropout = c % 3 == 2;
    worst = std::max(worst, bptt_worst(200 + c, hidden, T, nf, attention, eta, dropout));
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 60.0,
          fmt("%.0f configs, max rel %.2e, %.1fs", configs, worst, secs)};
}

// Shared full-size setup for criteria 3 to 6.
struct Trained {
  ds::ScenarioConfig scenario;
  ds::FeatureCatalog catalog;
  std::vector<ds::EventSequence> corpus;
  ds::FeatureStats stats;
  std::vector<ds::EncodedEpisode> encoded;  // train + validation
  ds::ModelConfig model;
  ds::ModelParams params;
};

Trained build_trained() {
  Trained tr;
  tr.scenario.seed = 7;
  tr.scenario.n_episodes = 2000;
  tr.scenario.deterioration_fraction = 0.5;
  tr.scenario.train_fraction = 0.6;
  tr.scenario.validation_fraction = 0.1;
  tr.catalog = ds::scenario_catalog(tr.scenario);
  tr.corpus = ds::generate_corpus(tr.scenario);
  tr.stats = ds::fit_feature_stats(tr.corpus, tr.catalog.size());
  for (const auto& seq : tr.corpus) {
    if (seq.events.empty() || seq.split == ds::Split::kTest) continue;
    tr.encoded.push_back({seq.episode_id,
                          ds::encode_steps(ds::normalize(seq, tr.stats), tr.catalog),
                          seq.outcome, seq.split});
  }
  tr.model.hidden_size = 32;
  tr.model.seed = 0;
  tr.params = ds::train(tr.encoded, tr.model).params;
  return tr;
}

// 3. Discrete-time derivative weights telescope to the risk change.
Outcome telescoping(const Trained& tr) {
  ds::ScenarioConfig sc = tr.scenario;
  sc.seed = 303;
  sc.n_episodes = 200;
  const auto corpus = ds::generate_corpus(sc);
  double worst = 0.0;
  int episodes = 0;
  for (const auto& seq : corpus) {
    if (seq.events.empty()) continue;
    ++episodes;
    const auto steps = ds::encode_steps(ds::normalize(seq, tr.stats), tr.catalog);
    const auto risk = ds::forward(tr.params, steps).risk;
    const auto a = ds::discrete_time_derivatives(risk, steps);
    const int T = steps.steps();
    std::vector<double> col(T + 1, 0.0);
    for (int t = 1; t <= T; ++t) col[t] = a.a.col(t - 1).sum();
    // Every window starting at 0, a third and half way, to every later end.
    for (int t0 : {0, T / 3, T / 2}) {
      double sum = 0.0;
      for (int t1 = t0 + 1; t1 <= T; ++t1) {
        sum += col[t1];
        worst = std::max(worst, std::abs(sum - (risk.at(t1) - risk.at(t0))));
      }
    }
  }
  return {worst <= 1e-12, fmt("%.0f episodes, max error %.2e", episodes, worst)};
}

// 4. Integrated-gradient completeness on the trained model.
Outcome ig_completeness(const Trained& tr, const std::vector<ds::GroundTruthEntry>& windows,
                        const ds::EncodedCorpus& encoded) {
  const ds::RecurrentRisk model(tr.params);
  const std::vector<int> ms{8, 32, 128, 512};
  std::vector<double> worst(ms.size(), 0.0);
  bool monotone = true;
  int used = 0;
  for (std::size_t w = 0; w < windows.size() && used < 20; ++w) {
    const auto& entry = windows[w];
    std::size_t idx = 0;
    while (idx < encoded.raw.size() && encoded.raw[idx]->episode_id != entry.episode_id) ++idx;
    if (idx == encoded.raw.size()) continue;
    ++used;
    const auto& steps = encoded.steps[idx];
    const int t0 = entry.window.t0, t1 = entry.window.t1;
    const auto baseline = ds::build_carry_forward_baseline(steps, t0);
    const double target = model.risk_at(steps, t1) - model.risk_at(baseline, t1);
    double prev = INFINITY;
    for (std::size_t j = 0; j < ms.size(); ++j) {
      const auto a = ds::integrated_gradients(model, steps, t0, t1, ms[j]);
      const double gap = std::abs(a.a.sum() - target);
      worst[j] = std::max(worst[j], gap);
      // Gaps near rounding level are treated as equal.
      if (gap > prev + 1e-12) monotone = false;
      prev = gap;
    }
  }
  return {used == 20 && worst[2] < 1e-3 && monotone,
          fmt("max gap m=8 %.2e, m=32 %.2e, m=128 %.2e, m=512 %.2e", worst[0], worst[1],
              worst[2], worst[3]) +
              (monotone ? ", non-increasing" : ", NOT non-increasing")};
}

// 5. Smoothing lowers the roughness of validation risk series.
double validation_roughness(const Trained& tr, const ds::ModelParams& params) {
  double total = 0.0;
  int count = 0;
  for (const auto& ep : tr.encoded) {
    if (ep.split != ds::Split::kValidation) continue;
    const auto risk = ds::forward(params, ep.steps).risk;
    for (int t = 2; t <= risk.steps(); ++t) {
      const double d = risk.at(t) - risk.at(t - 1);
      total += d * d;
      ++count;
    }
  }
  return total / std::max(count, 1);
}

Outcome smoothing_effect(const Trained& tr) {
  ds::ModelConfig smooth = tr.model;
  smooth.eta = 0.005;
  const auto smoothed = ds::train(tr.encoded, smooth).params;
  const double rough = validation_roughness(tr, tr.params);
  const double calm = validation_roughness(tr, smoothed);
  // Not scored: a heavier penalty on the same data, to show the term acts.
  ds::ModelConfig heavy = tr.model;
  heavy.eta = 0.5;
  const double heavy_rough = validation_roughness(tr, ds::train(tr.encoded, heavy).params);
  return {calm < rough, fmt("mean sq diff eta=0 %.3e, eta=0.005 %.3e (eta=0.5 %.3e, not scored)",
                            rough, calm, heavy_rough)};
}

// 6. Synthetic AKI benchmark at k = 1.
Outcome aki_benchmark(const Trained& tr, std::vector<ds::GroundTruthEntry>* windows) {
  ds::BenchmarkConfig bc;
  bc.methods = {ds::Method::kRandom, ds::Method::kIntegratedGradients};
  bc.k = 1;
  bc.seed = 7;
  const auto out =
      ds::run_benchmark(tr.corpus, tr.catalog, tr.stats, tr.params, nullptr, nullptr, bc);
  *windows = out.truth;
  const auto& rnd = out.results[0];
  const auto& ig = out.results[1];
  const int distractors = tr.catalog.size() - 2;
  const bool ok = rnd.n_windows >= 100 && distractors >= 8 &&
                  std::abs(rnd.mean_precision - out.expected_random_precision) <= 0.05 &&
                  ig.mean_precision >= 2 * rnd.mean_precision && ig.ci_lo > rnd.ci_hi;
  std::ostringstream s;
  s << rnd.n_windows << " windows, random "
    << fmt("%.3f (expected %.3f) [%.3f, %.3f]", rnd.mean_precision,
           out.expected_random_precision, rnd.ci_lo, rnd.ci_hi)
    << ", IG " << fmt("%.3f [%.3f, %.3f]", ig.mean_precision, ig.ci_lo, ig.ci_hi);
  return {ok, s.str()};
}

// 7. Alert-rule boundary examples and the exhaustive grid.
ds::RiskSeries anchored(double p0, double later) {
  ds::RiskSeries r;
  for (int h = 1; h <= 24; ++h) {
    r.p.push_back(h <= 12 ? p0 : later);
    r.logits.push_back(0.0);
    r.step_time.push_back(h * 3600.0);
  }
  return r;
}

Outcome alert_rule() {
  ds::AlertRule rule;
  rule.min_new_events = 0;
  bool ok = true;
  const auto fires = ds::evaluate_alert_rule(anchored(0.10, 0.20), rule);
  ok &= fires.has_value() && fires->t0 == 12 && fires->t1 == 14;
  ok &= !ds::evaluate_alert_rule(anchored(0.15, 0.21), rule).has_value();
  ok &= !ds::evaluate_alert_rule(anchored(0.05, 0.19), rule).has_value();
  int bad = 0;
  for (int i = 1; i <= 99; ++i) {
    for (int j = 1; j <= 99; ++j) {
      const double p0 = i / 100.0, p1 = j / 100.0;
      const bool f = rule.fires(p0, p1);
      if (j < 99 && f && !rule.fires(p0, (j + 1) / 100.0)) ++bad;
      if (i < 99 && !f && rule.fires((i + 1) / 100.0, p1)) ++bad;
      if (f != (2 * j >= std::max(40, 3 * i))) ++bad;
    }
  }
  return {ok && bad == 0, std::string("boundary examples ") + (ok ? "ok" : "failed") +
                              ", grid violations " + std::to_string(bad)};
}

// 8. Two seeded runs give byte-identical results matching the golden file.
Outcome determinism(const std::string& golden_dir) {
  ds::testing::TempDir a("accept_a"), b("accept_b");
  const std::string first = ds::testing::run_golden_pipeline(a.str(), 1);
  const std::string second = ds::testing::run_golden_pipeline(b.str(), 2);
  std::string golden;
  try {
    golden = ds::csv::read_file(golden_dir + "/results.csv");
  } catch (const std::exception& e) {
    return {false, std::string("cannot read golden file: ") + e.what()};
  }
  const bool same = first == second;
  const bool match = first == golden;
  return {same && match, std::string("repeat ") + (same ? "identical" : "differs") +
                             ", golden " + (match ? "matches" : "differs")};
}

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("threw: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::string golden_dir = argc > 1 ? argv[1] : DRIFTSCOPE_GOLDEN_DIR;
  const auto start = Clock::now();

  report(1, "lds oracle fidelity", guarded(lds_fidelity));
  report(2, "bptt correctness", guarded(bptt_correctness));
  report(7, "alert rule suite", guarded(alert_rule));
  report(8, "golden determinism", guarded([&] { return determinism(golden_dir); }));

  std::optional<Trained> tr;
  const auto train_start = Clock::now();
  try {
    tr = build_trained();
    std::printf("trained 2000-episode model in %.1fs\n", seconds_since(train_start));
  } catch (const std::exception& e) {
    const Outcome o{false, std::string("training threw: ") + e.what()};
    for (int id : {3, 4, 5, 6}) report(id, "needs trained model", o);
  }
  if (tr) {
    report(3, "telescoping", guarded([&] { return telescoping(*tr); }));
    std::vector<ds::GroundTruthEntry> windows;
    report(6, "synthetic aki benchmark", guarded([&] { return aki_benchmark(*tr, &windows); }));
    report(4, "ig completeness", guarded([&] {
             const auto encoded =
                 ds::encode_corpus(tr->corpus, tr->catalog, tr->stats, ds::Split::kTest);
             return ig_completeness(*tr, windows, encoded);
           }));
    report(5, "smoothing effect", guarded([&] { return smoothing_effect(*tr); }));
  }
  std::printf("total %.1fs, %d failed\n", seconds_since(start), failures);
  return failures == 0 ? 0 : 1;
}
