#include <benchmark/benchmark.h>

#include "driftscope/attribution.h"
#include "driftscope/synth_eval.h"

namespace {

using namespace driftscope;

struct Fixture {
  StepSeries steps;
  ModelParams params;
  int t0 = 0, t1 = 0;
};

Fixture make_fixture() {
  ScenarioConfig sc;
  sc.n_episodes = 20;
  sc.deterioration_fraction = 0.5;
  const auto catalog = scenario_catalog(sc);
  const auto corpus = generate_corpus(sc);
  const auto stats = fit_feature_stats(corpus, catalog.size());
  Fixture f;
  f.steps = encode_steps(normalize(corpus[1], stats), catalog);
  ModelConfig c;
  c.hidden_size = 32;
  f.params = model_init(c, f.steps.dim());
  f.t1 = f.steps.steps();
  f.t0 = f.t1 - 15;
  return f;
}

void BM_IntegratedGradients(benchmark::State& state) {
  const auto f = make_fixture();
  const RecurrentRisk model(f.params);
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(integrated_gradients(model, f.steps, f.t0, f.t1, m));
}
BENCHMARK(BM_IntegratedGradients)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_InputGradient(benchmark::State& state) {
  const auto f = make_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(grad_wrt_inputs(f.params, f.steps, f.t1));
}
BENCHMARK(BM_InputGradient);

void BM_RandomGuess(benchmark::State& state) {
  const auto f = make_fixture();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(random_guess(f.steps, f.t0, f.t1, 3, ++seed));
}
BENCHMARK(BM_RandomGuess);

}  // namespace
