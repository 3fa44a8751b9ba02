#include <benchmark/benchmark.h>

#include "driftscope/lds_oracle.h"
#include "driftscope/rng.h"

namespace {

using namespace driftscope;

lds::LDSystem make_system(int n, int d) {
  lds::LDSystem sys;
  sys.A = 0.9 * Eigen::MatrixXd::Identity(n, n);
  sys.A.diagonal(1).setConstant(0.05);
  sys.B = Eigen::MatrixXd::Constant(n, d, 0.3);
  sys.h0 = Eigen::VectorXd::Constant(n, 0.1);
  return sys;
}

void BM_LdsIntegratedGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int T = static_cast<int>(state.range(1));
  const auto sys = make_system(n, n);
  Rng rng(1);
  Eigen::MatrixXd x(n, T), b = Eigen::MatrixXd::Zero(n, T);
  for (int j = 0; j < T; ++j) {
    for (int i = 0; i < n; ++i) x(i, j) = rng.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(lds::lds_integrated_gradient(sys, b, x, T));
}
BENCHMARK(BM_LdsIntegratedGradient)->Args({5, 20})->Args({16, 200});

}  // namespace
