// Microbenchmarks for the hot paths: data generation, kernel regression,
// score evaluation under each moment provider, the full tilt solve, and the
// outcome-mean plug-in.

#include <benchmark/benchmark.h>

#include <vector>

#include "nmar/design.hpp"
#include "nmar/estimator.hpp"
#include "nmar/kernels.hpp"
#include "nmar/moments.hpp"
#include "nmar/score.hpp"
#include "nmar/simlab.hpp"
#include "nmar/theta.hpp"

using namespace nmar;

namespace {

VectorXd vec1(double a) {
  VectorXd v(1);
  v << a;
  return v;
}

ModelSpec misspec(const Design& d) { return ModelSpec{HFamily::linear(), d.g_star}; }

void BM_Generate(benchmark::State& state) {
  const Design d = design_A();
  const int n = static_cast<int>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate(d, n, seed++));
  }
}

void BM_NwRegress(benchmark::State& state) {
  const Design d = design_B2();
  const SimSample sim = generate(d, 500, 3);
  std::vector<VectorXd> pts;
  std::vector<double> targets;
  for (const auto& o : sim.sample.obs) {
    if (o.r != 1) continue;
    pts.push_back(o.x);
    targets.push_back(o.y());
  }
  KernelSpec spec;
  const double bw = spec.bandwidth(sim.sample.size());
  const VectorXd q = sim.sample.obs.front().x;
  for (auto _ : state) {
    benchmark::DoNotOptimize(nw_regress(targets, pts, q, spec, bw));
  }
}

// One full pass over the data: every per-row moment, the projection
// coefficients, and the summed score. Alternating tilt values defeat the
// per-parameter cache so each iteration does real work.
void BM_ScoreOracle(benchmark::State& state) {
  const Design d = design_A();
  const int n = static_cast<int>(state.range(0));
  const SimSample sim = generate(d, n, 5);
  const ModelSpec spec = misspec(d);
  const OracleProvider oracle(d, spec);
  ScoreEngine engine(sim.sample, spec, oracle);
  double b = -0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(engine.estimating_equation(vec1(b)));
    b = (b == -0.2) ? -0.21 : -0.2;
  }
}

void BM_ScoreNonparametric(benchmark::State& state) {
  const Design d = design_A();
  const int n = static_cast<int>(state.range(0));
  const SimSample sim = generate(d, n, 7);
  const ModelSpec spec = misspec(d);
  const NonparametricProvider np(sim.sample, spec, KernelSpec{}, KernelSpec{});
  ScoreEngine engine(sim.sample, spec, np);
  double b = -0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(engine.estimating_equation(vec1(b)));
    b = (b == -0.2) ? -0.21 : -0.2;
  }
}

void BM_SolveBeta(benchmark::State& state) {
  const Design d = design_A();
  const SimSample sim = generate(d, static_cast<int>(state.range(0)), 11);
  const ModelSpec spec = misspec(d);
  const OracleProvider oracle(d, spec);
  SolverOptions opts;
  opts.with_se = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_beta(sim.sample, spec, oracle, opts));
  }
}

void BM_SolveBetaWithSe(benchmark::State& state) {
  const Design d = design_A();
  const SimSample sim = generate(d, static_cast<int>(state.range(0)), 11);
  const ModelSpec spec = misspec(d);
  const OracleProvider oracle(d, spec);
  SolverOptions opts;
  opts.with_se = true;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_beta(sim.sample, spec, oracle, opts));
  }
}

void BM_ThetaMean(benchmark::State& state) {
  const Design d = design_B1();
  const SimSample sim = generate(d, static_cast<int>(state.range(0)), 13);
  const ModelSpec spec = misspec(d);
  const OracleProvider oracle(d, spec);
  const VectorXd beta = vec1(-0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_theta_mean(sim.sample, spec, oracle, beta));
  }
}

BENCHMARK(BM_Generate)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NwRegress)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ScoreOracle)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreNonparametric)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveBeta)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveBetaWithSe)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ThetaMean)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
