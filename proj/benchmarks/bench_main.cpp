#include <benchmark/benchmark.h>

#include "psld/harness.hpp"

using namespace psld;

static void BM_MatExp(benchmark::State& st) {
  const BlockMat2 F = drift_matrix(ProcessSpec{});
  double t = 0.1;
  for (auto _ : st) {
    benchmark::DoNotOptimize(mat_exp(F, t));
    t += 1e-9;
  }
}
BENCHMARK(BM_MatExp);

static void BM_MixtureScore(benchmark::State& st) {
  const ProcessSpec s;
  const AnalyticScore sc(benchmark_mixture(s), Parameterization(s));
  const State z({0.3, -0.2}, {0.1, 0.05});
  for (auto _ : st) benchmark::DoNotOptimize(sc.evaluate(z, 0.4));
}
BENCHMARK(BM_MixtureScore);

static void BM_BuildTable(benchmark::State& st) {
  const ProcessSpec s;
  const Parameterization p(s, st.range(1) ? ParamKind::Preconditioned : ParamKind::Default);
  const auto sched = make_schedule(ScheduleKind::QuadraticStriding, static_cast<std::size_t>(st.range(0)), 1.0).t;
  for (auto _ : st) benchmark::DoNotOptimize(build_table(p, BTChoice::lambda_ones(0.5), sched));
}
BENCHMARK(BM_BuildTable)->Args({50, 0})->Args({50, 1})->Args({200, 0});

static void BM_SampleChain(benchmark::State& st) {
  const ProcessSpec s;
  const Parameterization p(s);
  const AnalyticScore sc(benchmark_mixture(s), p);
  const NoiseStream noise(1);
  const auto kind = static_cast<SamplerKind>(st.range(0));
  const auto sched = make_schedule(ScheduleKind::QuadraticStriding, 50, 1.0).t;
  CoefficientTable tab;
  SamplerSetup set{kind, &s, &sc, nullptr, sched, {}, false, &noise};
  if (needs_table(kind)) {
    TableOptions opt;
    opt.mask = table_mask(kind);
    tab = build_table(p, BTChoice::zero(), sched, opt);
    set.table = &tab;
  }
  const State z({0.5, -0.5}, {0.1, 0.0});
  std::uint64_t chain = 0;
  for (auto _ : st) benchmark::DoNotOptimize(sample_chain(set, z, chain++));
  st.SetLabel(to_string(kind));
}
BENCHMARK(BM_SampleChain)->DenseRange(0, 14);

static void BM_Metrics(benchmark::State& st) {
  RunConfig c;
  const auto z = draw_prior(c, static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sample_error_metrics(z, c.mixture));
}
BENCHMARK(BM_Metrics)->Arg(1000)->Arg(4000);
BENCHMARK_MAIN();
