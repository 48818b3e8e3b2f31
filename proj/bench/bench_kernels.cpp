// Serial reference vs OpenMP for the data-parallel sweeps.
#include <benchmark/benchmark.h>

#include "cfsim/lab.hpp"

using namespace cfsim;

namespace {

const TowerParams& params() {
  static const TowerParams p = build_params(std::vector<std::int64_t>{2, 3, 4});
  return p;
}

const MeasureContext& context() {
  static const MeasureContext ctx = make_context(params(), 1);
  return ctx;
}

Exec mode(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

void BM_Djlem(benchmark::State& st) {
  const SpacerMap& m = context().map(1);
  const auto lengths = default_djlem_lengths(m);
  for (auto _ : st) benchmark::DoNotOptimize(certify_djlem(m, 4000, lengths, 1, mode(st)));
}

void BM_Lemwm(benchmark::State& st) {
  const BoxSet f = params().F(1).to_boxset();
  for (auto _ : st) benchmark::DoNotOptimize(lemwm_evaluate(context(), 1, f, f, mode(st)));
}

void BM_Balanced(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(balanced_product_check(context(), 1, 200, 1, mode(st)));
}

void BM_Mixing(benchmark::State& st) {
  const Cylinder a{1, BoxSet::single(1, -1, 2, 0)};
  std::vector<CylinderPair> pairs{{a, a, "a"}};
  const auto gs = designated_mixing_sequence(context());
  for (auto _ : st) benchmark::DoNotOptimize(mixing_scan(context(), gs, pairs, mode(st)));
}

void BM_Factor(benchmark::State& st) {
  const std::vector<Rational> bs{make_rational(1, 2)};
  for (auto _ : st) benchmark::DoNotOptimize(factor_check(context(), bs, 2000, 1, mode(st)));
}

}  // namespace

BENCHMARK(BM_Djlem)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Lemwm)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Balanced)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Mixing)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Factor)->ArgName("omp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
