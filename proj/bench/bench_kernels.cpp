#include <benchmark/benchmark.h>

#include "cotlsa/objectives.hpp"
#include "cotlsa/parallel.hpp"
#include "cotlsa/reference.hpp"

using namespace cotlsa;

namespace {

LsaParams bench_params(std::size_t d) {
  RngStream rng(1);
  LsaParams p = LsaParams::zeros(d);
  p.v = scale(gaussian_matrix(rng, p.d_e(), p.d_e()), 0.1);
  p.w = scale(gaussian_matrix(rng, p.d_e(), p.d_e()), 0.1);
  return p;
}

McConfig bench_config(const benchmark::State& state) {
  return McConfig{static_cast<std::size_t>(state.range(0)), 20, static_cast<std::size_t>(state.range(1)), 0.4, 256,
                  false};
}

void BM_GradReference(benchmark::State& state) {
  const McConfig cfg = bench_config(state);
  const LsaParams p = bench_params(cfg.d);
  for (auto _ : state) benchmark::DoNotOptimize(reference::grad_mc(p, cfg, RngStream(2)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(cfg.batch));
}

void BM_GradSerial(benchmark::State& state) {
  const McConfig cfg = bench_config(state);
  const LsaParams p = bench_params(cfg.d);
  for (auto _ : state) benchmark::DoNotOptimize(grad_mc(p, cfg, RngStream(2), Execution::serial));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(cfg.batch));
}

void BM_GradParallel(benchmark::State& state) {
  const McConfig cfg = bench_config(state);
  const LsaParams p = bench_params(cfg.d);
  for (auto _ : state) benchmark::DoNotOptimize(grad_mc(p, cfg, RngStream(2), Execution::parallel));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(cfg.batch));
}

}  // namespace

BENCHMARK(BM_GradReference)->Args({5, 5})->Args({10, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradSerial)->Args({5, 5})->Args({10, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradParallel)->Args({5, 5})->Args({10, 20})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
