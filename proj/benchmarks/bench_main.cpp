#include <benchmark/benchmark.h>

#include "qbdmanet/probabilities.hpp"
#include "qbdmanet/qbd.hpp"
#include "qbdmanet/simulator.hpp"

using namespace qbdmanet;

namespace {

NetworkParams half_load(int n, int m, double q) {
    const Topology t = build_topology(n, m, q);
    return with_lambda(t, 0.5 * capacity(t).mu);
}

void BM_ProbabilityTable(benchmark::State& state) {
    const NetworkParams p = half_load(static_cast<int>(state.range(0)), 16, 0.4);
    for (auto _ : state) benchmark::DoNotOptimize(compute_table(p));
}
BENCHMARK(BM_ProbabilityTable)->Arg(50)->Arg(150)->Arg(500);

void BM_ExpectedDelay(benchmark::State& state) {
    const NetworkParams p = half_load(static_cast<int>(state.range(0)), 16, 0.4);
    SolveOptions opt;
    opt.compute_spectral_radius = state.range(1) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(expected_delay(p, opt).expected_delay);
}
BENCHMARK(BM_ExpectedDelay)->Args({50, 0})->Args({150, 0})->Args({150, 1})->Args({500, 0})
    ->Unit(benchmark::kMillisecond);

void BM_SimulatorSlots(benchmark::State& state) {
    const NetworkParams p = half_load(static_cast<int>(state.range(0)), 8, 0.3);
    SimWorld world(p, Mobility::iid, 1);
    for (auto _ : state) advance_slot(world);
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SimulatorSlots)->Arg(20)->Arg(100)->Arg(500);

}  // namespace

BENCHMARK_MAIN();
