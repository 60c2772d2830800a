#include <benchmark/benchmark.h>

#include "qbound/bounds.hpp"
#include "qbound/estimate.hpp"
#include "qbound/models.hpp"
#include "qbound/sampling.hpp"

using namespace qbound;

namespace {

RMat tail_root() {
    RMat s(4, 4);
    s << 2.0, 0.3, 0.0, 0.1, 0.3, 1.5, 0.2, 0.0, 0.0, 0.2, 1.0, 0.4, 0.1, 0.0, 0.4, 0.8;
    return psd_sqrt(s);
}

void BM_TailCountSerial(benchmark::State& state) {
    const RMat root = tail_root();
    const RMat w = RMat::Identity(4, 4);
    for (auto _ : state) benchmark::DoNotOptimize(tail_count_serial(root, w, 3.0, state.range(0), 1).hits);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TailCountParallel(benchmark::State& state) {
    const RMat root = tail_root();
    const RMat w = RMat::Identity(4, 4);
    for (auto _ : state) benchmark::DoNotOptimize(tail_count_parallel(root, w, 3.0, state.range(0), 1).hits);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void simulate(benchmark::State& state, bool parallel) {
    const ParametricModel phase = qubit_phase(0.8);
    SimulationOptions opt;
    opt.parallel = parallel;
    for (auto _ : state) benchmark::DoNotOptimize(simulate_mse(phase, 0.3, 0.3, 1024, state.range(0), 7, opt).n_mse);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimulateSerial(benchmark::State& state) { simulate(state, false); }
void BM_SimulateParallel(benchmark::State& state) { simulate(state, true); }

void holevo(benchmark::State& state, bool parallel) {
    const ParametricModel amp = amplitude_damping();
    RVec t(3);
    t << 0.9, 0.4, 0.45;
    const RMat w = RMat::Identity(2, 2);
    HolevoOptions opt;
    opt.parallel = parallel;
    for (auto _ : state) benchmark::DoNotOptimize(nuisance_bound(amp, t, w, 1, opt).value);
}

void BM_HolevoRestartsSerial(benchmark::State& state) { holevo(state, false); }
void BM_HolevoRestartsParallel(benchmark::State& state) { holevo(state, true); }

}  // namespace

BENCHMARK(BM_TailCountSerial)->Arg(1 << 18)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TailCountParallel)->Arg(1 << 18)->Arg(1 << 20)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SimulateSerial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateParallel)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_HolevoRestartsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HolevoRestartsParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
