#include <benchmark/benchmark.h>

#include "meso/spectral.hpp"

namespace {

meso::DisorderedOperator chain(std::int64_t n) {
    return meso::sample_operator(meso::LatticeBox::cube(1, 0, n), meso::PotentialSpec::uniform_width(4.0),
                                 meso::SeedRecord{1});
}

meso::DisorderedOperator square(std::int64_t side) {
    return meso::sample_operator(meso::LatticeBox::cube(2, 0, side), meso::PotentialSpec::uniform_width(4.0),
                                 meso::SeedRecord{1});
}

void BM_SampleOperator(benchmark::State& state) {
    const auto box = meso::LatticeBox::cube(1, 0, state.range(0));
    const auto spec = meso::PotentialSpec::uniform_width(4.0);
    std::uint64_t s = 0;
    for (auto _ : state) benchmark::DoNotOptimize(meso::sample_operator(box, spec, meso::SeedRecord{++s}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleOperator)->RangeMultiplier(4)->Range(1 << 10, 1 << 16);

void BM_SturmCount(benchmark::State& state) {
    const auto op = chain(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(meso::count_in_interval(op, {-0.1, 0.1}));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SturmCount)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity(benchmark::oN);

void BM_SliceInertia2D(benchmark::State& state) {
    const auto op = square(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(meso::inertia_at(op, 0.05));
}
BENCHMARK(BM_SliceInertia2D)->DenseRange(10, 40, 10);

void BM_DenseSpectrum(benchmark::State& state) {
    const auto op = chain(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(meso::dense_spectrum(op));
}
BENCHMARK(BM_DenseSpectrum)->RangeMultiplier(2)->Range(256, 2048)->Unit(benchmark::kMillisecond);

void BM_ResolventDiagonalChain(benchmark::State& state) {
    const auto op = chain(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(meso::resolvent_diagonal(op, {0.0, 1e-3}));
}
BENCHMARK(BM_ResolventDiagonalChain)->RangeMultiplier(4)->Range(1 << 10, 1 << 14);

void BM_ResolventColumn2D(benchmark::State& state) {
    const auto op = square(state.range(0));
    for (auto _ : state) {
        meso::ResolventSolver solver(op, {0.0, 0.05});
        benchmark::DoNotOptimize(solver.column(0));
    }
}
BENCHMARK(BM_ResolventColumn2D)->DenseRange(10, 40, 10);

void BM_TraceSolvePath(benchmark::State& state) {
    const auto op = chain(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(meso::trace_im_resolvent(op, {0.0, 1e-6}, meso::TracePath::Solve));
}
BENCHMARK(BM_TraceSolvePath)->RangeMultiplier(4)->Range(1 << 10, 1 << 14);

}  // namespace

BENCHMARK_MAIN();
