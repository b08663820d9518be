// Serial reference vs OpenMP kernel timings on synthetic data.
// The thread-count argument applies to the *_omp benchmarks only.

#include "distviz/kernels.hpp"
#include "distviz/synth.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace distviz;

namespace {

struct Fixture {
    synth::SynthData data;
    deflate::DeflatorSet deflators;
    std::vector<kernels::CellEntries> cells;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        auto c = synth::SynthConfig::demo(5, 11, YearRange{1976, 2019});
        c.households_per_state_year = 600;
        Fixture out;
        out.data = synth::generate(c);
        out.deflators = deflate::build_deflators(out.data.prices, c.years);
        auto adjusted = kernels::adjust_incomes_serial(out.data.households, out.deflators, Variant::ERHHRPP);
        std::map<StateYear, kernels::CellEntries> by_cell;
        for (std::size_t i = 0; i < adjusted.size(); ++i) {
            const auto& h = out.data.households[i];
            by_cell[{h.state, h.year}].push_back({adjusted[i], h.weight});
        }
        for (auto& [cell, entries] : by_cell)
            out.cells.push_back(std::move(entries));
        return out;
    }();
    return f;
}

void BM_adjust_incomes_serial(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::adjust_incomes_serial(f.data.households, f.deflators, Variant::ERHHRPP));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.households.size()));
}

void BM_adjust_incomes_omp(benchmark::State& state) {
    const auto& f = fixture();
    kernels::set_threads(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::adjust_incomes_omp(f.data.households, f.deflators, Variant::ERHHRPP));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.households.size()));
}

void BM_summarize_cells_serial(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::summarize_cells_serial(f.cells, segment::BucketScheme::percentile));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.cells.size()));
}

void BM_summarize_cells_omp(benchmark::State& state) {
    const auto& f = fixture();
    kernels::set_threads(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::summarize_cells_omp(f.cells, segment::BucketScheme::percentile));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.cells.size()));
}

void BM_bootstrap_serial(benchmark::State& state) {
    const auto& cell = fixture().cells.front();
    for (auto _ : state)
        benchmark::DoNotOptimize(
            kernels::bootstrap_serial(cell, segment::BucketScheme::decile, 200, 1, {StateId{6}, 1976}));
    state.SetItemsProcessed(state.iterations() * 200);
}

void BM_bootstrap_omp(benchmark::State& state) {
    const auto& cell = fixture().cells.front();
    kernels::set_threads(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(
            kernels::bootstrap_omp(cell, segment::BucketScheme::decile, 200, 1, {StateId{6}, 1976}));
    state.SetItemsProcessed(state.iterations() * 200);
}

} // namespace

BENCHMARK(BM_adjust_incomes_serial);
BENCHMARK(BM_adjust_incomes_omp)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(BM_summarize_cells_serial);
BENCHMARK(BM_summarize_cells_omp)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(BM_bootstrap_serial);
BENCHMARK(BM_bootstrap_omp)->Arg(1)->Arg(2)->Arg(4);

BENCHMARK_MAIN();
