#include <complex>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cachetune/fft.hpp"

namespace {

void BM_RealFft(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    cachetune::RealFft fft(n);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    std::vector<std::complex<double>> out(fft.n_bins());
    for (auto _ : state) {
        fft.forward(x, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

// powers of two take the radix-2 path, the rest go through Bluestein
BENCHMARK(BM_RealFft)->Arg(64)->Arg(127)->Arg(512)->Arg(1000)->Arg(4096);

BENCHMARK_MAIN();
