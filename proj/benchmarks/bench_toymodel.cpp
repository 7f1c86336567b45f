#include <benchmark/benchmark.h>

#include "cachetune/spectral.hpp"
#include "cachetune/toymodel.hpp"

namespace {

void BM_FullPrefill(benchmark::State& state) {
    const cachetune::ToyModel m(cachetune::ToyModelConfig{});
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto tokens = cachetune::synthetic_tokens(n, 256, 3);
    for (auto _ : state) benchmark::DoNotOptimize(cachetune::full_prefill(m, tokens));
}

void BM_SelectivePrefill(benchmark::State& state) {
    const cachetune::ToyModel m(cachetune::ToyModelConfig{});
    std::vector<cachetune::ReusableChunk> chunks;
    for (std::uint64_t j = 0; j < 3; ++j) {
        cachetune::ReusableChunk c;
        c.tokens = cachetune::synthetic_tokens(64, 256, 10 + j);
        c.kv = cachetune::encode_chunk_isolated(m, c.tokens);
        c.ranking = cachetune::rank_chunk(c.kv);
        chunks.push_back(std::move(c));
    }
    const auto suffix = cachetune::synthetic_tokens(8, 256, 99);
    const double r = static_cast<double>(state.range(0)) / 100.0;
    for (auto _ : state) benchmark::DoNotOptimize(cachetune::selective_prefill(m, chunks, suffix, r));
}

}  // namespace

BENCHMARK(BM_FullPrefill)->Arg(64)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SelectivePrefill)->Arg(15)->Arg(100)->Unit(benchmark::kMillisecond);
