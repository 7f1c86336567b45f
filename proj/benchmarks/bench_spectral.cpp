#include <random>

#include <benchmark/benchmark.h>

#include "cachetune/spectral.hpp"

namespace {

cachetune::KvChunk make_chunk(std::size_t layers, std::size_t n, std::size_t h, std::size_t d) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-1, 1);
    cachetune::KvChunk c;
    c.chunk_id = "bench";
    for (std::size_t l = 0; l < layers; ++l) {
        cachetune::SeqTensor k(n, h, d), v(n, h, d);
        for (float& x : k.data()) x = u(rng);
        for (float& x : v.data()) x = u(rng);
        c.keys_raw.push_back(std::move(k));
        c.values.push_back(std::move(v));
    }
    return c;
}

void BM_RankChunk(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const cachetune::KvChunk c = make_chunk(4, n, 2, 64);
    for (auto _ : state) benchmark::DoNotOptimize(cachetune::rank_chunk(c));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_RankChunk)->Arg(256)->Arg(512)->Arg(1000)->Unit(benchmark::kMillisecond);
