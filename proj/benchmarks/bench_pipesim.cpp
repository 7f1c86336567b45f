#include <vector>

#include <benchmark/benchmark.h>

#include "cachetune/pipesim.hpp"
#include "cachetune/scheduler.hpp"

namespace {

void BM_SimulateSweepPoint(benchmark::State& state) {
    const std::vector<cachetune::ChunkMeta> metas{{"a", 512, 2, 8, 4}, {"b", 512, 2, 8, 4}, {"c", 512, 2, 8, 4}};
    std::vector<cachetune::ImportanceRanking> ranks;
    for (int i = 0; i < 3; ++i) ranks.push_back(cachetune::identity_ranking(512, 1));
    const cachetune::HardwareProfile p{1e-6, 0.5e-6, 20e-6};
    const double r = static_cast<double>(state.range(0)) / 100.0;
    for (auto _ : state) {
        const auto plan = cachetune::build_plan(metas, ranks, r, 32);
        benchmark::DoNotOptimize(cachetune::simulate(plan, p).ttft_s);
    }
}

void BM_GssModel(benchmark::State& state) {
    const cachetune::HardwareProfile p{1e-6, 3e-6, 20e-6};
    const cachetune::SearchConfig cfg;
    const auto f = [&](double r) { return cachetune::ttft_model(r, 1536, 32, p); };
    for (auto _ : state) benchmark::DoNotOptimize(cachetune::gss_optimize(f, cachetune::roofline_r0(p, cfg), cfg));
}

}  // namespace

BENCHMARK(BM_SimulateSweepPoint)->Arg(15)->Arg(50)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GssModel);
