#include <benchmark/benchmark.h>

#include <vector>

#include "aba/als.hpp"
#include "aba/estimation.hpp"
#include "aba/geometry.hpp"
#include "aba/harvester.hpp"
#include "aba/random.hpp"
#include "aba/segmentation.hpp"
#include "aba/simulation.hpp"

using namespace aba;

namespace {

std::vector<geom::Point> scatter(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<geom::Point> pts(n);
    for (auto& p : pts) p = {rng.uniform(0, 500), rng.uniform(0, 500)};
    return pts;
}

}  // namespace

static void BM_Delaunay(benchmark::State& state) {
    const auto pts = scatter(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(geom::delaunay(pts));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Delaunay)->RangeMultiplier(4)->Range(256, 65536)->Complexity();

static void BM_AlphaShape(benchmark::State& state) {
    const auto pts = scatter(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(harvester::alpha_shape(pts, 25.0));
}
BENCHMARK(BM_AlphaShape)->RangeMultiplier(4)->Range(256, 16384);

static void BM_Metrics(benchmark::State& state) {
    Rng rng(3);
    std::vector<als::Echo> echoes(static_cast<std::size_t>(state.range(0)));
    for (auto& e : echoes) e = {rng.uniform(0, 18), rng.uniform(0, 18), rng.uniform(0, 30), 1, 1, 1};
    for (auto _ : state) benchmark::DoNotOptimize(als::compute_metrics(echoes, 2019, 2014));
}
BENCHMARK(BM_Metrics)->RangeMultiplier(8)->Range(64, 32768);

static void BM_StemReconstruction(benchmark::State& state) {
    const harvester::Taper truth{30.0, 24.0, 0.9};
    harvester::StemProfile p;
    p.tree_id = "b";
    p.base_height_m = 0.2;
    Rng rng(4);
    for (double h = p.base_height_m; truth.diameter_cm(h) >= 7.0; h += harvester::kProfileSpacingM)
        p.diameters_mm.push_back(10.0 * truth.diameter_cm(h) + rng.uniform(-1, 1));
    const auto allometry = harvester::AllometryConfig::defaults();
    for (auto _ : state) benchmark::DoNotOptimize(harvester::reconstruct_tree(p, allometry));
}
BENCHMARK(BM_StemReconstruction);

static void BM_MaEstimate(benchmark::State& state) {
    Rng rng(5);
    std::vector<estimation::SamplePlot> s(static_cast<std::size_t>(state.range(0)));
    for (auto& x : s) {
        const double y = rng.uniform(50, 300);
        x = {"p", y, y + rng.normal() * 20, true, true};
    }
    for (auto _ : state) benchmark::DoNotOptimize(estimation::ma_estimate(s, 150.0));
}
BENCHMARK(BM_MaEstimate)->RangeMultiplier(8)->Range(64, 32768);

static void BM_Population(benchmark::State& state) {
    auto cfg = sim::PopulationConfig::defaults();
    for (auto _ : state) benchmark::DoNotOptimize(sim::generate_population(cfg));
}
BENCHMARK(BM_Population)->Unit(benchmark::kMillisecond);

static void BM_Replicates(benchmark::State& state) {
    auto sc = sim::Scenario::defaults();
    sc.replicates = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(sim::run_replicates(sc));
}
BENCHMARK(BM_Replicates)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
