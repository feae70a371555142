// Serial reference vs OpenMP kernels. The argument selects the path:
// 0 = serial, 1 = parallel. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "ktm/bench.hpp"
#include "ktm/kernels.hpp"
#include "ktm/matcher.hpp"
#include "ktm/projection.hpp"
#include "ktm/template_builder.hpp"
#include "test_support.hpp"

namespace {

using namespace ktm;

Execution exec_of(const benchmark::State &state) {
    return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

const SemanticPointCloud &big_cloud() {
    static const auto cloud = test::random_cloud(20000, 384, 7, 0.6);
    return cloud;
}

const KnowledgeTemplate &big_template() {
    static const auto tmpl = fps_sample(test::random_cloud(2000, 384, 8, 0.3), 32);
    return tmpl;
}

void BM_NearestFeatures(benchmark::State &state) {
    const auto exec = exec_of(state);
    const auto &tmpl = big_template();
    const auto &cloud = big_cloud();
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::nearest_features(tmpl, cloud, exec));
    }
    state.SetItemsProcessed(state.iterations() * cloud.size() * tmpl.size());
}

void BM_GatedFeatures(benchmark::State &state) {
    const auto exec = exec_of(state);
    const auto &tmpl = big_template();
    const auto &cloud = big_cloud();
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::gated_features(tmpl, cloud, 1.2, 50, exec));
    }
    state.SetItemsProcessed(state.iterations() * cloud.size() * tmpl.size());
}

void BM_FarthestPointOrder(benchmark::State &state) {
    const auto exec = exec_of(state);
    const auto cloud = test::random_cloud(10000, 64, 9);
    const kernels::JointMetric metric(cloud, bounding_diagonal(cloud), 1.0, 1.0, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::farthest_point_order(metric, 32, 0, exec));
    }
}

void BM_Projection(benchmark::State &state) {
    const auto exec = exec_of(state);
    const auto fx = test::make_rgbd(640, 480, 64, 3);
    ProjectionOptions opts;
    opts.stride = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(project(fx.features, fx.depth, fx.calib.intrinsics,
                                         fx.calib.extrinsics, opts, exec));
    }
    state.SetItemsProcessed(state.iterations() * 640 * 480);
}

void BM_CoarseMatch(benchmark::State &state) {
    const auto exec = exec_of(state);
    const auto cfg = bench::preset_config("clutter");
    const auto inst = bench::generate_scene(bench::scene_spec_for(cfg, 0));
    const auto params = bench::match_params_for(cfg, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(coarse_match(inst.tmpl, inst.cloud, params, exec));
    }
}

void BM_RunSuite(benchmark::State &state) {
    const auto exec = exec_of(state);
    auto cfg = bench::preset_config("ablation");
    cfg.scenes = 20;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bench::run_suite(cfg, exec));
    }
}

BENCHMARK(BM_NearestFeatures)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GatedFeatures)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FarthestPointOrder)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Projection)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CoarseMatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunSuite)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
