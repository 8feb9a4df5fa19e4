// Serial reference vs OpenMP kernels on a default synthetic scene.
//
//   ./deltas_bench [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include "deltas/depth_tools.hpp"
#include "deltas/pipeline.hpp"
#include "deltas/scene_synth.hpp"

namespace {

using namespace deltas;

struct Fixture {
  SceneInputs inputs;
  RunConfig config;
  InterestPointSet points;
  MatchTable matches;
  DepthImage sparse;

  Fixture() {
    SceneConfig scene_cfg;
    scene_cfg.seed = 99;
    const Scene scene = generate_scene(scene_cfg);
    inputs = make_inputs(scene);
    const InterestPointSet detected =
        detect(inputs.anchor_scores, config.threshold, config.nms_radius,
               config.n_points);
    points = apply_ratio(detected, config.ratio, config.n_points,
                         inputs.views[0].image_size(), config.seed);
    matches = match_all(inputs, points, config);
    sparse = impute_sparse_depth(
                 [&] {
                   std::vector<SparseDepthPoint> pts;
                   const auto tri = triangulate_batch(points, matches,
                                                      inputs.views, 0,
                                                      config.min_confidence);
                   for (size_t j = 0; j < tri.size(); ++j) {
                     if (!tri[j].valid) continue;
                     const double d =
                         camera_depth(inputs.views[0], tri[j].point);
                     if (d > 1e-9)
                       pts.push_back({points.points[j].position, d, 1.0});
                   }
                   return pts;
                 }(),
                 inputs.views[0].image_size())
                 .image;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_match_all(benchmark::State& state) {
  Fixture& f = fixture();
  RunConfig cfg = f.config;
  cfg.num_threads = int(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(match_all(f.inputs, f.points, cfg));
  }
}

void BM_triangulate_batch(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(triangulate_batch(
        f.points, f.matches, f.inputs.views, int(state.range(0)),
        f.config.min_confidence));
  }
}

void BM_densify_idw(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(densify_idw(f.sparse, f.config.idw_power,
                                         f.config.idw_neighbors,
                                         int(state.range(0))));
  }
}

}  // namespace

BENCHMARK(BM_match_all)->Arg(0)->Arg(2)->Arg(4)->UseRealTime();
BENCHMARK(BM_triangulate_batch)->Arg(0)->Arg(2)->Arg(4)->UseRealTime();
BENCHMARK(BM_densify_idw)->Arg(0)->Arg(2)->Arg(4)->UseRealTime();

BENCHMARK_MAIN();
