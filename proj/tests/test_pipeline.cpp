#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <unistd.h>

#include "deltas/io.hpp"
#include "deltas/pipeline.hpp"
#include "deltas/scene_synth.hpp"

using namespace deltas;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("deltas_pipeline_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SceneConfig test_scene_config() {
  SceneConfig cfg;
  cfg.n_points = 24;
  cfg.seed = 12;
  return cfg;
}

RunConfig test_run_config() {
  RunConfig cfg;
  cfg.n_points = 96;
  cfg.seed = 12;
  return cfg;
}

}  // namespace

TEST_CASE("run_pipeline end to end on a synthetic scene") {
  const Scene scene = generate_scene(test_scene_config());
  const SceneInputs inputs = make_inputs(scene);
  const RunOutputs out = run_pipeline(inputs, test_run_config());

  CHECK(out.points.size() == 96);
  int n_detected = 0;
  for (const InterestPoint& p : out.points.points)
    n_detected += p.source == PointSource::detected;
  CHECK(n_detected == 24);  // every planted point survives NMS and the budget

  REQUIRE(out.sparse_metrics.has_value());
  CHECK(out.sparse_metrics->abs_rel < 0.01);
  CHECK(out.sparse_metrics->delta1 > 0.99);
  CHECK(out.sparse_metrics->n_valid >= 20);

  // Imputed depths sit at the planted pixels within the GT mask.
  long matched_pixels = 0;
  for (size_t i = 0; i < out.sparse.image.values.size(); ++i)
    matched_pixels += out.sparse.image.valid[i] && inputs.anchor_gt->valid[i];
  CHECK(matched_pixels == out.sparse_metrics->n_valid);

  // CSV surfaces.
  CHECK(out.points_csv.starts_with(
      "point_id,x,y,z,valid,sigma_gap,conf_view1,conf_view2\n"));
  CHECK(out.metrics_csv.starts_with(metrics_csv_header()));
  CHECK(out.metrics_csv.find("sparse,") != std::string::npos);
}

TEST_CASE("densify fills every pixel when enabled") {
  const Scene scene = generate_scene(test_scene_config());
  RunConfig cfg = test_run_config();
  cfg.densify = true;
  const RunOutputs out = run_pipeline(make_inputs(scene), cfg);
  REQUIRE(out.dense.has_value());
  for (size_t i = 0; i < out.dense->values.size(); ++i) {
    CHECK(out.dense->valid[i] == 1);
    CHECK(out.dense->values[i] > 0.0);
  }
  REQUIRE(out.dense_metrics.has_value());
  CHECK(out.metrics_csv.find("dense,") != std::string::npos);
}

TEST_CASE("identical seeds give identical outputs") {
  const Scene scene = generate_scene(test_scene_config());
  const SceneInputs inputs = make_inputs(scene);
  const RunOutputs a = run_pipeline(inputs, test_run_config());
  const RunOutputs b = run_pipeline(inputs, test_run_config());
  CHECK(a.points_csv == b.points_csv);
  CHECK(a.metrics_csv == b.metrics_csv);
  CHECK(a.sparse.image.values == b.sparse.image.values);

  RunConfig other = test_run_config();
  other.seed = 13;
  const RunOutputs c = run_pipeline(inputs, other);
  CHECK(a.points_csv != c.points_csv);  // random fills move
}

TEST_CASE("thread count does not change a single byte") {
  const Scene scene = generate_scene(test_scene_config());
  const SceneInputs inputs = make_inputs(scene);

  RunConfig serial = test_run_config();
  serial.densify = true;
  serial.num_threads = 0;
  const RunOutputs base = run_pipeline(inputs, serial);

  for (const int threads : {1, 2, 5}) {
    RunConfig cfg = serial;
    cfg.num_threads = threads;
    const RunOutputs out = run_pipeline(inputs, cfg);
    CHECK(out.points_csv == base.points_csv);
    CHECK(out.metrics_csv == base.metrics_csv);
    CHECK(out.sparse.image.values == base.sparse.image.values);
    CHECK(out.dense->values == base.dense->values);
  }
}

TEST_CASE("a dumped scene runs identically to the in-memory scene") {
  TempDir tmp;
  const Scene scene = generate_scene(test_scene_config());
  dump_scene(scene, tmp.path);

  const SceneInputs from_files =
      load_scene_dir(tmp.path, scene.config.stride);
  const SceneInputs in_memory = make_inputs(scene);

  const RunOutputs a = run_pipeline(from_files, test_run_config());
  const RunOutputs b = run_pipeline(in_memory, test_run_config());
  CHECK(a.points_csv == b.points_csv);
  CHECK(a.metrics_csv == b.metrics_csv);
  CHECK(a.sparse.image.values == b.sparse.image.values);
}

TEST_CASE("view truncation and missing ground truth") {
  TempDir tmp;
  const Scene scene = generate_scene(test_scene_config());
  dump_scene(scene, tmp.path);

  SUBCASE("max_views keeps the anchor plus the first auxiliaries") {
    const SceneInputs two = load_scene_dir(tmp.path, scene.config.stride, 2);
    CHECK(two.views.size() == 2);
    CHECK(two.fields.size() == 2);
    CHECK_NOTHROW(run_pipeline(two, test_run_config()));
  }
  SUBCASE("runs without ground truth produce no metrics") {
    fs::remove(tmp.path / "view00_gt.pfm");
    const SceneInputs inputs = load_scene_dir(tmp.path, scene.config.stride);
    CHECK(!inputs.anchor_gt.has_value());
    const RunOutputs out = run_pipeline(inputs, test_run_config());
    CHECK(!out.sparse_metrics.has_value());
    CHECK(out.metrics_csv.empty());
    CHECK(!out.points_csv.empty());
  }
  SUBCASE("missing camera file is a parse/io error") {
    fs::remove(tmp.path / "cameras.json");
    CHECK_THROWS_AS(load_scene_dir(tmp.path, scene.config.stride), Error);
  }
}

TEST_CASE("stride mismatch is rejected") {
  const Scene scene = generate_scene(test_scene_config());
  SceneInputs inputs = make_inputs(scene);
  for (DescriptorField& f : inputs.fields) f.stride = 8;  // wrong for 80x60
  CHECK_THROWS_AS(run_pipeline(inputs, test_run_config()), Error);
}

TEST_CASE("match_all marks views that cannot observe a point") {
  const Scene scene = generate_scene(test_scene_config());
  SceneInputs inputs = make_inputs(scene);
  // Replace the second auxiliary with a camera facing away along +z from far
  // behind: the whole anchor frustum projects behind it.
  const CameraView& v0 = inputs.views[0];
  inputs.views[2] = CameraView(v0.intrinsics(), v0.rotation(),
                               Vec3(0, 0, -50.0), v0.image_size());

  InterestPointSet points;
  points.points.push_back({scene.anchor_pixels[0], 1.0, PointSource::detected});
  const MatchTable table = match_all(inputs, points, test_run_config());
  REQUIRE(table.size() == 1);
  CHECK(table[0][0].has_value());
  CHECK(!table[0][1].has_value());
}
