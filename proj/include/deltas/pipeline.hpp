#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deltas/depth_tools.hpp"
#include "deltas/geometry.hpp"
#include "deltas/interest_points.hpp"
#include "deltas/matching.hpp"
#include "deltas/scene_synth.hpp"
#include "deltas/triangulation.hpp"

namespace deltas {

/// End-to-end run parameters. Defaults follow the standard operating point:
/// 512 interest points with a half detected / half random split, detector
/// threshold 5e-4 with NMS radius 9, 100 epipolar samples with a 1 px offset
/// band, and a 0.5-10 m depth search range at qVGA resolution.
struct RunConfig {
  int n_points = 512;
  double ratio = 0.5;
  int nms_radius = 9;
  double threshold = 5e-4;
  int epipolar_samples = 100;
  int offset_px = 1;
  double depth_min = 0.5;
  double depth_max = 10.0;
  uint64_t seed = 7;
  bool densify = false;
  int stride = 8;  // descriptor grid stride of file-based scenes
  MatchOptions match;
  double min_confidence = 0.05;  // matches below this add no observation
  double idw_power = 2.0;
  int idw_neighbors = 8;
  int num_threads = 0;  // <= 0: serial reference path
};

/// Everything the pipeline consumes, already at file precision so loading a
/// dumped scene and generating the same scene in memory run byte-identically.
struct SceneInputs {
  std::vector<CameraView> views;          // [0] = anchor
  std::vector<DescriptorField> fields;    // per view
  ScoreMap anchor_scores;
  std::optional<DepthImage> anchor_gt;
};

/// Reads cameras.json, per-view view%02d.desc, view00.smap and (if present)
/// view00_gt.pfm. `max_views` > 0 truncates the view list.
SceneInputs load_scene_dir(const std::filesystem::path& dir, int stride,
                           int max_views = 0);

/// In-memory equivalent of dump + load, quantizing ground truth to f32.
SceneInputs make_inputs(const Scene& scene, int max_views = 0);

using MatchTable = std::vector<std::vector<std::optional<MatchResult>>>;

/// Matches every interest point against every auxiliary view. A view where
/// the epipolar segment is empty or entirely out of bounds yields nullopt.
/// num_threads <= 0 runs the serial reference path; results are identical at
/// any thread count.
MatchTable match_all(const SceneInputs& inputs, const InterestPointSet& points,
                     const RunConfig& config);

struct RunOutputs {
  InterestPointSet points;
  MatchTable matches;
  std::vector<PointTriangulation> triangulation;
  ImputeResult sparse;
  std::optional<DepthImage> dense;
  std::optional<MetricsReport> sparse_metrics;
  std::optional<MetricsReport> dense_metrics;
  std::string points_csv;
  std::string metrics_csv;  // empty when the scene carries no ground truth
};

/// detect -> fill -> match -> triangulate -> impute -> (densify) -> metrics.
RunOutputs run_pipeline(const SceneInputs& inputs, const RunConfig& config);

/// Depth of a world point in a view's camera frame.
double camera_depth(const CameraView& view, const Vec3& X);

}  // namespace deltas
