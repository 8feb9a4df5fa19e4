#include "deltas/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "deltas/io.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deltas {

SceneInputs load_scene_dir(const std::filesystem::path& dir, int stride,
                           int max_views) {
  SceneInputs in;
  in.views = read_cameras_json(dir / "cameras.json");
  if (max_views > 0 && int(in.views.size()) > max_views)
    in.views.erase(in.views.begin() + max_views, in.views.end());
  require(in.views.size() >= 2, ErrorCode::invalid_config,
          "need at least two views (anchor + one auxiliary)");

  for (size_t v = 0; v < in.views.size(); ++v) {
    char name[32];
    std::snprintf(name, sizeof(name), "view%02zu.desc", v);
    in.fields.push_back(read_descriptor_field(dir / name, stride));
  }
  in.anchor_scores = read_score_map(dir / "view00.smap");

  const std::filesystem::path gt = dir / "view00_gt.pfm";
  if (std::filesystem::exists(gt)) in.anchor_gt = read_pfm(gt);
  return in;
}

SceneInputs make_inputs(const Scene& scene, int max_views) {
  SceneInputs in;
  in.views = scene.views;
  if (max_views > 0 && int(in.views.size()) > max_views)
    in.views.erase(in.views.begin() + max_views, in.views.end());
  in.fields.assign(scene.fields.begin(), scene.fields.begin() + in.views.size());
  in.anchor_scores = scene.score_maps[0];
  DepthImage gt = scene.gt_depth[0];
  for (size_t i = 0; i < gt.values.size(); ++i)
    gt.values[i] = double(float(gt.values[i]));  // f32 file precision
  in.anchor_gt = std::move(gt);
  return in;
}

MatchTable match_all(const SceneInputs& inputs, const InterestPointSet& points,
                     const RunConfig& config) {
  const size_t n_aux = inputs.views.size() - 1;
  MatchTable table(points.size());

  const auto match_one = [&](int j) {
    const Vec2& pixel = points.points[j].position;
    std::vector<std::optional<MatchResult>>& row = table[j];
    row.assign(n_aux, std::nullopt);
    Eigen::VectorXd anchor_desc;
    try {
      anchor_desc = bilinear_sample(inputs.fields[0], pixel);
    } catch (const Error&) {
      return;  // point outside the sampleable anchor area
    }
    for (size_t k = 0; k < n_aux; ++k) {
      try {
        const EpipolarSampleGrid grid = sample_epipolar_segment(
            inputs.views[0], inputs.views[k + 1], pixel, config.depth_min,
            config.depth_max, config.epipolar_samples, config.offset_px);
        row[k] = match_point(anchor_desc, inputs.fields[k + 1], grid,
                             config.match);
      } catch (const Error&) {
        // Unmatched in this view: behind the camera, out of frame, or at the
        // epipole. The view simply contributes no observation.
      }
    }
  };

  if (config.num_threads <= 0) {
    for (int j = 0; j < points.size(); ++j) match_one(j);
  } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(config.num_threads)
    for (int j = 0; j < points.size(); ++j) match_one(j);
#else
    for (int j = 0; j < points.size(); ++j) match_one(j);
#endif
  }
  return table;
}

double camera_depth(const CameraView& view, const Vec3& X) {
  return (view.rotation() * X + view.translation()).z();
}

namespace {

std::string render_points_csv(const RunOutputs& out, size_t n_aux) {
  std::string csv = "point_id,x,y,z,valid,sigma_gap";
  for (size_t k = 0; k < n_aux; ++k)
    csv += ",conf_view" + std::to_string(k + 1);
  csv += "\n";
  for (size_t j = 0; j < out.triangulation.size(); ++j) {
    const PointTriangulation& t = out.triangulation[j];
    csv += std::to_string(j) + "," + format_double(t.point.x()) + "," +
           format_double(t.point.y()) + "," + format_double(t.point.z()) +
           "," + (t.valid ? "1" : "0") + "," + format_double(t.sigma_gap);
    for (size_t k = 0; k < n_aux; ++k)
      csv += "," + format_double(k < t.confidences.size() ? t.confidences[k] : 0.0);
    csv += "\n";
  }
  return csv;
}

}  // namespace

RunOutputs run_pipeline(const SceneInputs& inputs, const RunConfig& config) {
  require(inputs.views.size() >= 2, ErrorCode::invalid_config,
          "need at least two views");
  require(inputs.fields.size() == inputs.views.size(),
          ErrorCode::invalid_config, "one descriptor field per view required");
  for (size_t v = 0; v < inputs.views.size(); ++v) {
    const ImageSize vs = inputs.views[v].image_size();
    const DescriptorField& f = inputs.fields[v];
    require(f.grid_width == (vs.width + f.stride - 1) / f.stride &&
                f.grid_height == (vs.height + f.stride - 1) / f.stride,
            ErrorCode::invalid_config,
            "descriptor grid does not match the view size at the configured "
            "stride");
  }
  const ImageSize size = inputs.views[0].image_size();

  RunOutputs out;
  const InterestPointSet detected =
      detect(inputs.anchor_scores, config.threshold, config.nms_radius,
             config.n_points);
  out.points = apply_ratio(detected, config.ratio, config.n_points, size,
                           config.seed);

  out.matches = match_all(inputs, out.points, config);
  out.triangulation = triangulate_batch(out.points, out.matches, inputs.views,
                                        config.num_threads,
                                        config.min_confidence);

  std::vector<SparseDepthPoint> sparse_points;
  for (size_t j = 0; j < out.triangulation.size(); ++j) {
    const PointTriangulation& t = out.triangulation[j];
    if (!t.valid) continue;
    const double depth = camera_depth(inputs.views[0], t.point);
    if (depth <= 1e-9) continue;  // triangulated behind the anchor
    double conf_sum = 0.0;
    for (const double c : t.confidences) conf_sum += std::max(c, 0.0);
    sparse_points.push_back({out.points.points[j].position, depth,
                             conf_sum / double(t.confidences.size())});
  }
  out.sparse = impute_sparse_depth(sparse_points, size);

  if (config.densify) {
    out.dense = densify_idw(out.sparse.image, config.idw_power,
                            config.idw_neighbors, config.num_threads);
  }

  if (inputs.anchor_gt.has_value()) {
    out.sparse_metrics = depth_metrics(out.sparse.image, *inputs.anchor_gt);
    out.metrics_csv = metrics_csv_header() + "\n" +
                      metrics_csv_row("sparse", *out.sparse_metrics) + "\n";
    if (out.dense.has_value()) {
      out.dense_metrics = depth_metrics(*out.dense, *inputs.anchor_gt);
      out.metrics_csv += metrics_csv_row("dense", *out.dense_metrics) + "\n";
    }
  }

  out.points_csv = render_points_csv(out, inputs.views.size() - 1);
  return out;
}

}  // namespace deltas
