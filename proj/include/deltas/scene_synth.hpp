#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <vector>

#include "deltas/depth_tools.hpp"
#include "deltas/geometry.hpp"
#include "deltas/interest_points.hpp"
#include "deltas/matching.hpp"
#include "deltas/triangulation.hpp"

namespace deltas {

/// Configuration for synthetic multi-view scenes with analytic ground truth.
/// Points are planted at distinct integer anchor pixels so detector output
/// coincides exactly with the true projections; descriptor fields are built
/// from Gaussian splats of per-point unit descriptors so the correlation peak
/// in every auxiliary view sits at the true match.
struct SceneConfig {
  int n_points = 48;
  int n_views = 3;  // view 0 is the anchor
  double depth_min = 1.4;
  double depth_max = 3.6;
  double baseline = 0.5;          // meters between adjacent camera centers
  double rotation_jitter = 0.01;  // radians, per-axis std-dev
  int descriptor_dim = 0;  // 0 = auto (n_points + 64); values > n_points
                           // enable the orthonormal construction
  double peak_sharpness = 1.5;  // splat std-dev in descriptor grid cells
  double pixel_noise = 0.0;     // std-dev of aux splat-center jitter, pixels
  uint64_t seed = 7;
  int width = 320;
  int height = 240;
  double focal = 256.0;
  int stride = 4;                 // descriptor grid stride
  double background_scale = 0.4;  // weight of the per-view background vector
  double score_sigma = 2.0;       // score-map bump std-dev, pixels
  int margin = 16;                // planted pixels stay this far from borders
  int min_separation = 21;        // Chebyshev pixels between planted points
  double edge_clearance = 4.0;    // drop splats closer than this many splat
                                  // std-devs to an auxiliary frame edge
};

struct Scene {
  SceneConfig config;
  std::vector<Vec3> points;                    // world coordinates
  std::vector<Vec2> anchor_pixels;             // integer-valued, exact
  std::vector<Eigen::VectorXd> descriptors;    // unit, per point
  std::vector<CameraView> views;
  std::vector<DescriptorField> fields;         // per view
  std::vector<ScoreMap> score_maps;            // per view
  std::vector<DepthImage> gt_depth;            // per view, sparse
};

Scene generate_scene(const SceneConfig& config);

/// Exact projection of a planted point; throws when the point is not visible
/// in that view.
Vec2 oracle_match(const Scene& scene, int point_id, int view_id);

/// Independent least-squares reference: solves the unweighted DLT normal
/// equations by a hand-rolled cyclic Jacobi eigen-decomposition of A^T A
/// (no shared code with the SVD solver). Observation weights are ignored.
Vec3 triangulate_normal_equations(const std::vector<Observation>& observations);

/// Reference triangulation of a planted point from its exact projections plus
/// seeded pixel noise, via triangulate_normal_equations.
Vec3 oracle_triangulate(const Scene& scene, int point_id, double pixel_noise_sd,
                        uint64_t seed);

/// Writes cameras.json plus per-view view%02d.desc, view%02d.smap and
/// view%02d_gt.pfm into `dir` (created if needed). The files use the same
/// formats the pipeline consumes, so dumped scenes and live synthetic scenes
/// are interchangeable.
void dump_scene(const Scene& scene, const std::filesystem::path& dir);

}  // namespace deltas
