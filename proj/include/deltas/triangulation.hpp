#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "deltas/geometry.hpp"
#include "deltas/interest_points.hpp"
#include "deltas/matching.hpp"

namespace deltas {

/// One pixel observation of a 3D point. Anchor observations carry weight 1;
/// auxiliary observations are weighted by their match confidence.
struct Observation {
  Vec2 pixel = Vec2::Zero();
  Mat34 projection = Mat34::Zero();
  double weight = 1.0;
};

/// Stacks rows w*(u*p3 - p1), w*(v*p3 - p2) per observation into a 2k x 4
/// homogeneous system. Requires at least two positively weighted observations.
Eigen::MatrixXd build_dlt_matrix(const std::vector<Observation>& observations);

struct TriangulatedPoint {
  Vec4 homogeneous = Vec4::Zero();  // unit norm, sign fixed so z_bar[3] >= 0
  Vec3 point = Vec3::Zero();        // meters
  double sigma_gap = 0.0;           // second-smallest / smallest singular value
};

/// Smallest right singular vector of the weighted DLT system, then the
/// homogeneous divide. sigma_gap may be +inf (exact data) or NaN when the two
/// smallest singular values are both zero.
TriangulatedPoint triangulate(const std::vector<Observation>& observations);

struct TriangulationGradients {
  // Per observation: d(point)/d(pixel) as a 3x2 block, and d(point)/d(weight).
  std::vector<Eigen::Matrix<double, 3, 2>> d_pixel;
  std::vector<Vec3> d_weight;
};

/// Analytic Jacobians of the Euclidean point with respect to every
/// observation's pixel coordinates and weight, via first-order perturbation of
/// the smallest eigenvector of A^T A. Requires sigma_gap > min_sigma_gap.
TriangulationGradients grad_triangulate(
    const std::vector<Observation>& observations, double min_sigma_gap = 1.01);

struct PointTriangulation {
  bool valid = false;
  Vec3 point = Vec3::Zero();
  Vec4 homogeneous = Vec4::Zero();
  double sigma_gap = 0.0;
  std::vector<double> confidences;  // per auxiliary view; 0 where match failed
};

/// Triangulates every interest point independently from its anchor pixel
/// (weight 1) and the per-view matches (weight max(0, confidence)). Matches
/// whose confidence is below min_confidence contribute no observation at all;
/// points left with fewer than two observations are flagged invalid instead
/// of aborting the batch. views[0] is the anchor; matches[j][k] observes
/// point j in views[k+1]. num_threads <= 0 runs the serial reference path;
/// results do not depend on thread count.
std::vector<PointTriangulation> triangulate_batch(
    const InterestPointSet& points,
    const std::vector<std::vector<std::optional<MatchResult>>>& matches,
    const std::vector<CameraView>& views, int num_threads = 0,
    double min_confidence = 0.0);

}  // namespace deltas
