#include "deltas/triangulation.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deltas {

namespace {

void check_observations(const std::vector<Observation>& observations) {
  int positive = 0;
  for (const Observation& o : observations) {
    require(std::isfinite(o.weight) && o.weight >= 0.0,
            ErrorCode::invalid_config, "observation weights must be finite and >= 0");
    require(o.projection.row(2).norm() > 0.0, ErrorCode::invalid_config,
            "observation projection has a zero third row");
    if (o.weight > 0.0) ++positive;
  }
  require(positive >= 2, ErrorCode::underdetermined,
          "need at least two positively weighted observations");
}

}  // namespace

Eigen::MatrixXd build_dlt_matrix(const std::vector<Observation>& observations) {
  check_observations(observations);
  Eigen::MatrixXd A(2 * observations.size(), 4);
  for (size_t k = 0; k < observations.size(); ++k) {
    const Observation& o = observations[k];
    const auto p1 = o.projection.row(0);
    const auto p2 = o.projection.row(1);
    const auto p3 = o.projection.row(2);
    A.row(2 * k) = o.weight * (o.pixel.x() * p3 - p1);
    A.row(2 * k + 1) = o.weight * (o.pixel.y() * p3 - p2);
  }
  return A;
}

TriangulatedPoint triangulate(const std::vector<Observation>& observations) {
  const Eigen::MatrixXd A = build_dlt_matrix(observations);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Vector4d sigma = svd.singularValues();

  TriangulatedPoint out;
  out.homogeneous = svd.matrixV().col(3);
  if (out.homogeneous[3] < 0.0) out.homogeneous = -out.homogeneous;
  out.sigma_gap = sigma[2] / sigma[3];  // may be inf or NaN

  require(std::abs(out.homogeneous[3]) > 1e-12, ErrorCode::point_at_infinity,
          "triangulated point lies at infinity");
  out.point = out.homogeneous.head<3>() / out.homogeneous[3];
  return out;
}

TriangulationGradients grad_triangulate(
    const std::vector<Observation>& observations, double min_sigma_gap) {
  const Eigen::MatrixXd A = build_dlt_matrix(observations);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Vector4d sigma = svd.singularValues();
  const Eigen::Matrix4d V = svd.matrixV();

  // The ratio gate is meaningless when the two smallest singular values are
  // both numerically zero (ray ambiguity), so the rank is checked as well.
  const double gap = sigma[2] / sigma[3];
  require(sigma[2] > 1e-12 * sigma[0], ErrorCode::near_degenerate_gradient,
          "system is rank deficient beyond the homogeneous null direction");
  require(std::isfinite(gap) ? gap > min_sigma_gap : !std::isnan(gap),
          ErrorCode::near_degenerate_gradient,
          "smallest singular value is not well separated");

  Vec4 z_bar = V.col(3);
  if (z_bar[3] < 0.0) z_bar = -z_bar;
  require(std::abs(z_bar[3]) > 1e-12, ErrorCode::point_at_infinity,
          "triangulated point lies at infinity");
  const Vec3 z = z_bar.head<3>() / z_bar[3];

  // First-order perturbation of the smallest eigenvector of M = A^T A:
  //   d z_bar = sum_i v_i * (v_i^T dM z_bar) / (sigma_min^2 - sigma_i^2)
  // with v_i the remaining right singular vectors, and
  //   v_i^T dM z_bar = (dA v_i) . (A z_bar) + (A v_i) . (dA z_bar).
  // dA has two nonzero rows per perturbed observation, so only those rows of
  // dA v are formed. The Euclidean map then gives
  //   dz = (dz_bar[0..3] - z * dz_bar[3]) / z_bar[3].
  Eigen::Matrix4d Vs = V;
  Vs.col(3) = z_bar;  // sign-consistent basis
  const Eigen::MatrixXd AV = A * Vs;  // column i = A v_i
  const Vec3 denom_inv(1.0 / (sigma[3] * sigma[3] - sigma[0] * sigma[0]),
                       1.0 / (sigma[3] * sigma[3] - sigma[1] * sigma[1]),
                       1.0 / (sigma[3] * sigma[3] - sigma[2] * sigma[2]));

  const auto euclidean = [&](const Vec4& dzb) -> Vec3 {
    return (dzb.head<3>() - z * dzb[3]) / z_bar[3];
  };

  // dA restricted to the two rows of observation k, for one scalar parameter:
  // rows (r0, r1) given as 4-vectors. Returns dz.
  const auto accumulate = [&](size_t k, const Eigen::RowVector4d& r0,
                              const Eigen::RowVector4d& r1) -> Vec3 {
    Vec4 dzb = Vec4::Zero();
    const double r0_zbar = r0.dot(z_bar);
    const double r1_zbar = r1.dot(z_bar);
    for (int i = 0; i < 3; ++i) {
      const Vec4 vi = Vs.col(i);
      const double term = r0.dot(vi) * AV(2 * k, 3) + r1.dot(vi) * AV(2 * k + 1, 3) +
                          AV(2 * k, i) * r0_zbar + AV(2 * k + 1, i) * r1_zbar;
      dzb += denom_inv[i] * term * vi;
    }
    return euclidean(dzb);
  };

  TriangulationGradients grads;
  grads.d_pixel.resize(observations.size());
  grads.d_weight.resize(observations.size());
  const Eigen::RowVector4d zero = Eigen::RowVector4d::Zero();
  for (size_t k = 0; k < observations.size(); ++k) {
    const Observation& o = observations[k];
    const Eigen::RowVector4d p1 = o.projection.row(0);
    const Eigen::RowVector4d p2 = o.projection.row(1);
    const Eigen::RowVector4d p3 = o.projection.row(2);

    grads.d_pixel[k].col(0) = accumulate(k, o.weight * p3, zero);   // d/du
    grads.d_pixel[k].col(1) = accumulate(k, zero, o.weight * p3);   // d/dv
    grads.d_weight[k] = accumulate(k, o.pixel.x() * p3 - p1, o.pixel.y() * p3 - p2);
  }
  return grads;
}

std::vector<PointTriangulation> triangulate_batch(
    const InterestPointSet& points,
    const std::vector<std::vector<std::optional<MatchResult>>>& matches,
    const std::vector<CameraView>& views, int num_threads,
    double min_confidence) {
  require(!views.empty(), ErrorCode::invalid_config, "no views");
  require(matches.size() == size_t(points.size()), ErrorCode::dimension_mismatch,
          "match table size does not match the point set");
  const size_t n_aux = views.size() - 1;

  std::vector<PointTriangulation> out(points.size());
  const auto solve_one = [&](int j) {
    const std::vector<std::optional<MatchResult>>& row = matches[j];
    PointTriangulation& pt = out[j];
    pt.confidences.assign(n_aux, 0.0);

    std::vector<Observation> obs;
    obs.reserve(1 + n_aux);
    obs.push_back({points.points[j].position, views[0].projection(), 1.0});
    for (size_t k = 0; k < n_aux && k < row.size(); ++k) {
      if (!row[k].has_value()) continue;
      pt.confidences[k] = row[k]->confidence;
      if (row[k]->confidence < min_confidence) continue;
      obs.push_back({row[k]->position, views[k + 1].projection(),
                     std::max(row[k]->confidence, 0.0)});
    }
    try {
      const TriangulatedPoint tri = triangulate(obs);
      pt.valid = true;
      pt.point = tri.point;
      pt.homogeneous = tri.homogeneous;
      pt.sigma_gap = tri.sigma_gap;
    } catch (const Error&) {
      pt.valid = false;
    }
  };

  if (num_threads <= 0) {
    for (int j = 0; j < points.size(); ++j) solve_one(j);
  } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(num_threads)
    for (int j = 0; j < points.size(); ++j) solve_one(j);
#else
    for (int j = 0; j < points.size(); ++j) solve_one(j);
#endif
  }
  return out;
}

}  // namespace deltas
