#include "deltas/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

namespace deltas {

namespace {

void validate_intrinsics(const Mat3& K) {
  const bool upper = std::abs(K(1, 0)) == 0.0 && std::abs(K(2, 0)) == 0.0 &&
                     std::abs(K(2, 1)) == 0.0;
  require(upper && K(2, 2) == 1.0 && K(0, 0) > 0.0 && K(1, 1) > 0.0,
          ErrorCode::invalid_camera,
          "intrinsics must be upper-triangular with K[2][2]=1 and positive "
          "focal lengths");
}

void validate_rotation(const Mat3& R) {
  const double ortho = (R * R.transpose() - Mat3::Identity()).norm();
  require(ortho < 1e-9 && R.determinant() > 0.0, ErrorCode::invalid_camera,
          "rotation must be orthonormal with det +1");
}

}  // namespace

Mat34 projection_matrix(const Mat3& K, const Mat3& R, const Vec3& t) {
  validate_intrinsics(K);
  validate_rotation(R);
  Mat34 Rt;
  Rt.leftCols<3>() = R;
  Rt.col(3) = t;
  return K * Rt;
}

CameraView::CameraView(const Mat3& K, const Mat3& R, const Vec3& t,
                       ImageSize size)
    : K_(K), R_(R), t_(t), P_(projection_matrix(K, R, t)), size_(size) {
  require(size.width > 0 && size.height > 0, ErrorCode::invalid_camera,
          "image size must be positive");
}

Vec3 CameraView::unproject(const Vec2& pixel, double depth) const {
  const Vec3 ray = K_.inverse() * Vec3(pixel.x(), pixel.y(), 1.0);
  return R_.transpose() * (ray * depth - t_);
}

ProjectedPoint project(const CameraView& view, const Vec3& X) {
  const Vec3 h = view.projection() * X.homogeneous();
  require(h.z() > 1e-9, ErrorCode::behind_camera,
          "point projects behind the camera");
  return {h.head<2>() / h.z(), h.z()};
}

FundamentalMatrix fundamental_matrix(const CameraView& anchor,
                                     const CameraView& aux) {
  const double baseline = (anchor.camera_center() - aux.camera_center()).norm();
  require(baseline > 1e-12, ErrorCode::degenerate_baseline,
          "coincident camera centers");

  const Mat3 R_rel = aux.rotation() * anchor.rotation().transpose();
  const Vec3 t_rel = aux.translation() - R_rel * anchor.translation();
  Mat3 tx;
  tx << 0, -t_rel.z(), t_rel.y(),
        t_rel.z(), 0, -t_rel.x(),
        -t_rel.y(), t_rel.x(), 0;

  Mat3 F = aux.intrinsics().transpose().inverse() * tx * R_rel *
           anchor.intrinsics().inverse();
  F /= F.norm();

  // Sign convention: largest-magnitude entry positive.
  int r = 0, c = 0;
  F.cwiseAbs().maxCoeff(&r, &c);
  if (F(r, c) < 0.0) F = -F;
  return {F};
}

EpipolarSampleGrid sample_epipolar_segment(const CameraView& anchor,
                                           const CameraView& aux,
                                           const Vec2& pixel, double depth_min,
                                           double depth_max, int n_samples,
                                           int offset_px) {
  require(depth_min > 0.0 && depth_min < depth_max, ErrorCode::invalid_config,
          "need 0 < depth_min < depth_max");
  require(n_samples >= 2, ErrorCode::invalid_config, "need n_samples >= 2");
  require(offset_px >= 0, ErrorCode::invalid_config, "need offset_px >= 0");

  EpipolarSampleGrid grid;
  grid.n_samples = n_samples;
  grid.offset_px = offset_px;
  grid.samples.assign(grid.size(), Vec2::Zero());
  grid.valid.assign(grid.size(), 0);
  grid.depths.resize(n_samples);

  const int height = grid.height();
  const double inv_min = 1.0 / depth_min;
  const double inv_max = 1.0 / depth_max;

  std::vector<uint8_t> in_front(n_samples, 0);
  int n_front = 0;
  for (int i = 0; i < n_samples; ++i) {
    const double t = double(i) / double(n_samples - 1);
    const double d = 1.0 / (inv_min * (1.0 - t) + inv_max * t);
    grid.depths[i] = d;
    const Vec3 X = anchor.unproject(pixel, d);
    const Vec3 h = aux.projection() * X.homogeneous();
    if (h.z() > 1e-9) {
      grid.samples[offset_px * n_samples + i] = h.head<2>() / h.z();
      in_front[i] = 1;
      ++n_front;
    }
  }
  require(n_front > 0, ErrorCode::empty_segment,
          "anchor ray lies behind the auxiliary camera over the whole depth "
          "range");

  // Unit normal of the epipolar line, from the line l = F x.
  const FundamentalMatrix fm = fundamental_matrix(anchor, aux);
  Vec3 line = fm.F * Vec3(pixel.x(), pixel.y(), 1.0);
  Vec2 normal = line.head<2>();
  if (normal.norm() < 1e-12) {
    // Pixel at (or numerically indistinguishable from) the epipole: every
    // hypothesis projects to the same point and no band can be built.
    fail(ErrorCode::empty_segment, "anchor pixel coincides with the epipole");
  }
  normal.normalize();

  for (int r = 0; r < height; ++r) {
    const double k = double(r - offset_px);
    for (int i = 0; i < n_samples; ++i) {
      if (!in_front[i]) continue;
      const Vec2 p = grid.samples[offset_px * n_samples + i] + k * normal;
      grid.samples[r * n_samples + i] = p;
      grid.valid[r * n_samples + i] = aux.contains(p) ? 1 : 0;
    }
  }
  return grid;
}

}  // namespace deltas
