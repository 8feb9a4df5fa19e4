#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "deltas/error.hpp"

namespace deltas {

using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// P = K [R|t], validated against the CameraView invariants.
Mat34 projection_matrix(const Mat3& K, const Mat3& R, const Vec3& t);

/// Pinhole camera with world-to-camera extrinsics. Pixel coordinates put the
/// origin at the center of the top-left pixel, so the valid pixel domain is
/// [0, width-1] x [0, height-1]. Immutable after construction.
class CameraView {
 public:
  CameraView(const Mat3& K, const Mat3& R, const Vec3& t, ImageSize size);

  const Mat3& intrinsics() const { return K_; }
  const Mat3& rotation() const { return R_; }
  const Vec3& translation() const { return t_; }
  const Mat34& projection() const { return P_; }
  ImageSize image_size() const { return size_; }

  Vec3 camera_center() const { return -R_.transpose() * t_; }

  bool contains(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.x() <= size_.width - 1 &&
           pixel.y() >= 0.0 && pixel.y() <= size_.height - 1;
  }

  /// World point on the ray through `pixel` at camera depth `depth`.
  Vec3 unproject(const Vec2& pixel, double depth) const;

 private:
  Mat3 K_;
  Mat3 R_;
  Vec3 t_;
  Mat34 P_;
  ImageSize size_;
};

struct ProjectedPoint {
  Vec2 pixel;
  double depth = 0.0;
};

/// Dehomogenized projection; throws behind_camera when depth <= 1e-9.
ProjectedPoint project(const CameraView& view, const Vec3& X);

/// Rank-2 two-view constraint matrix, scaled to unit Frobenius norm with the
/// largest-magnitude entry positive so instances are directly comparable.
struct FundamentalMatrix {
  Mat3 F = Mat3::Zero();
};

FundamentalMatrix fundamental_matrix(const CameraView& anchor,
                                     const CameraView& aux);

/// Samples of the clamped epipolar segment in an auxiliary image.
/// Row layout is [height][width] with height = 2*offset_px + 1; the center
/// row lies on the epipolar line, row r is displaced (r - offset_px) pixels
/// along the line's unit normal. Column i corresponds to hypothesis depth
/// depths[i]; depths are uniform in inverse depth and strictly increasing.
/// Offset rows inherit the column depths (only 2D positions are consumed
/// downstream).
struct EpipolarSampleGrid {
  int n_samples = 0;
  int offset_px = 0;
  std::vector<Vec2> samples;    // row-major [height][width]
  std::vector<double> depths;   // size n_samples
  std::vector<uint8_t> valid;   // row-major [height][width]

  int width() const { return n_samples; }
  int height() const { return 2 * offset_px + 1; }
  int size() const { return width() * height(); }

  const Vec2& at(int row, int col) const { return samples[row * width() + col]; }
  bool valid_at(int row, int col) const { return valid[row * width() + col] != 0; }
};

EpipolarSampleGrid sample_epipolar_segment(const CameraView& anchor,
                                           const CameraView& aux,
                                           const Vec2& pixel, double depth_min,
                                           double depth_max, int n_samples,
                                           int offset_px);

}  // namespace deltas
