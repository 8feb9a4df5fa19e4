#pragma once

#include <Eigen/Core>
#include <limits>
#include <span>
#include <vector>

#include "deltas/geometry.hpp"

namespace deltas {

/// Dense grid of unit descriptors at a fixed stride relative to image
/// resolution. Grid node (gx, gy) sits at image position (stride*gx,
/// stride*gy); the nominal image extent is stride*grid dimensions.
struct DescriptorField {
  int grid_width = 0;
  int grid_height = 0;
  int dim = 0;
  int stride = 8;
  std::vector<float> values;  // row-major [gy][gx][dim]

  int image_width() const { return grid_width * stride; }
  int image_height() const { return grid_height * stride; }

  const float* node(int gx, int gy) const {
    return values.data() + (size_t(gy) * grid_width + gx) * dim;
  }
  float* node(int gx, int gy) {
    return const_cast<float*>(std::as_const(*this).node(gx, gy));
  }
};

/// Throws unless every grid descriptor has unit L2 norm (tol 1e-6) and
/// dim >= 2.
void validate_descriptor_field(const DescriptorField& field);

/// Bilinear interpolation of the four surrounding grid descriptors after
/// mapping the image pixel to grid coordinates p/stride. The result is not
/// renormalized. Grid coordinates are clamped to the node range, which border-
/// replicates the outer half-stride strip of the image.
Eigen::VectorXd bilinear_sample(const DescriptorField& field, const Vec2& p);

constexpr double kInvalidCorrelation = -std::numeric_limits<double>::infinity();

/// Raw correlation values over an epipolar sample grid; invalid samples carry
/// -inf and are excluded from all downstream mass.
struct CorrelationMap {
  std::vector<double> values;  // row-major [height][width], matching `grid`
  EpipolarSampleGrid grid;

  int width() const { return grid.width(); }
  int height() const { return grid.height(); }
};

CorrelationMap correlate(const Eigen::VectorXd& anchor_desc,
                         const DescriptorField& field,
                         const EpipolarSampleGrid& grid);

/// Max-shifted softmax over valid samples; invalid samples get exactly 0.
std::vector<double> spatial_softmax(const CorrelationMap& map);

/// Probability-weighted mean of the grid's sample pixel coordinates.
Vec2 soft_argmax(std::span<const double> normalized,
                 const EpipolarSampleGrid& grid);

struct MatchResult {
  Vec2 position = Vec2::Zero();
  double confidence = 0.0;            // max raw correlation over valid samples
  std::vector<double> normalized;     // softmax mass actually used
};

/// Conditioning applied between correlation and softmax. The raw inner
/// products of unit descriptors live in [-1,1], which is far too flat for the
/// softmax center of mass to localize anything; a gain on the correlation
/// values plays the role the batch-norm scale plays in a trained matcher.
/// gain = 1 and clamp off reproduce the plain softmax composition.
struct MatchOptions {
  double correlation_gain = 14.0;
  bool clamp_nonneg = false;
};

/// correlate -> (gain/clamp) -> spatial_softmax -> soft_argmax.
/// Confidence is the maximum raw correlation, before any conditioning.
MatchResult match_point(const Eigen::VectorXd& anchor_desc,
                        const DescriptorField& field,
                        const EpipolarSampleGrid& grid,
                        const MatchOptions& options = {});

/// Jacobian of soft_argmax(spatial_softmax(C)) with respect to the raw
/// correlation values: column q holds C'_q * (g_q - x). Invalid samples get
/// zero columns.
Eigen::Matrix2Xd soft_argmax_jacobian(const CorrelationMap& map);

/// Subgradient of the confidence (max over valid samples): 1 at the first
/// row-major maximum, 0 elsewhere.
std::vector<double> confidence_gradient(const CorrelationMap& map);

}  // namespace deltas
