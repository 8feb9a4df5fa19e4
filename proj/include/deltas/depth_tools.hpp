#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deltas/geometry.hpp"

namespace deltas {

/// Dense or sparse depth in meters. Invalid entries are exactly 0.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<uint8_t> valid;

  static DepthImage all_invalid(ImageSize size) {
    DepthImage d;
    d.width = size.width;
    d.height = size.height;
    d.values.assign(size_t(size.width) * size.height, 0.0);
    d.valid.assign(size_t(size.width) * size.height, 0);
    return d;
  }

  double at(int x, int y) const { return values[size_t(y) * width + x]; }
  bool valid_at(int x, int y) const { return valid[size_t(y) * width + x] != 0; }
  void set(int x, int y, double depth) {
    values[size_t(y) * width + x] = depth;
    valid[size_t(y) * width + x] = 1;
  }
};

struct SparseDepthPoint {
  Vec2 pixel;
  double depth = 0.0;
  double confidence = 1.0;
};

/// Imputation result plus the routing record: source[pixel] is the index of
/// the point whose depth won that pixel (-1 elsewhere), so a unit
/// perturbation of point j's depth moves exactly the cells routed to j.
struct ImputeResult {
  DepthImage image;
  std::vector<int32_t> source;
};

/// Writes each point's depth at the round-to-nearest pixel (ties toward
/// +infinity). On collision the higher-confidence point wins; confidence ties
/// go to the smaller depth. Points falling outside the image are ignored.
ImputeResult impute_sparse_depth(const std::vector<SparseDepthPoint>& points,
                                 ImageSize size);

/// Fills every invalid pixel with the inverse-distance-weighted mean of its
/// k nearest valid pixels (distance ties all included); valid pixels pass
/// through unchanged. num_threads <= 0 runs the serial reference path.
DepthImage densify_idw(const DepthImage& sparse, double power, int k_neighbors,
                       int num_threads = 0);

struct MetricsReport {
  double abs_rel = 0.0;
  double abs_diff = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  long n_valid = 0;
};

/// Standard depth metrics over pixels valid in both images. Inlier ratios use
/// the symmetric ratio max(p/g, g/p) < 1.25^i. Reductions are deterministic
/// (row-major pairwise summation).
MetricsReport depth_metrics(const DepthImage& pred, const DepthImage& gt);

/// Deterministic pairwise summation in the given order.
double pairwise_sum(std::span<const double> values);

/// Mean elementwise Huber: 0.5 d^2/beta for |d| < beta, |d| - beta/2 else.
double smooth_l1(std::span<const double> pred, std::span<const double> target,
                 double beta);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[size_t(y) * width + x]; }
};

/// mean(|dx depth| e^{-|dx image|}) + mean(|dy depth| e^{-|dy image|}) with
/// forward differences.
double edge_aware_smoothness(const DepthImage& depth, const GrayImage& image);

/// Cell-classification logits, row-major [cy][cx][n_classes]. The canonical
/// detector head uses 65 classes (64 in-cell positions plus a dustbin).
struct DetectorLogits {
  int cells_x = 0;
  int cells_y = 0;
  int n_classes = 65;
  std::vector<double> values;

  const double* cell(int cx, int cy) const {
    return values.data() + (size_t(cy) * cells_x + cx) * n_classes;
  }
};

/// Mean softmax cross-entropy over cells; labels index [0, n_classes).
double detector_cross_entropy(const DetectorLogits& logits,
                              const std::vector<int>& labels);

struct LossConfig {
  double w_ip = 0.1;
  double w_2d = 1.0;
  double w_3d = 2.0;
  double w_sm = 1.0;
  double w_d1 = 2.0;
  double scale_damping = 0.7;
  int n_scales = 4;
  double huber_beta = 1.0;
};

void validate_loss_config(const LossConfig& config);

/// Downsampling factor of pyramid level i: {1, 2, 4, 16}, doubling past the
/// fourth level.
int pyramid_scale_factor(int level);

/// Valid-masked block mean; blocks with no valid pixel stay invalid.
DepthImage downsample_valid_mean(const DepthImage& image, int factor);

/// sum_i w_d1 * damping^i * smooth_l1(pred_i, gt downsampled to pred_i's
/// scale) over jointly valid pixels.
double multiscale_depth_loss(const std::vector<DepthImage>& pred_pyramid,
                             const DepthImage& gt, const LossConfig& config);

/// w_ip L_ip + w_2d L_2d + w_3d L_3d + w_sm L_sm + sum_i w_d1 damping^i L_d,i.
double total_loss(double l_ip, double l_2d, double l_3d, double l_sm,
                  std::span<const double> depth_losses,
                  const LossConfig& config);

}  // namespace deltas
