#include "deltas/matching.hpp"

#include <algorithm>
#include <cmath>

namespace deltas {

void validate_descriptor_field(const DescriptorField& field) {
  require(field.dim >= 2, ErrorCode::invalid_config,
          "descriptor dimension must be >= 2");
  require(field.grid_width > 0 && field.grid_height > 0 && field.stride > 0 &&
              field.values.size() ==
                  size_t(field.grid_width) * field.grid_height * field.dim,
          ErrorCode::invalid_config, "descriptor field shape is inconsistent");
  for (int gy = 0; gy < field.grid_height; ++gy) {
    for (int gx = 0; gx < field.grid_width; ++gx) {
      const float* d = field.node(gx, gy);
      double sq = 0.0;
      for (int n = 0; n < field.dim; ++n) sq += double(d[n]) * d[n];
      require(std::abs(std::sqrt(sq) - 1.0) < 1e-6, ErrorCode::invalid_config,
              "descriptor field nodes must have unit L2 norm");
    }
  }
}

namespace {

struct BilinearWeights {
  int x0, y0, x1, y1;
  double w00, w10, w01, w11;
};

BilinearWeights bilinear_weights(const DescriptorField& field, const Vec2& p) {
  require(p.x() >= 0.0 && p.x() <= field.image_width() - 1 && p.y() >= 0.0 &&
              p.y() <= field.image_height() - 1,
          ErrorCode::out_of_bounds, "sample position outside image bounds");
  const double gx =
      std::clamp(p.x() / field.stride, 0.0, double(field.grid_width - 1));
  const double gy =
      std::clamp(p.y() / field.stride, 0.0, double(field.grid_height - 1));
  BilinearWeights w;
  w.x0 = std::min(int(gx), field.grid_width - 2 >= 0 ? field.grid_width - 2 : 0);
  w.y0 = std::min(int(gy), field.grid_height - 2 >= 0 ? field.grid_height - 2 : 0);
  w.x1 = std::min(w.x0 + 1, field.grid_width - 1);
  w.y1 = std::min(w.y0 + 1, field.grid_height - 1);
  const double fx = gx - w.x0;
  const double fy = gy - w.y0;
  w.w00 = (1.0 - fx) * (1.0 - fy);
  w.w10 = fx * (1.0 - fy);
  w.w01 = (1.0 - fx) * fy;
  w.w11 = fx * fy;
  return w;
}

}  // namespace

Eigen::VectorXd bilinear_sample(const DescriptorField& field, const Vec2& p) {
  const BilinearWeights w = bilinear_weights(field, p);
  const float* d00 = field.node(w.x0, w.y0);
  const float* d10 = field.node(w.x1, w.y0);
  const float* d01 = field.node(w.x0, w.y1);
  const float* d11 = field.node(w.x1, w.y1);
  Eigen::VectorXd out(field.dim);
  for (int n = 0; n < field.dim; ++n) {
    out[n] = w.w00 * d00[n] + w.w10 * d10[n] + w.w01 * d01[n] + w.w11 * d11[n];
  }
  return out;
}

CorrelationMap correlate(const Eigen::VectorXd& anchor_desc,
                         const DescriptorField& field,
                         const EpipolarSampleGrid& grid) {
  require(anchor_desc.size() == field.dim, ErrorCode::dimension_mismatch,
          "anchor descriptor dimension does not match the field");
  CorrelationMap map;
  map.grid = grid;
  map.values.assign(grid.size(), kInvalidCorrelation);
  const int w = grid.width();
  for (int r = 0; r < grid.height(); ++r) {
    for (int i = 0; i < w; ++i) {
      if (!grid.valid_at(r, i)) continue;
      const BilinearWeights bw = bilinear_weights(field, grid.at(r, i));
      const float* d00 = field.node(bw.x0, bw.y0);
      const float* d10 = field.node(bw.x1, bw.y0);
      const float* d01 = field.node(bw.x0, bw.y1);
      const float* d11 = field.node(bw.x1, bw.y1);
      double dot = 0.0;
      for (int n = 0; n < field.dim; ++n) {
        const double s = bw.w00 * d00[n] + bw.w10 * d10[n] + bw.w01 * d01[n] +
                         bw.w11 * d11[n];
        dot += anchor_desc[n] * s;
      }
      map.values[r * w + i] = dot;
    }
  }
  return map;
}

std::vector<double> spatial_softmax(const CorrelationMap& map) {
  double max_v = kInvalidCorrelation;
  for (const double v : map.values) max_v = std::max(max_v, v);
  require(std::isfinite(max_v), ErrorCode::empty_map,
          "correlation map has no valid samples");

  std::vector<double> out(map.values.size(), 0.0);
  double sum = 0.0;
  for (size_t i = 0; i < map.values.size(); ++i) {
    if (map.values[i] == kInvalidCorrelation) continue;
    out[i] = std::exp(map.values[i] - max_v);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Vec2 soft_argmax(std::span<const double> normalized,
                 const EpipolarSampleGrid& grid) {
  Vec2 x = Vec2::Zero();
  for (int r = 0; r < grid.height(); ++r) {
    for (int i = 0; i < grid.width(); ++i) {
      const double m = normalized[r * grid.width() + i];
      if (m != 0.0) x += m * grid.at(r, i);
    }
  }
  return x;
}

MatchResult match_point(const Eigen::VectorXd& anchor_desc,
                        const DescriptorField& field,
                        const EpipolarSampleGrid& grid,
                        const MatchOptions& options) {
  CorrelationMap map = correlate(anchor_desc, field, grid);

  MatchResult result;
  result.confidence = kInvalidCorrelation;
  for (const double v : map.values) result.confidence = std::max(result.confidence, v);
  require(std::isfinite(result.confidence), ErrorCode::empty_map,
          "correlation map has no valid samples");

  for (double& v : map.values) {
    if (v == kInvalidCorrelation) continue;
    if (options.clamp_nonneg) v = std::max(v, 0.0);
    v *= options.correlation_gain;
  }
  result.normalized = spatial_softmax(map);
  result.position = soft_argmax(result.normalized, grid);
  return result;
}

Eigen::Matrix2Xd soft_argmax_jacobian(const CorrelationMap& map) {
  const std::vector<double> mass = spatial_softmax(map);
  const Vec2 x = soft_argmax(mass, map.grid);
  Eigen::Matrix2Xd jac = Eigen::Matrix2Xd::Zero(2, map.grid.size());
  for (int r = 0; r < map.height(); ++r) {
    for (int i = 0; i < map.width(); ++i) {
      const int q = r * map.width() + i;
      if (mass[q] != 0.0) jac.col(q) = mass[q] * (map.grid.at(r, i) - x);
    }
  }
  return jac;
}

std::vector<double> confidence_gradient(const CorrelationMap& map) {
  std::vector<double> grad(map.values.size(), 0.0);
  double max_v = kInvalidCorrelation;
  size_t arg = 0;
  for (size_t i = 0; i < map.values.size(); ++i) {
    if (map.values[i] > max_v) {
      max_v = map.values[i];
      arg = i;
    }
  }
  require(std::isfinite(max_v), ErrorCode::empty_map,
          "correlation map has no valid samples");
  grad[arg] = 1.0;
  return grad;
}

}  // namespace deltas
