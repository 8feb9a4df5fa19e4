#pragma once

#include <cstdint>
#include <vector>

#include "deltas/geometry.hpp"

namespace deltas {

/// Dense detector response in [0,1], row-major height x width.
struct ScoreMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int x, int y) const { return values[size_t(y) * width + x]; }
  float& at(int x, int y) { return values[size_t(y) * width + x]; }
};

/// Throws when any entry is non-finite or outside [0,1].
void validate_score_map(const ScoreMap& map);

enum class PointSource : uint8_t { detected, random };

struct InterestPoint {
  Vec2 position;
  double score = 1.0;
  PointSource source = PointSource::detected;
};

struct InterestPointSet {
  std::vector<InterestPoint> points;

  int size() const { return int(points.size()); }
};

/// Greedy threshold + square-window NMS in descending score order; ties
/// broken by (row, column) so the result is independent of traversal order.
InterestPointSet detect(const ScoreMap& map, double threshold, int nms_radius,
                        int max_points);

/// Appends seeded uniform integer pixel locations (score 1.0, tagged random),
/// rejection-sampled against pixels already occupied, until the set has
/// `total` points.
InterestPointSet fill_random(InterestPointSet points, int total,
                             ImageSize size, uint64_t seed);

/// Keeps the top floor(ratio*total) detected points by score and tops the set
/// up to `total` with random points.
InterestPointSet apply_ratio(const InterestPointSet& detected, double ratio,
                             int total, ImageSize size, uint64_t seed);

}  // namespace deltas
