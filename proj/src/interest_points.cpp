#include "deltas/interest_points.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "deltas/rng.hpp"

namespace deltas {

namespace {

// Round-to-nearest with .5 ties toward +infinity, shared with imputation.
int round_half_up(double v) { return int(std::floor(v + 0.5)); }

}  // namespace

void validate_score_map(const ScoreMap& map) {
  require(map.width > 0 && map.height > 0 &&
              map.values.size() == size_t(map.width) * map.height,
          ErrorCode::invalid_config, "score map dimensions are inconsistent");
  for (const float v : map.values) {
    require(std::isfinite(v) && v >= 0.0f && v <= 1.0f, ErrorCode::non_finite,
            "score map entries must be finite and within [0,1]");
  }
}

InterestPointSet detect(const ScoreMap& map, double threshold, int nms_radius,
                        int max_points) {
  require(nms_radius >= 0, ErrorCode::invalid_config, "nms_radius must be >= 0");

  struct Candidate {
    float score;
    int y;
    int x;
  };
  std::vector<Candidate> candidates;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const float s = map.at(x, y);
      if (s >= threshold) candidates.push_back({s, y, x});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.y != b.y) return a.y < b.y;
              return a.x < b.x;
            });

  InterestPointSet out;
  std::vector<std::pair<int, int>> kept;
  for (const Candidate& c : candidates) {
    if (out.size() >= max_points) break;
    bool suppressed = false;
    for (const auto& [ky, kx] : kept) {
      if (std::max(std::abs(c.x - kx), std::abs(c.y - ky)) <= nms_radius) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;
    kept.emplace_back(c.y, c.x);
    out.points.push_back({Vec2(c.x, c.y), double(c.score), PointSource::detected});
  }
  return out;
}

InterestPointSet fill_random(InterestPointSet points, int total,
                             ImageSize size, uint64_t seed) {
  require(total >= points.size(), ErrorCode::invalid_config,
          "total must be >= current point count");
  const uint64_t n_pixels = uint64_t(size.width) * uint64_t(size.height);
  require(uint64_t(total) <= n_pixels, ErrorCode::infeasible,
          "requested more points than pixels in the image");

  std::unordered_set<uint64_t> occupied;
  occupied.reserve(size_t(total) * 2);
  for (const InterestPoint& p : points.points) {
    occupied.insert(uint64_t(round_half_up(p.position.y())) * size.width +
                    uint64_t(round_half_up(p.position.x())));
  }

  CounterRng rng(seed, "fill_random");
  while (points.size() < total) {
    const uint64_t idx = rng.next_below(n_pixels);
    if (!occupied.insert(idx).second) continue;
    const int x = int(idx % uint64_t(size.width));
    const int y = int(idx / uint64_t(size.width));
    points.points.push_back({Vec2(x, y), 1.0, PointSource::random});
  }
  return points;
}

InterestPointSet apply_ratio(const InterestPointSet& detected, double ratio,
                             int total, ImageSize size, uint64_t seed) {
  require(ratio >= 0.0 && ratio <= 1.0, ErrorCode::invalid_config,
          "ratio must lie in [0,1]");
  const size_t budget = size_t(std::floor(ratio * total));

  InterestPointSet kept;
  kept.points = detected.points;
  std::stable_sort(kept.points.begin(), kept.points.end(),
                   [](const InterestPoint& a, const InterestPoint& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.position.y() != b.position.y())
                       return a.position.y() < b.position.y();
                     return a.position.x() < b.position.x();
                   });
  if (kept.points.size() > budget) kept.points.resize(budget);
  return fill_random(std::move(kept), total, size, seed);
}

}  // namespace deltas
