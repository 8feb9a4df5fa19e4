#pragma once

#include <cstdint>
#include <vector>

#include "deltas/matching.hpp"
#include "deltas/triangulation.hpp"

namespace deltas {

struct GradCheckReport {
  int n_total = 0;
  int n_pass = 0;
  double worst_rel_error = 0.0;

  double pass_rate() const {
    return n_total == 0 ? 1.0 : double(n_pass) / double(n_total);
  }
};

/// Central-finite-difference check (step 1e-5) of the soft-argmax-of-softmax
/// Jacobian on seeded random correlation maps; an instance passes when the
/// worst entry-wise relative error is below 1e-4.
GradCheckReport gradcheck_matching(uint64_t seed, int n_instances);

/// Central-finite-difference check (step 1e-6) of the triangulation Jacobians
/// on seeded random well-conditioned multi-view instances.
GradCheckReport gradcheck_triangulation(uint64_t seed, int n_instances);

/// Seeded random multi-view triangulation instance: cameras, a world point in
/// front of all of them, and observations of it.
struct TriangulationInstance {
  std::vector<CameraView> views;
  Vec3 world_point;
  std::vector<Observation> observations;  // exact projections, unit weights
};

TriangulationInstance make_triangulation_instance(uint64_t seed, int n_views);

}  // namespace deltas
