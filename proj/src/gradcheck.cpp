#include "deltas/gradcheck.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "deltas/rng.hpp"

namespace deltas {

namespace {

EpipolarSampleGrid random_grid(CounterRng& rng, int width, int height) {
  EpipolarSampleGrid grid;
  grid.n_samples = width;
  grid.offset_px = (height - 1) / 2;
  grid.samples.resize(size_t(width) * height);
  grid.valid.resize(size_t(width) * height);
  grid.depths.resize(width);
  const Vec2 origin(10.0 + 40.0 * rng.next_double(),
                    10.0 + 40.0 * rng.next_double());
  const double angle = 2.0 * 3.141592653589793 * rng.next_double();
  const Vec2 dir(std::cos(angle), std::sin(angle));
  const Vec2 normal(-dir.y(), dir.x());
  const double spacing = 0.5 + 2.0 * rng.next_double();
  int n_valid = 0;
  for (int r = 0; r < height; ++r) {
    for (int i = 0; i < width; ++i) {
      grid.samples[r * width + i] =
          origin + spacing * i * dir + double(r - grid.offset_px) * normal;
      const bool ok = rng.next_double() > 0.1;
      grid.valid[r * width + i] = ok;
      n_valid += ok;
    }
  }
  if (n_valid < 2) return random_grid(rng, width, height);
  for (int i = 0; i < width; ++i) grid.depths[i] = 1.0 + i;
  return grid;
}

double matching_instance_error(CounterRng rng) {
  const int width = 8 + int(rng.next_below(8));
  const int height = 3;
  const EpipolarSampleGrid grid = random_grid(rng, width, height);

  CorrelationMap map;
  map.grid = grid;
  map.values.assign(grid.size(), kInvalidCorrelation);
  for (int q = 0; q < grid.size(); ++q)
    if (grid.valid[q]) map.values[q] = 1.5 * rng.next_normal();

  const Eigen::Matrix2Xd analytic = soft_argmax_jacobian(map);

  const double h = 1e-5;
  double worst_abs = 0.0;
  double scale = 1e-12;
  Eigen::Matrix2Xd fd = Eigen::Matrix2Xd::Zero(2, grid.size());
  for (int q = 0; q < grid.size(); ++q) {
    if (!grid.valid[q]) continue;
    CorrelationMap plus = map, minus = map;
    plus.values[q] += h;
    minus.values[q] -= h;
    const Vec2 xp = soft_argmax(spatial_softmax(plus), grid);
    const Vec2 xm = soft_argmax(spatial_softmax(minus), grid);
    fd.col(q) = (xp - xm) / (2.0 * h);
  }
  scale = std::max(scale, fd.cwiseAbs().maxCoeff());
  worst_abs = (analytic - fd).cwiseAbs().maxCoeff();
  return worst_abs / scale;
}

}  // namespace

TriangulationInstance make_triangulation_instance(uint64_t seed, int n_views) {
  CounterRng rng(seed, "triangulation_instance");
  for (int attempt = 0; attempt < 100; ++attempt) {
    TriangulationInstance inst;
    Mat3 K = Mat3::Identity();
    K(0, 0) = K(1, 1) = 200.0 + 200.0 * rng.next_double();
    K(0, 2) = 160.0;
    K(1, 2) = 120.0;
    const ImageSize size{320, 240};

    bool ok = true;
    for (int v = 0; v < n_views; ++v) {
      Vec3 center = Vec3::Zero();
      Mat3 R = Mat3::Identity();
      if (v > 0) {
        center = Vec3(rng.next_normal(), rng.next_normal(), rng.next_normal()) * 0.3;
        if (center.norm() < 0.05) center = Vec3(0.3, 0.0, 0.0);
        const Vec3 axis =
            Vec3(rng.next_normal(), rng.next_normal(), rng.next_normal()).normalized();
        R = Eigen::AngleAxisd(0.1 * rng.next_normal(), axis).toRotationMatrix();
      }
      inst.views.emplace_back(K, R, -R * center, size);
    }

    const Vec2 pixel(40.0 + 240.0 * rng.next_double(),
                     40.0 + 160.0 * rng.next_double());
    inst.world_point = inst.views[0].unproject(pixel, 1.5 + 3.0 * rng.next_double());

    for (const CameraView& view : inst.views) {
      try {
        const ProjectedPoint p = project(view, inst.world_point);
        inst.observations.push_back({p.pixel, view.projection(), 1.0});
      } catch (const Error&) {
        ok = false;
        break;
      }
    }
    if (ok) return inst;
  }
  fail(ErrorCode::infeasible, "could not build a triangulation instance");
}

GradCheckReport gradcheck_matching(uint64_t seed, int n_instances) {
  CounterRng root(seed, "gradcheck_matching");
  GradCheckReport report;
  report.n_total = n_instances;
  for (int i = 0; i < n_instances; ++i) {
    const double rel = matching_instance_error(root.derive(uint64_t(i)));
    report.worst_rel_error = std::max(report.worst_rel_error, rel);
    if (rel < 1e-4) ++report.n_pass;
  }
  return report;
}

GradCheckReport gradcheck_triangulation(uint64_t seed, int n_instances) {
  CounterRng root(seed, "gradcheck_triangulation");
  GradCheckReport report;
  report.n_total = n_instances;

  for (int i = 0; i < n_instances; ++i) {
    CounterRng rng = root.derive(uint64_t(i));
    TriangulationInstance inst =
        make_triangulation_instance(rng.next_u64(), 3 + int(rng.next_below(3)));

    // Perturb pixels and mix weights so the instance is generic: the exact
    // solution has zero residual, which would hide weight-gradient errors.
    std::vector<Observation> obs = inst.observations;
    for (Observation& o : obs) {
      o.pixel.x() += 0.3 * rng.next_normal();
      o.pixel.y() += 0.3 * rng.next_normal();
      o.weight = 0.3 + 0.7 * rng.next_double();
    }

    TriangulationGradients grads;
    try {
      grads = grad_triangulate(obs, 1.05);
    } catch (const Error&) {
      --report.n_total;  // near-degenerate instances are skipped, not failed
      continue;
    }

    const double h = 1e-6;
    double worst = 0.0;
    double scale = 1e-9;
    const auto fd = [&](Observation& slot, double& field) -> Vec3 {
      const double saved = field;
      field = saved + h;
      const Vec3 zp = triangulate(obs).point;
      field = saved - h;
      const Vec3 zm = triangulate(obs).point;
      field = saved;
      (void)slot;
      return (zp - zm) / (2.0 * h);
    };
    for (size_t k = 0; k < obs.size(); ++k) {
      const Vec3 du = fd(obs[k], obs[k].pixel.x());
      const Vec3 dv = fd(obs[k], obs[k].pixel.y());
      const Vec3 dw = fd(obs[k], obs[k].weight);
      scale = std::max({scale, du.cwiseAbs().maxCoeff(), dv.cwiseAbs().maxCoeff(),
                        dw.cwiseAbs().maxCoeff()});
      worst = std::max({worst,
                        (grads.d_pixel[k].col(0) - du).cwiseAbs().maxCoeff(),
                        (grads.d_pixel[k].col(1) - dv).cwiseAbs().maxCoeff(),
                        (grads.d_weight[k] - dw).cwiseAbs().maxCoeff()});
    }
    const double rel = worst / scale;
    report.worst_rel_error = std::max(report.worst_rel_error, rel);
    if (rel < 1e-4) ++report.n_pass;
  }
  return report;
}

}  // namespace deltas
