#include "deltas/scene_synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "deltas/io.hpp"
#include "deltas/rng.hpp"

namespace deltas {

namespace {

int round_half_up(double v) { return int(std::floor(v + 0.5)); }

Eigen::VectorXd random_unit_vector(CounterRng rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.next_normal();
  const double n = v.norm();
  return n > 0 ? Eigen::VectorXd(v / n) : random_unit_vector(rng.derive(1u), dim);
}

Mat3 jittered_rotation(CounterRng rng, double sigma) {
  if (sigma == 0.0) return Mat3::Identity();
  const double rx = sigma * rng.next_normal();
  const double ry = sigma * rng.next_normal();
  const double rz = sigma * rng.next_normal();
  return (Eigen::AngleAxisd(rz, Vec3::UnitZ()) *
          Eigen::AngleAxisd(ry, Vec3::UnitY()) *
          Eigen::AngleAxisd(rx, Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace

Scene generate_scene(const SceneConfig& config_in) {
  SceneConfig config = config_in;
  if (config.descriptor_dim == 0) config.descriptor_dim = config.n_points + 64;
  require(config.n_views >= 2, ErrorCode::invalid_config, "need n_views >= 2");
  require(config.n_points >= 1, ErrorCode::invalid_config, "need n_points >= 1");
  require(config.depth_min > 0.0 && config.depth_min < config.depth_max,
          ErrorCode::invalid_config, "need 0 < depth_min < depth_max");
  require(config.descriptor_dim >= 2, ErrorCode::invalid_config,
          "need descriptor_dim >= 2");
  require(config.stride >= 1 && config.width > 0 && config.height > 0,
          ErrorCode::invalid_config, "bad image geometry");

  Scene scene;
  scene.config = config;
  const CounterRng root(config.seed);

  // Cameras: anchor at the origin, auxiliary centers straddling it.
  Mat3 K = Mat3::Identity();
  K(0, 0) = K(1, 1) = config.focal;
  K(0, 2) = (config.width - 1) / 2.0;
  K(1, 2) = (config.height - 1) / 2.0;
  const ImageSize size{config.width, config.height};

  scene.views.emplace_back(K, Mat3::Identity(), Vec3::Zero(), size);
  CounterRng view_rng = root.derive("views");
  // Auxiliary baselines alternate sides and directions (horizontal, vertical,
  // diagonal) so additional views constrain the point along different image
  // axes rather than piling up along x.
  static constexpr double kDir[][2] = {{1, 0},     {-1, 0},    {0, 0.6},
                                       {0, -0.6},  {0.7, 0.7}, {-0.7, -0.7},
                                       {0.7, -0.7}, {-0.7, 0.7}};
  for (int k = 1; k < config.n_views; ++k) {
    const int slot = (k - 1) % 8;
    const double scale = 1.0 + 0.25 * ((k - 1) / 8);
    const Mat3 R = jittered_rotation(view_rng.derive(uint64_t(k)),
                                     config.rotation_jitter);
    const Vec3 center(config.baseline * scale * kDir[slot][0],
                      config.baseline * scale * kDir[slot][1], 0.0);
    scene.views.emplace_back(K, R, -R * center, size);
  }

  // Planted points: distinct integer anchor pixels on the descriptor-grid
  // lattice (so the anchor descriptor is sampled exactly at a grid node),
  // inverse-depth-uniform depths. Every point is visible in the anchor by
  // construction.
  CounterRng point_rng = root.derive("points");
  std::unordered_set<uint64_t> used;
  const int lat0_x = (config.margin + config.stride - 1) / config.stride;
  const int lat0_y = lat0_x;
  const int lat1_x = (config.width - 1 - config.margin) / config.stride;
  const int lat1_y = (config.height - 1 - config.margin) / config.stride;
  const int span_x = lat1_x - lat0_x + 1;
  const int span_y = lat1_y - lat0_y + 1;
  require(span_x > 0 && span_y > 0 &&
              uint64_t(span_x) * uint64_t(span_y) >= uint64_t(config.n_points),
          ErrorCode::infeasible, "image too small for the requested points");
  const double inv_min = 1.0 / config.depth_min;
  const double inv_max = 1.0 / config.depth_max;
  // Separation is enforced in every view: two points may sit far apart in the
  // anchor yet collide in an auxiliary image when their disparities cancel,
  // which would blend their splats and corrupt both matches.
  std::vector<std::vector<Vec2>> accepted_proj(config.n_views);
  const double aux_sep = 0.7 * config.min_separation;
  int rejections = 0;
  while (int(scene.points.size()) < config.n_points) {
    const int x =
        config.stride * (lat0_x + int(point_rng.next_below(uint64_t(span_x))));
    const int y =
        config.stride * (lat0_y + int(point_rng.next_below(uint64_t(span_y))));
    const double d =
        1.0 / (inv_max + point_rng.next_double() * (inv_min - inv_max));
    bool too_close = used.count(uint64_t(y) * config.width + x) > 0;
    for (const Vec2& q : scene.anchor_pixels) {
      if (too_close) break;
      too_close = std::max(std::abs(q.x() - x), std::abs(q.y() - y)) <
                  config.min_separation;
    }
    const Vec3 X = scene.views[0].unproject(Vec2(x, y), d);
    std::vector<Vec2> proj(config.n_views, Vec2::Zero());
    std::vector<uint8_t> proj_ok(config.n_views, 0);
    for (int v = 1; v < config.n_views && !too_close; ++v) {
      const Vec3 h = scene.views[v].projection() * X.homogeneous();
      if (h.z() <= 1e-9) continue;
      proj[v] = h.head<2>() / h.z();
      proj_ok[v] = 1;
      for (const Vec2& q : accepted_proj[v]) {
        if ((proj[v] - q).cwiseAbs().maxCoeff() < aux_sep) {
          too_close = true;
          break;
        }
      }
    }
    if (too_close) {
      require(++rejections <= 1000, ErrorCode::infeasible,
              "rejection sampling failed to place separated points");
      continue;
    }
    rejections = 0;
    used.insert(uint64_t(y) * config.width + x);
    for (int v = 1; v < config.n_views; ++v)
      if (proj_ok[v]) accepted_proj[v].push_back(proj[v]);
    scene.anchor_pixels.emplace_back(x, y);
    scene.points.push_back(X);
  }

  // Random descriptors. When the descriptor dimension allows it they are
  // drawn as a random orthonormal set (QR of a Gaussian matrix) and the
  // background vectors live in the orthogonal complement, so correlations of
  // one point against anything that is not its own splat are exactly zero.
  CounterRng desc_rng = root.derive("descriptors");
  const int N = config.descriptor_dim;
  const bool orthonormal = N > config.n_points;
  Eigen::MatrixXd complement;  // columns: basis of the background subspace
  if (orthonormal) {
    Eigen::MatrixXd G(N, N);
    for (int c = 0; c < N; ++c)
      for (int r = 0; r < N; ++r) G(r, c) = desc_rng.next_normal();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd R = qr.matrixQR();
    for (int c = 0; c < N; ++c)
      if (R(c, c) < 0.0) Q.col(c) = -Q.col(c);
    for (int j = 0; j < config.n_points; ++j)
      scene.descriptors.push_back(Q.col(j));
    const int comp = std::min<int>(N - config.n_points, 32);
    complement = Q.rightCols(N - config.n_points).leftCols(comp);
  } else {
    for (int j = 0; j < config.n_points; ++j)
      scene.descriptors.push_back(
          random_unit_vector(desc_rng.derive(uint64_t(j)), N));
  }

  // Per-view splat centers (exact projections; auxiliary views optionally
  // jittered to model observation noise).
  CounterRng noise_rng = root.derive("noise");
  std::vector<std::vector<Vec2>> centers(config.n_views);
  std::vector<std::vector<uint8_t>> in_front(config.n_views);
  std::vector<std::vector<double>> depths(config.n_views);
  for (int v = 0; v < config.n_views; ++v) {
    centers[v].assign(config.n_points, Vec2::Zero());
    in_front[v].assign(config.n_points, 0);
    depths[v].assign(config.n_points, 0.0);
    CounterRng vn = noise_rng.derive(uint64_t(v));
    for (int j = 0; j < config.n_points; ++j) {
      CounterRng pn = vn.derive(uint64_t(j));
      const Vec3 h = scene.views[v].projection() * scene.points[j].homogeneous();
      if (h.z() <= 1e-9) continue;
      Vec2 p = h.head<2>() / h.z();
      if (v > 0 && config.pixel_noise > 0.0) {
        p.x() += config.pixel_noise * pn.next_normal();
        p.y() += config.pixel_noise * pn.next_normal();
      }
      centers[v][j] = p;
      in_front[v][j] = 1;
      depths[v][j] = h.z();
    }
  }

  // Descriptor fields: per-cell sum of Gaussian splats of the planted
  // descriptors plus a per-view background direction, renormalized to keep
  // the unit-descriptor invariant.
  CounterRng bg_rng = root.derive("background");
  const int gw = (config.width + config.stride - 1) / config.stride;
  const int gh = (config.height + config.stride - 1) / config.stride;
  const double s = config.stride;
  const double sigma_c = config.peak_sharpness;
  const double reach_px = 4.0 * sigma_c * s;
  for (int v = 0; v < config.n_views; ++v) {
    std::vector<double> acc(size_t(gw) * gh * config.descriptor_dim, 0.0);
    const double clearance = v == 0 ? 0.0 : config.edge_clearance * sigma_c * s;
    for (int j = 0; j < config.n_points; ++j) {
      if (!in_front[v][j]) continue;
      const Vec2& p = centers[v][j];
      // A splat hugging the frame edge would be sampled asymmetrically by the
      // epipolar band; dropping it makes the view report ~zero confidence for
      // this point instead of a clipped, biased peak.
      if (p.x() < clearance || p.x() > config.width - 1 - clearance ||
          p.y() < clearance || p.y() > config.height - 1 - clearance)
        continue;
      const int gx0 = std::max(0, int(std::ceil((p.x() - reach_px) / s)));
      const int gx1 = std::min(gw - 1, int(std::floor((p.x() + reach_px) / s)));
      const int gy0 = std::max(0, int(std::ceil((p.y() - reach_px) / s)));
      const int gy1 = std::min(gh - 1, int(std::floor((p.y() + reach_px) / s)));
      const Eigen::VectorXd& d = scene.descriptors[j];
      for (int gy = gy0; gy <= gy1; ++gy) {
        for (int gx = gx0; gx <= gx1; ++gx) {
          const double dx = (gx * s - p.x()) / s;
          const double dy = (gy * s - p.y()) / s;
          const double w =
              std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_c * sigma_c));
          double* cell = acc.data() + (size_t(gy) * gw + gx) * config.descriptor_dim;
          for (int n = 0; n < config.descriptor_dim; ++n) cell[n] += w * d[n];
        }
      }
    }

    DescriptorField field;
    field.grid_width = gw;
    field.grid_height = gh;
    field.dim = config.descriptor_dim;
    field.stride = config.stride;
    field.values.resize(acc.size());
    // One background direction per view. In the orthonormal construction the
    // per-view directions are mutually orthogonal and orthogonal to every
    // planted descriptor, so cross-view background correlation is exactly
    // zero and an unmatched view reports confidence ~0.
    CounterRng vb = bg_rng.derive(uint64_t(v));
    const Eigen::VectorXd view_bg =
        orthonormal ? Eigen::VectorXd(complement.col(v % complement.cols()))
                    : random_unit_vector(vb, config.descriptor_dim);
    for (int gy = 0; gy < gh; ++gy) {
      for (int gx = 0; gx < gw; ++gx) {
        const size_t idx = size_t(gy) * gw + gx;
        double* cell = acc.data() + idx * config.descriptor_dim;
        double norm_sq = 0.0;
        for (int n = 0; n < config.descriptor_dim; ++n) {
          cell[n] += config.background_scale * view_bg[n];
          norm_sq += cell[n] * cell[n];
        }
        const double inv_norm = 1.0 / std::sqrt(norm_sq);
        float* out = field.node(gx, gy);
        for (int n = 0; n < config.descriptor_dim; ++n)
          out[n] = float(cell[n] * inv_norm);
      }
    }
    scene.fields.push_back(std::move(field));
  }

  // Score maps: Gaussian bumps at the (unjittered) projections, max-combined
  // so each planted pixel keeps its own peak.
  CounterRng score_rng = root.derive("scores");
  std::vector<double> amplitude(config.n_points);
  for (int j = 0; j < config.n_points; ++j)
    amplitude[j] = 0.6 + 0.39 * score_rng.derive(uint64_t(j)).next_double();
  const double score_reach = 4.0 * config.score_sigma;
  for (int v = 0; v < config.n_views; ++v) {
    ScoreMap map;
    map.width = config.width;
    map.height = config.height;
    map.values.assign(size_t(config.width) * config.height, 0.0f);
    for (int j = 0; j < config.n_points; ++j) {
      if (!in_front[v][j]) continue;
      const Vec3 h = scene.views[v].projection() * scene.points[j].homogeneous();
      const Vec2 p = h.head<2>() / h.z();
      const int x0 = std::max(0, int(std::ceil(p.x() - score_reach)));
      const int x1 = std::min(config.width - 1, int(std::floor(p.x() + score_reach)));
      const int y0 = std::max(0, int(std::ceil(p.y() - score_reach)));
      const int y1 = std::min(config.height - 1, int(std::floor(p.y() + score_reach)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double dx = x - p.x();
          const double dy = y - p.y();
          const float val = float(
              amplitude[j] *
              std::exp(-(dx * dx + dy * dy) /
                       (2.0 * config.score_sigma * config.score_sigma)));
          map.at(x, y) = std::max(map.at(x, y), val);
        }
      }
    }
    scene.score_maps.push_back(std::move(map));
  }

  // Sparse ground-truth depth: projective depth at the rounded projection,
  // nearer point wins on collision. In the anchor the pixels are the planted
  // integers, so the stored depth is exact there.
  for (int v = 0; v < config.n_views; ++v) {
    DepthImage gt = DepthImage::all_invalid(size);
    for (int j = 0; j < config.n_points; ++j) {
      if (!in_front[v][j]) continue;
      const Vec3 h = scene.views[v].projection() * scene.points[j].homogeneous();
      const Vec2 p = h.head<2>() / h.z();
      const int x = round_half_up(p.x());
      const int y = round_half_up(p.y());
      if (x < 0 || x >= config.width || y < 0 || y >= config.height) continue;
      if (gt.valid_at(x, y) && gt.at(x, y) <= depths[v][j]) continue;
      gt.set(x, y, depths[v][j]);
    }
    scene.gt_depth.push_back(std::move(gt));
  }

  return scene;
}

Vec2 oracle_match(const Scene& scene, int point_id, int view_id) {
  require(point_id >= 0 && point_id < int(scene.points.size()) && view_id >= 0 &&
              view_id < int(scene.views.size()),
          ErrorCode::invalid_config, "point or view index out of range");
  const ProjectedPoint p = project(scene.views[view_id], scene.points[point_id]);
  require(scene.views[view_id].contains(p.pixel), ErrorCode::out_of_bounds,
          "point is not visible in the requested view");
  return p.pixel;
}

namespace {

// Cyclic Jacobi eigen-decomposition of a symmetric 4x4 matrix; returns the
// eigenvector of the smallest eigenvalue. Kept free of any SVD machinery so
// it is a genuinely independent route.
Vec4 smallest_eigenvector_jacobi(Eigen::Matrix4d M) {
  Eigen::Matrix4d V = Eigen::Matrix4d::Identity();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) off += M(p, q) * M(p, q);
    if (off < 1e-300 || off < 1e-30 * M.diagonal().cwiseAbs().maxCoeff()) break;

    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        if (M(p, q) == 0.0) continue;
        const double theta = (M(q, q) - M(p, p)) / (2.0 * M(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Eigen::Matrix4d G = Eigen::Matrix4d::Identity();
        G(p, p) = c;
        G(q, q) = c;
        G(p, q) = s;
        G(q, p) = -s;
        M = G.transpose() * M * G;
        M(p, q) = M(q, p) = 0.0;
        V = V * G;
      }
    }
  }
  int arg = 0;
  M.diagonal().minCoeff(&arg);
  Vec4 v = V.col(arg);
  return v / v.norm();
}

}  // namespace

Vec3 triangulate_normal_equations(const std::vector<Observation>& observations) {
  require(observations.size() >= 2, ErrorCode::underdetermined,
          "need at least two observations");
  Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
  for (const Observation& o : observations) {
    const Eigen::RowVector4d r0 =
        o.pixel.x() * o.projection.row(2) - o.projection.row(0);
    const Eigen::RowVector4d r1 =
        o.pixel.y() * o.projection.row(2) - o.projection.row(1);
    M += r0.transpose() * r0 + r1.transpose() * r1;
  }
  Vec4 z_bar = smallest_eigenvector_jacobi(M);
  if (z_bar[3] < 0.0) z_bar = -z_bar;
  require(std::abs(z_bar[3]) > 1e-12, ErrorCode::point_at_infinity,
          "reference solution lies at infinity");
  return z_bar.head<3>() / z_bar[3];
}

Vec3 oracle_triangulate(const Scene& scene, int point_id, double pixel_noise_sd,
                        uint64_t seed) {
  require(point_id >= 0 && point_id < int(scene.points.size()),
          ErrorCode::invalid_config, "point index out of range");
  CounterRng rng = CounterRng(seed, "oracle_triangulate").derive(uint64_t(point_id));

  std::vector<Observation> obs;
  for (size_t v = 0; v < scene.views.size(); ++v) {
    Vec2 pixel;
    try {
      pixel = oracle_match(scene, point_id, int(v));
    } catch (const Error&) {
      continue;
    }
    if (pixel_noise_sd > 0.0) {
      pixel.x() += pixel_noise_sd * rng.next_normal();
      pixel.y() += pixel_noise_sd * rng.next_normal();
    }
    obs.push_back({pixel, scene.views[v].projection(), 1.0});
  }
  require(obs.size() >= 2, ErrorCode::underdetermined,
          "point is visible in fewer than two views");
  return triangulate_normal_equations(obs);
}

void dump_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_cameras_json(dir / "cameras.json", scene.views);
  for (size_t v = 0; v < scene.views.size(); ++v) {
    char name[32];
    std::snprintf(name, sizeof(name), "view%02zu", v);
    write_descriptor_field(dir / (std::string(name) + ".desc"), scene.fields[v]);
    write_score_map(dir / (std::string(name) + ".smap"), scene.score_maps[v]);
    write_pfm(dir / (std::string(name) + "_gt.pfm"), scene.gt_depth[v]);
  }
}

}  // namespace deltas
