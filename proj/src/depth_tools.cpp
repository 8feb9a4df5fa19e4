#include "deltas/depth_tools.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deltas {

namespace {

int round_half_up(double v) { return int(std::floor(v + 0.5)); }

void check_same_size(int wa, int ha, int wb, int hb) {
  require(wa == wb && ha == hb, ErrorCode::resolution_mismatch,
          "image resolutions do not match");
}

}  // namespace

ImputeResult impute_sparse_depth(const std::vector<SparseDepthPoint>& points,
                                 ImageSize size) {
  ImputeResult out;
  out.image = DepthImage::all_invalid(size);
  out.source.assign(size_t(size.width) * size.height, -1);

  for (size_t j = 0; j < points.size(); ++j) {
    const SparseDepthPoint& p = points[j];
    require(p.depth > 0.0, ErrorCode::invalid_depth,
            "sparse depth values must be positive");
    const int x = round_half_up(p.pixel.x());
    const int y = round_half_up(p.pixel.y());
    if (x < 0 || x >= size.width || y < 0 || y >= size.height) continue;

    const size_t idx = size_t(y) * size.width + x;
    if (out.source[idx] >= 0) {
      const SparseDepthPoint& held = points[out.source[idx]];
      const bool replace = p.confidence > held.confidence ||
                           (p.confidence == held.confidence && p.depth < held.depth);
      if (!replace) continue;
    }
    out.source[idx] = int32_t(j);
    out.image.set(x, y, p.depth);
  }
  return out;
}

DepthImage densify_idw(const DepthImage& sparse, double power, int k_neighbors,
                       int num_threads) {
  require(k_neighbors >= 1, ErrorCode::invalid_config, "k_neighbors must be >= 1");
  struct Seed {
    int x, y;
    double depth;
  };
  std::vector<Seed> seeds;
  for (int y = 0; y < sparse.height; ++y)
    for (int x = 0; x < sparse.width; ++x)
      if (sparse.valid_at(x, y)) seeds.push_back({x, y, sparse.at(x, y)});
  require(!seeds.empty(), ErrorCode::no_valid_pixels,
          "cannot densify an image with no valid pixels");

  DepthImage out = sparse;
  const int k = std::min<int>(k_neighbors, int(seeds.size()));

  const auto fill_pixel = [&](int x, int y) {
    if (sparse.valid_at(x, y)) return;
    // k nearest seeds by squared distance, ties broken by (y, x) but all
    // seeds at the cutoff distance are included.
    static thread_local std::vector<std::pair<double, size_t>> dist;
    dist.resize(seeds.size());
    for (size_t s = 0; s < seeds.size(); ++s) {
      const double dx = seeds[s].x - x;
      const double dy = seeds[s].y - y;
      dist[s] = {dx * dx + dy * dy, s};
    }
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    const double cutoff = dist[k - 1].first;

    double weight_sum = 0.0;
    double value_sum = 0.0;
    for (const auto& [d2, s] : dist) {
      if (d2 > cutoff) continue;
      const double w = 1.0 / std::pow(std::sqrt(d2), power);
      weight_sum += w;
      value_sum += w * seeds[s].depth;
    }
    out.set(x, y, value_sum / weight_sum);
  };

  if (num_threads <= 0) {
    for (int y = 0; y < sparse.height; ++y)
      for (int x = 0; x < sparse.width; ++x) fill_pixel(x, y);
  } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(num_threads)
    for (int y = 0; y < sparse.height; ++y)
      for (int x = 0; x < sparse.width; ++x) fill_pixel(x, y);
#else
    for (int y = 0; y < sparse.height; ++y)
      for (int x = 0; x < sparse.width; ++x) fill_pixel(x, y);
#endif
  }
  return out;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double s = 0.0;
    for (const double v : values) s += v;
    return s;
  }
  const size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MetricsReport depth_metrics(const DepthImage& pred, const DepthImage& gt) {
  check_same_size(pred.width, pred.height, gt.width, gt.height);

  std::vector<double> abs_rel, abs_diff, sq_rel, sq, sq_log;
  long n = 0, in1 = 0, in2 = 0, in3 = 0;
  const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    if (!pred.valid[i] || !gt.valid[i]) continue;
    const double p = pred.values[i];
    const double g = gt.values[i];
    const double d = p - g;
    abs_rel.push_back(std::abs(d) / g);
    abs_diff.push_back(std::abs(d));
    sq_rel.push_back(d * d / g);
    sq.push_back(d * d);
    const double lg = std::log(p) - std::log(g);
    sq_log.push_back(lg * lg);
    const double ratio = std::max(p / g, g / p);
    in1 += ratio < t1;
    in2 += ratio < t2;
    in3 += ratio < t3;
    ++n;
  }
  require(n > 0, ErrorCode::no_valid_pixels, "no jointly valid pixels");

  MetricsReport r;
  r.n_valid = n;
  r.abs_rel = pairwise_sum(abs_rel) / n;
  r.abs_diff = pairwise_sum(abs_diff) / n;
  r.sq_rel = pairwise_sum(sq_rel) / n;
  r.rmse = std::sqrt(pairwise_sum(sq) / n);
  r.rmse_log = std::sqrt(pairwise_sum(sq_log) / n);
  r.delta1 = double(in1) / n;
  r.delta2 = double(in2) / n;
  r.delta3 = double(in3) / n;
  return r;
}

double smooth_l1(std::span<const double> pred, std::span<const double> target,
                 double beta) {
  require(pred.size() == target.size(), ErrorCode::dimension_mismatch,
          "smooth_l1 inputs must have equal length");
  require(!pred.empty(), ErrorCode::invalid_config, "smooth_l1 inputs are empty");
  require(beta > 0.0, ErrorCode::invalid_config, "huber beta must be positive");

  std::vector<double> terms(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = std::abs(pred[i] - target[i]);
    terms[i] = d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
  }
  return pairwise_sum(terms) / double(terms.size());
}

double edge_aware_smoothness(const DepthImage& depth, const GrayImage& image) {
  check_same_size(depth.width, depth.height, image.width, image.height);
  require(depth.width >= 2 || depth.height >= 2, ErrorCode::invalid_config,
          "smoothness needs pixel pairs in at least one direction");

  std::vector<double> tx, ty;
  tx.reserve(size_t(depth.height) * (depth.width - 1));
  ty.reserve(size_t(depth.height - 1) * depth.width);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x + 1 < depth.width; ++x) {
      const double dd = depth.at(x + 1, y) - depth.at(x, y);
      const double di = image.at(x + 1, y) - image.at(x, y);
      tx.push_back(std::abs(dd) * std::exp(-std::abs(di)));
    }
  }
  for (int y = 0; y + 1 < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const double dd = depth.at(x, y + 1) - depth.at(x, y);
      const double di = image.at(x, y + 1) - image.at(x, y);
      ty.push_back(std::abs(dd) * std::exp(-std::abs(di)));
    }
  }
  const double mean_x = tx.empty() ? 0.0 : pairwise_sum(tx) / double(tx.size());
  const double mean_y = ty.empty() ? 0.0 : pairwise_sum(ty) / double(ty.size());
  return mean_x + mean_y;
}

double detector_cross_entropy(const DetectorLogits& logits,
                              const std::vector<int>& labels) {
  require(logits.cells_x > 0 && logits.cells_y > 0 && logits.n_classes >= 2 &&
              logits.values.size() == size_t(logits.cells_x) * logits.cells_y *
                                          logits.n_classes,
          ErrorCode::invalid_config, "logit tensor shape is inconsistent");
  require(labels.size() == size_t(logits.cells_x) * logits.cells_y,
          ErrorCode::dimension_mismatch, "one label per cell required");

  std::vector<double> terms(labels.size());
  for (size_t c = 0; c < labels.size(); ++c) {
    const int label = labels[c];
    require(label >= 0 && label < logits.n_classes, ErrorCode::label_out_of_range,
            "label outside [0, n_classes)");
    const double* v = logits.values.data() + c * logits.n_classes;
    double max_v = v[0];
    for (int i = 1; i < logits.n_classes; ++i) max_v = std::max(max_v, v[i]);
    double lse = 0.0;
    for (int i = 0; i < logits.n_classes; ++i) lse += std::exp(v[i] - max_v);
    terms[c] = std::log(lse) + max_v - v[label];
  }
  return pairwise_sum(terms) / double(terms.size());
}

void validate_loss_config(const LossConfig& c) {
  require(c.w_ip >= 0 && c.w_2d >= 0 && c.w_3d >= 0 && c.w_sm >= 0 && c.w_d1 >= 0,
          ErrorCode::invalid_config, "loss weights must be >= 0");
  require(c.n_scales >= 1, ErrorCode::invalid_config, "n_scales must be >= 1");
  require(c.scale_damping > 0.0 && c.scale_damping <= 1.0,
          ErrorCode::invalid_config, "scale damping must lie in (0,1]");
  require(c.huber_beta > 0.0, ErrorCode::invalid_config,
          "huber beta must be positive");
}

int pyramid_scale_factor(int level) {
  static constexpr int kFactors[4] = {1, 2, 4, 16};
  if (level < 4) return kFactors[level];
  return kFactors[3] << (level - 3);
}

DepthImage downsample_valid_mean(const DepthImage& image, int factor) {
  require(factor >= 1, ErrorCode::invalid_config, "factor must be >= 1");
  if (factor == 1) return image;
  DepthImage out = DepthImage::all_invalid(
      {(image.width + factor - 1) / factor, (image.height + factor - 1) / factor});
  for (int by = 0; by < out.height; ++by) {
    for (int bx = 0; bx < out.width; ++bx) {
      double sum = 0.0;
      int count = 0;
      for (int y = by * factor; y < std::min((by + 1) * factor, image.height); ++y) {
        for (int x = bx * factor; x < std::min((bx + 1) * factor, image.width); ++x) {
          if (!image.valid_at(x, y)) continue;
          sum += image.at(x, y);
          ++count;
        }
      }
      if (count > 0) out.set(bx, by, sum / count);
    }
  }
  return out;
}

double multiscale_depth_loss(const std::vector<DepthImage>& pred_pyramid,
                             const DepthImage& gt, const LossConfig& config) {
  validate_loss_config(config);
  require(pred_pyramid.size() == size_t(config.n_scales),
          ErrorCode::resolution_mismatch,
          "pyramid level count does not match n_scales");

  std::vector<double> losses(pred_pyramid.size());
  for (size_t i = 0; i < pred_pyramid.size(); ++i) {
    const int factor = pyramid_scale_factor(int(i));
    const DepthImage gt_i = downsample_valid_mean(gt, factor);
    check_same_size(pred_pyramid[i].width, pred_pyramid[i].height, gt_i.width,
                    gt_i.height);
    std::vector<double> p, g;
    for (size_t px = 0; px < gt_i.values.size(); ++px) {
      if (!gt_i.valid[px] || !pred_pyramid[i].valid[px]) continue;
      p.push_back(pred_pyramid[i].values[px]);
      g.push_back(gt_i.values[px]);
    }
    require(!p.empty(), ErrorCode::no_valid_pixels,
            "no jointly valid pixels at a pyramid scale");
    losses[i] = smooth_l1(p, g, config.huber_beta);
  }

  double total = 0.0;
  double w = config.w_d1;
  for (const double l : losses) {
    total += w * l;
    w *= config.scale_damping;
  }
  return total;
}

double total_loss(double l_ip, double l_2d, double l_3d, double l_sm,
                  std::span<const double> depth_losses,
                  const LossConfig& config) {
  validate_loss_config(config);
  require(std::isfinite(l_ip) && std::isfinite(l_2d) && std::isfinite(l_3d) &&
              std::isfinite(l_sm),
          ErrorCode::non_finite, "loss components must be finite");
  double total = config.w_ip * l_ip + config.w_2d * l_2d + config.w_3d * l_3d +
                 config.w_sm * l_sm;
  double w = config.w_d1;
  for (const double l : depth_losses) {
    require(std::isfinite(l), ErrorCode::non_finite,
            "loss components must be finite");
    total += w * l;
    w *= config.scale_damping;
  }
  return total;
}

}  // namespace deltas
