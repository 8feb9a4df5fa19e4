#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "deltas/depth_tools.hpp"
#include "deltas/rng.hpp"

using namespace deltas;

namespace {

DepthImage image_from(std::vector<double> values, int width, int height) {
  DepthImage d = DepthImage::all_invalid({width, height});
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] > 0.0) {
      d.values[i] = values[i];
      d.valid[i] = 1;
    }
  }
  return d;
}

}  // namespace

TEST_CASE("impute_sparse_depth") {
  SUBCASE("round-to-nearest with ties toward +infinity") {
    const ImputeResult r =
        impute_sparse_depth({{Vec2(12.4, 7.6), 3.0, 1.0}}, {32, 32});
    CHECK(r.image.valid_at(12, 8));
    CHECK(r.image.at(12, 8) == 3.0);
    CHECK(r.source[8 * 32 + 12] == 0);
    const ImputeResult t =
        impute_sparse_depth({{Vec2(4.5, 9.5), 2.0, 1.0}}, {32, 32});
    CHECK(t.image.valid_at(5, 10));
  }
  SUBCASE("higher confidence wins a collision") {
    const ImputeResult r = impute_sparse_depth(
        {{Vec2(10, 10), 5.0, 0.4}, {Vec2(10.2, 9.9), 3.0, 0.9}}, {32, 32});
    CHECK(r.image.at(10, 10) == 3.0);
    CHECK(r.source[10 * 32 + 10] == 1);
  }
  SUBCASE("confidence ties go to the smaller depth") {
    const ImputeResult r = impute_sparse_depth(
        {{Vec2(10, 10), 5.0, 0.7}, {Vec2(10, 10), 3.0, 0.7}}, {32, 32});
    CHECK(r.image.at(10, 10) == 3.0);
  }
  SUBCASE("empty input gives an all-invalid image") {
    const ImputeResult r = impute_sparse_depth({}, {16, 16});
    for (const uint8_t v : r.image.valid) CHECK(v == 0);
    for (const double v : r.image.values) CHECK(v == 0.0);
  }
  SUBCASE("non-positive depth is an error") {
    CHECK_THROWS_AS(impute_sparse_depth({{Vec2(3, 3), 0.0, 1.0}}, {8, 8}), Error);
    CHECK_THROWS_AS(impute_sparse_depth({{Vec2(3, 3), -1.0, 1.0}}, {8, 8}), Error);
  }
  SUBCASE("collision-free read-back recovers the inputs exactly") {
    CounterRng rng(3, "impute");
    std::vector<SparseDepthPoint> pts;
    for (int j = 0; j < 40; ++j) {
      pts.push_back({Vec2(double(2 * (j % 10)), double(2 * (j / 10))),
                     0.5 + rng.next_double() * 9.0, rng.next_double()});
    }
    const ImputeResult r = impute_sparse_depth(pts, {32, 32});
    for (size_t j = 0; j < pts.size(); ++j) {
      CHECK(r.image.at(int(pts[j].pixel.x()), int(pts[j].pixel.y())) ==
            pts[j].depth);
    }
  }
  SUBCASE("gradient routing: one depth perturbation moves exactly one pixel") {
    std::vector<SparseDepthPoint> pts = {{Vec2(4, 5), 2.0, 1.0},
                                         {Vec2(9, 2), 3.0, 1.0},
                                         {Vec2(20, 17), 4.0, 1.0}};
    const ImputeResult base = impute_sparse_depth(pts, {32, 32});
    const double eps = 1e-3;
    pts[1].depth += eps;
    const ImputeResult bumped = impute_sparse_depth(pts, {32, 32});
    int n_changed = 0;
    for (size_t i = 0; i < base.image.values.size(); ++i) {
      if (base.image.values[i] != bumped.image.values[i]) {
        ++n_changed;
        CHECK(bumped.image.values[i] - base.image.values[i] ==
              doctest::Approx(eps).epsilon(1e-12));
        CHECK(base.source[i] == 1);
      }
    }
    CHECK(n_changed == 1);
  }
}

TEST_CASE("densify_idw") {
  SUBCASE("single source floods the image") {
    DepthImage sparse = DepthImage::all_invalid({16, 12});
    sparse.set(5, 5, 4.2);
    const DepthImage dense = densify_idw(sparse, 2.0, 4);
    for (const double v : dense.values) CHECK(v == doctest::Approx(4.2));
  }
  SUBCASE("already dense input is unchanged") {
    DepthImage full = DepthImage::all_invalid({8, 8});
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) full.set(x, y, 1.0 + x + 8.0 * y);
    const DepthImage dense = densify_idw(full, 2.0, 4);
    for (size_t i = 0; i < full.values.size(); ++i)
      CHECK(dense.values[i] == full.values[i]);
  }
  SUBCASE("equidistant sources average regardless of power") {
    for (const double power : {1.0, 2.0, 3.5}) {
      DepthImage sparse = DepthImage::all_invalid({16, 3});
      sparse.set(4, 1, 2.0);
      sparse.set(8, 1, 4.0);
      const DepthImage dense = densify_idw(sparse, power, 2);
      CHECK(dense.at(6, 1) == doctest::Approx(3.0).epsilon(1e-12));
    }
  }
  SUBCASE("no valid pixels is an error") {
    CHECK_THROWS_AS(densify_idw(DepthImage::all_invalid({4, 4}), 2.0, 2), Error);
  }
  SUBCASE("parallel path equals the serial reference") {
    CounterRng rng(9, "idw");
    DepthImage sparse = DepthImage::all_invalid({40, 30});
    for (int j = 0; j < 25; ++j)
      sparse.set(int(rng.next_below(40)), int(rng.next_below(30)),
                 0.5 + rng.next_double() * 5.0);
    const DepthImage serial = densify_idw(sparse, 2.0, 4, 0);
    const DepthImage parallel = densify_idw(sparse, 2.0, 4, 4);
    for (size_t i = 0; i < serial.values.size(); ++i)
      CHECK(serial.values[i] == parallel.values[i]);
  }
}

TEST_CASE("depth_metrics") {
  SUBCASE("identical images have zero error and full inlier ratios") {
    const DepthImage d = image_from({1.0, 2.0, 3.0, 4.0}, 2, 2);
    const MetricsReport r = depth_metrics(d, d);
    CHECK(r.abs_rel == 0.0);
    CHECK(r.abs_diff == 0.0);
    CHECK(r.sq_rel == 0.0);
    CHECK(r.rmse == 0.0);
    CHECK(r.rmse_log == 0.0);
    CHECK(r.delta1 == 1.0);
    CHECK(r.delta2 == 1.0);
    CHECK(r.delta3 == 1.0);
    CHECK(r.n_valid == 4);
  }
  SUBCASE("single pixel, prediction 2 against truth 1") {
    const DepthImage pred = image_from({2.0}, 1, 1);
    const DepthImage gt = image_from({1.0}, 1, 1);
    const MetricsReport r = depth_metrics(pred, gt);
    CHECK(r.abs_rel == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.abs_diff == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.sq_rel == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.rmse == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r.rmse_log - std::log(2.0)) < 1e-12);
    // ratio 2 exceeds 1.25^3 = 1.953125.
    CHECK(r.delta1 == 0.0);
    CHECK(r.delta2 == 0.0);
    CHECK(r.delta3 == 0.0);
  }
  SUBCASE("two pixels, one 20% off") {
    const DepthImage pred = image_from({1.0, 1.2}, 2, 1);
    const DepthImage gt = image_from({1.0, 1.0}, 2, 1);
    const MetricsReport r = depth_metrics(pred, gt);
    CHECK(r.delta1 == 1.0);
    CHECK(r.abs_rel == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("evaluation is restricted to jointly valid pixels") {
    DepthImage pred = image_from({2.0, 5.0}, 2, 1);
    DepthImage gt = image_from({2.0, 0.0}, 2, 1);  // second pixel invalid
    const MetricsReport r = depth_metrics(pred, gt);
    CHECK(r.n_valid == 1);
    CHECK(r.abs_diff == 0.0);
  }
  SUBCASE("disjoint masks are an error") {
    const DepthImage pred = image_from({2.0, 0.0}, 2, 1);
    const DepthImage gt = image_from({0.0, 1.0}, 2, 1);
    CHECK_THROWS_AS(depth_metrics(pred, gt), Error);
  }
  SUBCASE("resolution mismatch is an error") {
    const DepthImage pred = image_from({2.0}, 1, 1);
    const DepthImage gt = image_from({1.0, 1.0}, 2, 1);
    CHECK_THROWS_AS(depth_metrics(pred, gt), Error);
  }
  SUBCASE("delta ratios are monotone and rmse bounds the mean signed error") {
    CounterRng rng(5, "metrics");
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> p(64), g(64);
      for (int i = 0; i < 64; ++i) {
        g[i] = 0.5 + 5.0 * rng.next_double();
        p[i] = g[i] * std::exp(0.4 * rng.next_normal());
      }
      const MetricsReport r =
          depth_metrics(image_from(p, 8, 8), image_from(g, 8, 8));
      CHECK(r.delta1 <= r.delta2);
      CHECK(r.delta2 <= r.delta3);
      CHECK(r.delta3 <= 1.0);
      double signed_mean = 0.0;
      for (int i = 0; i < 64; ++i) signed_mean += (p[i] - g[i]) / 64.0;
      CHECK(r.rmse >= std::abs(signed_mean) - 1e-12);
    }
  }
}

TEST_CASE("smooth_l1") {
  SUBCASE("zero at equality") {
    const std::vector<double> v = {1.0, 2.0, 3.0};
    CHECK(smooth_l1(v, v, 1.0) == 0.0);
  }
  SUBCASE("quadratic branch: d=0.5, beta=1 gives 0.125") {
    const std::vector<double> p = {0.5}, t = {0.0};
    CHECK(smooth_l1(p, t, 1.0) == doctest::Approx(0.125).epsilon(1e-12));
  }
  SUBCASE("linear branch: d=2, beta=1 gives 1.5") {
    const std::vector<double> p = {2.0}, t = {0.0};
    CHECK(smooth_l1(p, t, 1.0) == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("length mismatch is an error") {
    const std::vector<double> p = {1.0, 2.0}, t = {1.0};
    CHECK_THROWS_AS(smooth_l1(p, t, 1.0), Error);
  }
  SUBCASE("non-negative, zero only at equality") {
    CounterRng rng(7, "huber");
    std::vector<double> p(16), t(16);
    for (int i = 0; i < 16; ++i) {
      p[i] = rng.next_normal();
      t[i] = rng.next_normal();
    }
    CHECK(smooth_l1(p, t, 1.0) > 0.0);
  }
}

TEST_CASE("edge_aware_smoothness") {
  const auto gray = [](std::vector<double> v, int w, int h) {
    GrayImage g;
    g.width = w;
    g.height = h;
    g.values = std::move(v);
    return g;
  };
  SUBCASE("constant depth scores zero") {
    DepthImage d = DepthImage::all_invalid({4, 4});
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) d.set(x, y, 2.5);
    const GrayImage img = gray(std::vector<double>(16, 0.3), 4, 4);
    CHECK(edge_aware_smoothness(d, img) == 0.0);
  }
  SUBCASE("unit ramp on a constant image contributes one per pair") {
    DepthImage d = DepthImage::all_invalid({5, 3});
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 5; ++x) d.set(x, y, 1.0 + x);
    const GrayImage img = gray(std::vector<double>(15, 0.0), 5, 3);
    CHECK(edge_aware_smoothness(d, img) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("a strong image edge kills the contribution") {
    DepthImage d = DepthImage::all_invalid({2, 1});
    d.set(0, 0, 1.0);
    d.set(1, 0, 2.0);
    GrayImage img = gray({0.0, 1000.0}, 2, 1);
    CHECK(edge_aware_smoothness(d, img) < 1e-12);
  }
  SUBCASE("resolution mismatch is an error") {
    DepthImage d = DepthImage::all_invalid({2, 2});
    const GrayImage img = gray({0.0, 0.0}, 2, 1);
    CHECK_THROWS_AS(edge_aware_smoothness(d, img), Error);
  }
}

TEST_CASE("detector_cross_entropy") {
  SUBCASE("confident correct logits give a tiny loss") {
    DetectorLogits l;
    l.cells_x = 2;
    l.cells_y = 1;
    l.n_classes = 65;
    l.values.assign(2 * 65, 0.0);
    l.values[7] = 1e3;
    l.values[65 + 64] = 1e3;
    CHECK(detector_cross_entropy(l, {7, 64}) < 1e-3);
  }
  SUBCASE("uniform logits over 65 classes give ln 65") {
    DetectorLogits l;
    l.cells_x = 3;
    l.cells_y = 2;
    l.n_classes = 65;
    l.values.assign(size_t(6) * 65, 0.25);
    CHECK(detector_cross_entropy(l, {0, 10, 64, 3, 7, 22}) ==
          doctest::Approx(std::log(65.0)).epsilon(1e-12));
  }
  SUBCASE("two classes with equal logits give ln 2") {
    DetectorLogits l;
    l.cells_x = 1;
    l.cells_y = 1;
    l.n_classes = 2;
    l.values = {0.0, 0.0};
    CHECK(detector_cross_entropy(l, {1}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("label out of range is an error") {
    DetectorLogits l;
    l.cells_x = 1;
    l.cells_y = 1;
    l.n_classes = 65;
    l.values.assign(65, 0.0);
    CHECK_THROWS_AS(detector_cross_entropy(l, {65}), Error);
    CHECK_THROWS_AS(detector_cross_entropy(l, {-1}), Error);
  }
}

TEST_CASE("multiscale_depth_loss") {
  const LossConfig config;  // standard weights
  DepthImage gt = DepthImage::all_invalid({32, 32});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) gt.set(x, y, 3.0);

  const auto pyramid_with_offset = [&](double offset) {
    std::vector<DepthImage> pyr;
    for (int level = 0; level < 4; ++level) {
      const int f = pyramid_scale_factor(level);
      DepthImage p = DepthImage::all_invalid({32 / f, 32 / f});
      for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) p.set(x, y, 3.0 + offset);
      pyr.push_back(std::move(p));
    }
    return pyr;
  };

  SUBCASE("perfect pyramid scores zero") {
    CHECK(multiscale_depth_loss(pyramid_with_offset(0.0), gt, config) == 0.0);
  }
  SUBCASE("unit per-scale losses sum the damped weights") {
    // offset 1.5 with beta 1 makes every per-scale loss exactly 1; the sum is
    // 2.0 + 1.4 + 0.98 + 0.686 = 5.066.
    const double loss = multiscale_depth_loss(pyramid_with_offset(1.5), gt, config);
    CHECK(std::abs(loss - 5.066) < 1e-12);
  }
  SUBCASE("a single scale reduces to w_d1 * smooth_l1") {
    LossConfig single = config;
    single.n_scales = 1;
    std::vector<DepthImage> pyr = {pyramid_with_offset(1.5)[0]};
    CHECK(multiscale_depth_loss(pyr, gt, single) ==
          doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("pyramid size mismatch is an error") {
    std::vector<DepthImage> pyr = pyramid_with_offset(0.0);
    pyr.pop_back();
    CHECK_THROWS_AS(multiscale_depth_loss(pyr, gt, config), Error);
    pyr = pyramid_with_offset(0.0);
    pyr[2] = DepthImage::all_invalid({9, 9});
    CHECK_THROWS_AS(multiscale_depth_loss(pyr, gt, config), Error);
  }
}

TEST_CASE("downsample_valid_mean") {
  DepthImage img = DepthImage::all_invalid({4, 2});
  img.set(0, 0, 2.0);
  img.set(1, 1, 4.0);
  img.set(2, 0, 6.0);
  const DepthImage half = downsample_valid_mean(img, 2);
  CHECK(half.width == 2);
  CHECK(half.height == 1);
  CHECK(half.at(0, 0) == doctest::Approx(3.0));  // mean of 2 and 4
  CHECK(half.at(1, 0) == doctest::Approx(6.0));  // only one valid pixel
  const DepthImage empty_block = downsample_valid_mean(
      image_from({0.0, 0.0, 0.0, 1.0}, 2, 2), 2);
  CHECK(empty_block.valid[0] == 1);
}

TEST_CASE("total_loss") {
  const LossConfig config;
  SUBCASE("all zeros") {
    const std::vector<double> depth_losses(4, 0.0);
    CHECK(total_loss(0, 0, 0, 0, depth_losses, config) == 0.0);
  }
  SUBCASE("all ones with standard weights") {
    const std::vector<double> depth_losses(4, 1.0);
    const double loss = total_loss(1, 1, 1, 1, depth_losses, config);
    CHECK(std::abs(loss - 9.166) < 1e-12);
  }
  SUBCASE("zero weights ignore the components") {
    LossConfig zero = config;
    zero.w_ip = zero.w_2d = zero.w_3d = zero.w_sm = zero.w_d1 = 0.0;
    const std::vector<double> depth_losses(4, 123.0);
    CHECK(total_loss(7, 8, 9, 10, depth_losses, zero) == 0.0);
  }
  SUBCASE("linear in each component with the configured coefficient") {
    const std::vector<double> base(4, 0.3);
    const double f0 = total_loss(0.2, 0.4, 0.6, 0.8, base, config);
    const double h = 1e-3;
    const double d_ip =
        (total_loss(0.2 + h, 0.4, 0.6, 0.8, base, config) - f0) / h;
    CHECK(d_ip == doctest::Approx(config.w_ip).epsilon(1e-9));
    std::vector<double> bumped = base;
    bumped[2] += h;
    const double d_d3 = (total_loss(0.2, 0.4, 0.6, 0.8, bumped, config) - f0) / h;
    CHECK(d_d3 == doctest::Approx(config.w_d1 * 0.7 * 0.7).epsilon(1e-9));
  }
  SUBCASE("non-finite components are an error") {
    const std::vector<double> depth_losses(4, 1.0);
    CHECK_THROWS_AS(
        total_loss(std::nan(""), 0, 0, 0, depth_losses, config), Error);
  }
}

TEST_CASE("pairwise_sum is deterministic and accurate") {
  CounterRng rng(11, "sum");
  std::vector<double> v(10000);
  long double exact = 0.0L;
  for (double& x : v) {
    x = rng.next_normal() * 1e6;
    exact += x;
  }
  const double s1 = pairwise_sum(v);
  const double s2 = pairwise_sum(v);
  CHECK(s1 == s2);
  CHECK(std::abs(s1 - double(exact)) < 1e-3);
}
