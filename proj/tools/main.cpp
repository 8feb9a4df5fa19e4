#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "deltas/gradcheck.hpp"
#include "deltas/io.hpp"
#include "deltas/pipeline.hpp"
#include "deltas/scene_synth.hpp"

namespace fs = std::filesystem;
using namespace deltas;

namespace {

int resolve_threads(int requested) {
  int threads = requested;
  if (threads < 0) threads = int(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DELTAS_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 0) threads = std::min(threads, cap);
  }
  return threads;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io_error, "cannot create " + path.string());
  out.write(text.data(), std::streamsize(text.size()));
  require(out.good(), ErrorCode::io_error, "write failed for " + path.string());
}

struct RunFlags {
  std::string scene_dir;
  bool synth = false;
  std::string out_dir;
  int views = 3;
  int threads = -1;
  RunConfig run;
  SceneConfig scene;
};

void add_run_options(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--scene", f.scene_dir, "scene directory to process");
  cmd->add_flag("--synth", f.synth, "generate a synthetic scene in memory");
  cmd->add_option("--points,-n", f.run.n_points, "total interest points")
      ->capture_default_str();
  cmd->add_option("--ratio", f.run.ratio,
                  "fraction of the budget taken from the detector")
      ->capture_default_str();
  cmd->add_option("--nms", f.run.nms_radius, "NMS radius in pixels")
      ->capture_default_str();
  cmd->add_option("--threshold", f.run.threshold, "detector score threshold")
      ->capture_default_str();
  cmd->add_option("--samples,-L", f.run.epipolar_samples,
                  "samples along each epipolar segment")
      ->capture_default_str();
  cmd->add_option("--offset", f.run.offset_px,
                  "epipolar band offset in pixels on either side")
      ->capture_default_str();
  cmd->add_option("--depth-min", f.run.depth_min, "search range near end, m")
      ->capture_default_str();
  cmd->add_option("--depth-max", f.run.depth_max, "search range far end, m")
      ->capture_default_str();
  cmd->add_option("--views", f.views, "number of views to use (anchor first)")
      ->capture_default_str();
  cmd->add_option("--seed", f.run.seed, "root seed for all randomness")
      ->capture_default_str();
  cmd->add_flag("--densify", f.run.densify,
                "also produce an IDW-densified dense map");
  cmd->add_option("--out,-o", f.out_dir, "output directory")->required();
  cmd->add_option("--stride", f.run.stride,
                  "descriptor grid stride of --scene inputs")
      ->capture_default_str();
  cmd->add_option("--corr-gain", f.run.match.correlation_gain,
                  "correlation gain applied before the softmax")
      ->capture_default_str();
  cmd->add_flag("--clamp-nonneg", f.run.match.clamp_nonneg,
                "clamp correlations at zero before the softmax");
  cmd->add_option("--min-confidence", f.run.min_confidence,
                  "matches below this confidence add no observation")
      ->capture_default_str();
  cmd->add_option("--idw-power", f.run.idw_power, "IDW distance power")
      ->capture_default_str();
  cmd->add_option("--idw-neighbors", f.run.idw_neighbors, "IDW neighbor count")
      ->capture_default_str();
  cmd->add_option("--threads,-j", f.threads,
                  "worker threads (0 = serial; default: hardware, capped by "
                  "DELTAS_THREADS)");
  // Synthetic-scene knobs.
  cmd->add_option("--synth-points", f.scene.n_points,
                  "planted landmarks in the synthetic scene")
      ->capture_default_str();
  cmd->add_option("--baseline", f.scene.baseline, "camera baseline, m")
      ->capture_default_str();
  cmd->add_option("--noise-px", f.scene.pixel_noise,
                  "synthetic observation noise, pixels")
      ->capture_default_str();
  cmd->add_option("--scene-depth-min", f.scene.depth_min,
                  "planted depth range near end, m")
      ->capture_default_str();
  cmd->add_option("--scene-depth-max", f.scene.depth_max,
                  "planted depth range far end, m")
      ->capture_default_str();
  cmd->add_option("--desc-dim", f.scene.descriptor_dim,
                  "descriptor dimension (0 = auto)")
      ->capture_default_str();
  cmd->add_option("--peak-sharpness", f.scene.peak_sharpness,
                  "splat std-dev in descriptor grid cells")
      ->capture_default_str();
  cmd->add_option("--width", f.scene.width, "synthetic image width")
      ->capture_default_str();
  cmd->add_option("--height", f.scene.height, "synthetic image height")
      ->capture_default_str();
}

int cmd_run(RunFlags& f) {
  if (f.synth == !f.scene_dir.empty()) {
    std::cerr << "error: exactly one of --scene and --synth is required\n";
    return 2;
  }
  f.run.num_threads = resolve_threads(f.threads);

  SceneInputs inputs;
  if (f.synth) {
    f.scene.n_views = f.views;
    f.scene.seed = f.run.seed;
    const Scene scene = generate_scene(f.scene);
    inputs = make_inputs(scene);
    f.run.stride = f.scene.stride;
  } else {
    inputs = load_scene_dir(f.scene_dir, f.run.stride, f.views);
  }

  const RunOutputs out = run_pipeline(inputs, f.run);

  fs::create_directories(f.out_dir);
  write_text(fs::path(f.out_dir) / "points.csv", out.points_csv);
  write_pfm(fs::path(f.out_dir) / "sparse.pfm", out.sparse.image);
  if (out.dense) write_pfm(fs::path(f.out_dir) / "dense.pfm", *out.dense);
  if (!out.metrics_csv.empty())
    write_text(fs::path(f.out_dir) / "metrics.csv", out.metrics_csv);

  int n_valid = 0;
  for (const PointTriangulation& t : out.triangulation) n_valid += t.valid;
  std::cout << "points: " << out.points.size() << " (" << n_valid
            << " triangulated)\n";
  if (out.sparse_metrics) {
    std::cout << "sparse abs_rel " << format_double(out.sparse_metrics->abs_rel)
              << ", delta1 " << format_double(out.sparse_metrics->delta1)
              << " over " << out.sparse_metrics->n_valid << " pixels\n";
  }
  return 0;
}

int cmd_synth(SceneConfig& scene, const std::string& out_dir) {
  const Scene s = generate_scene(scene);
  dump_scene(s, out_dir);
  std::cout << "wrote " << s.views.size() << " views to " << out_dir << "\n";
  return 0;
}

int cmd_gradcheck(uint64_t seed, int n) {
  if (n == 0) {
    std::cout << "warning: 0 instances requested; vacuous pass\n";
    return 0;
  }
  const GradCheckReport matching = gradcheck_matching(seed, n);
  const GradCheckReport triangulation = gradcheck_triangulation(seed, n);
  std::cout << "matching:      " << matching.n_pass << "/" << matching.n_total
            << " pass rate " << format_double(matching.pass_rate())
            << " worst rel error " << format_double(matching.worst_rel_error)
            << "\n";
  std::cout << "triangulation: " << triangulation.n_pass << "/"
            << triangulation.n_total << " pass rate "
            << format_double(triangulation.pass_rate()) << " worst rel error "
            << format_double(triangulation.worst_rel_error) << "\n";
  const bool ok =
      matching.pass_rate() >= 0.99 && triangulation.pass_rate() >= 0.99;
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_eval(const std::string& pred, const std::string& gt,
             const std::string& out_file) {
  const DepthImage p = read_pfm(pred);
  const DepthImage g = read_pfm(gt);
  const MetricsReport m = depth_metrics(p, g);
  const std::string csv =
      metrics_csv_header() + "\n" + metrics_csv_row("pred", m) + "\n";
  std::cout << csv;
  if (!out_file.empty()) write_text(out_file, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "deltas: epipolar descriptor matching, confidence-weighted "
      "triangulation, and sparse-to-dense depth utilities"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand(
      "run", "run the match-triangulate-impute pipeline on a scene");
  add_run_options(run, run_flags);

  SceneConfig synth_cfg;
  std::string synth_out;
  CLI::App* synth =
      app.add_subcommand("synth", "generate a synthetic scene directory");
  synth->add_option("--out,-o", synth_out, "output directory")->required();
  synth->add_option("--points,-n", synth_cfg.n_points, "planted landmarks")
      ->capture_default_str();
  synth->add_option("--views", synth_cfg.n_views, "number of views")
      ->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed, "scene seed")->capture_default_str();
  synth->add_option("--baseline", synth_cfg.baseline, "camera baseline, m")
      ->capture_default_str();
  synth->add_option("--noise-px", synth_cfg.pixel_noise,
                    "observation noise, pixels")
      ->capture_default_str();
  synth->add_option("--scene-depth-min", synth_cfg.depth_min,
                    "planted depth range near end, m")
      ->capture_default_str();
  synth->add_option("--scene-depth-max", synth_cfg.depth_max,
                    "planted depth range far end, m")
      ->capture_default_str();
  synth->add_option("--desc-dim", synth_cfg.descriptor_dim,
                    "descriptor dimension (0 = auto)")
      ->capture_default_str();
  synth->add_option("--width", synth_cfg.width, "image width")
      ->capture_default_str();
  synth->add_option("--height", synth_cfg.height, "image height")
      ->capture_default_str();

  uint64_t grad_seed = 7;
  int grad_n = 1000;
  CLI::App* grad = app.add_subcommand(
      "gradcheck", "finite-difference checks of the analytic gradients");
  grad->add_option("--seed", grad_seed, "seed")->capture_default_str();
  grad->add_option("--n", grad_n, "instances per suite")->capture_default_str();

  std::string eval_pred, eval_gt, eval_out;
  CLI::App* eval =
      app.add_subcommand("eval", "depth metrics between two PFM maps");
  eval->add_option("pred", eval_pred, "predicted depth PFM")->required();
  eval->add_option("gt", eval_gt, "ground-truth depth PFM")->required();
  eval->add_option("--out,-o", eval_out, "also write the CSV here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (synth->parsed()) return cmd_synth(synth_cfg, synth_out);
    if (grad->parsed()) return cmd_gradcheck(grad_seed, grad_n);
    if (eval->parsed()) return cmd_eval(eval_pred, eval_gt, eval_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
