#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "deltas/depth_tools.hpp"
#include "deltas/io.hpp"

using namespace deltas;
namespace fs = std::filesystem;

namespace {

const char* cli = DELTAS_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("deltas_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cmd(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(cli) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>{});
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return slurp(a) == slurp(b);
}

}  // namespace

TEST_CASE("run --synth produces the documented outputs") {
  TempDir tmp;
  const fs::path out = tmp.path / "out";
  REQUIRE(run_cmd("run --synth --out " + out.string(), tmp.path / "log") == 0);
  CHECK(fs::exists(out / "points.csv"));
  CHECK(fs::exists(out / "sparse.pfm"));
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(!fs::exists(out / "dense.pfm"));

  const std::string metrics = slurp(out / "metrics.csv");
  CHECK(metrics.starts_with(metrics_csv_header()));
  CHECK(slurp(out / "points.csv")
            .starts_with("point_id,x,y,z,valid,sigma_gap,conf_view1"));

  SUBCASE("--densify adds the dense map") {
    const fs::path out2 = tmp.path / "out2";
    REQUIRE(run_cmd("run --synth --densify --out " + out2.string(),
                    tmp.path / "log2") == 0);
    CHECK(fs::exists(out2 / "dense.pfm"));
    const DepthImage dense = read_pfm(out2 / "dense.pfm");
    for (const uint8_t v : dense.valid) CHECK(v == 1);
  }
}

TEST_CASE("fixed seeds give byte-identical runs at any parallelism") {
  TempDir tmp;
  const std::string base_args = "run --synth --densify --seed 5 --out ";
  REQUIRE(run_cmd(base_args + (tmp.path / "a").string(), tmp.path / "la") == 0);
  REQUIRE(run_cmd(base_args + (tmp.path / "b").string(), tmp.path / "lb") == 0);

  ::setenv("DELTAS_THREADS", "1", 1);
  REQUIRE(run_cmd(base_args + (tmp.path / "c").string(), tmp.path / "lc") == 0);
  ::setenv("DELTAS_THREADS", "4", 1);
  REQUIRE(run_cmd(base_args + (tmp.path / "d").string(), tmp.path / "ld") == 0);
  ::unsetenv("DELTAS_THREADS");

  for (const char* name : {"points.csv", "sparse.pfm", "dense.pfm", "metrics.csv"}) {
    CHECK(same_bytes(tmp.path / "a" / name, tmp.path / "b" / name));
    CHECK(same_bytes(tmp.path / "a" / name, tmp.path / "c" / name));
    CHECK(same_bytes(tmp.path / "a" / name, tmp.path / "d" / name));
  }
}

TEST_CASE("a dumped scene reproduces the synthetic run byte for byte") {
  TempDir tmp;
  const fs::path scene = tmp.path / "scene";
  REQUIRE(run_cmd("synth --seed 9 --out " + scene.string(), tmp.path / "ls") == 0);
  CHECK(fs::exists(scene / "cameras.json"));
  CHECK(fs::exists(scene / "view00.desc"));
  CHECK(fs::exists(scene / "view02_gt.pfm"));

  REQUIRE(run_cmd("run --synth --seed 9 --out " + (tmp.path / "mem").string(),
                  tmp.path / "lm") == 0);
  REQUIRE(run_cmd("run --scene " + scene.string() + " --stride 4 --seed 9 --out " +
                      (tmp.path / "file").string(),
                  tmp.path / "lf") == 0);
  for (const char* name : {"points.csv", "sparse.pfm", "metrics.csv"}) {
    CHECK(same_bytes(tmp.path / "mem" / name, tmp.path / "file" / name));
  }
}

TEST_CASE("more views do not hurt accuracy on a fixed seed") {
  TempDir tmp;
  const auto abs_rel = [&](int views) {
    const fs::path out = tmp.path / ("v" + std::to_string(views));
    REQUIRE(run_cmd("run --synth --seed 31 --views " + std::to_string(views) +
                        " --out " + out.string(),
                    tmp.path / "log") == 0);
    const std::string csv = slurp(out / "metrics.csv");
    const size_t row = csv.find("sparse,");
    REQUIRE(row != std::string::npos);
    return std::stod(csv.substr(row + 7));
  };
  const double two = abs_rel(2);
  const double seven = abs_rel(7);
  CHECK(seven <= two);
}

TEST_CASE("error contracts") {
  TempDir tmp;
  SUBCASE("missing camera file exits 2 and names the path") {
    const int rc = run_cmd("run --scene " + (tmp.path / "absent").string() +
                               " --out " + (tmp.path / "o").string(),
                           tmp.path / "log");
    CHECK(rc == 2);
    CHECK(slurp(tmp.path / "log").find("cameras.json") != std::string::npos);
  }
  SUBCASE("neither --scene nor --synth exits 2") {
    CHECK(run_cmd("run --out " + (tmp.path / "o").string(), tmp.path / "log") == 2);
  }
  SUBCASE("eval with mismatched resolutions exits 2") {
    DepthImage a = DepthImage::all_invalid({4, 4});
    a.set(1, 1, 2.0);
    DepthImage b = DepthImage::all_invalid({5, 4});
    b.set(1, 1, 2.0);
    write_pfm(tmp.path / "a.pfm", a);
    write_pfm(tmp.path / "b.pfm", b);
    CHECK(run_cmd("eval " + (tmp.path / "a.pfm").string() + " " +
                      (tmp.path / "b.pfm").string(),
                  tmp.path / "log") == 2);
  }
  SUBCASE("eval with disjoint masks exits 2 and says so") {
    DepthImage a = DepthImage::all_invalid({4, 4});
    a.set(0, 0, 2.0);
    DepthImage b = DepthImage::all_invalid({4, 4});
    b.set(3, 3, 2.0);
    write_pfm(tmp.path / "a.pfm", a);
    write_pfm(tmp.path / "b.pfm", b);
    CHECK(run_cmd("eval " + (tmp.path / "a.pfm").string() + " " +
                      (tmp.path / "b.pfm").string(),
                  tmp.path / "log") == 2);
    CHECK(slurp(tmp.path / "log").find("jointly valid") != std::string::npos);
  }
  SUBCASE("truncated binary input exits 2 with a byte offset") {
    REQUIRE(run_cmd("synth --out " + (tmp.path / "s").string(), tmp.path / "l") == 0);
    fs::resize_file(tmp.path / "s" / "view00.desc", 100);
    const int rc = run_cmd("run --scene " + (tmp.path / "s").string() +
                               " --stride 4 --out " + (tmp.path / "o").string(),
                           tmp.path / "log");
    CHECK(rc == 2);
    CHECK(slurp(tmp.path / "log").find("at byte") != std::string::npos);
  }
}

TEST_CASE("eval reproduces the hand fixture") {
  TempDir tmp;
  DepthImage pred = DepthImage::all_invalid({1, 1});
  pred.set(0, 0, 2.0);
  DepthImage gt = DepthImage::all_invalid({1, 1});
  gt.set(0, 0, 1.0);
  write_pfm(tmp.path / "pred.pfm", pred);
  write_pfm(tmp.path / "gt.pfm", gt);
  REQUIRE(run_cmd("eval " + (tmp.path / "pred.pfm").string() + " " +
                      (tmp.path / "gt.pfm").string() + " --out " +
                      (tmp.path / "m.csv").string(),
                  tmp.path / "log") == 0);
  const std::string csv = slurp(tmp.path / "m.csv");
  CHECK(csv.find("pred,1,1,1,1,0.6931471805599453,0,0,0,1") != std::string::npos);

  SUBCASE("identical maps score perfectly") {
    REQUIRE(run_cmd("eval " + (tmp.path / "gt.pfm").string() + " " +
                        (tmp.path / "gt.pfm").string(),
                    tmp.path / "log2") == 0);
    CHECK(slurp(tmp.path / "log2").find("pred,0,0,0,0,0,1,1,1,1") !=
          std::string::npos);
  }
}

TEST_CASE("gradcheck exits cleanly") {
  TempDir tmp;
  CHECK(run_cmd("gradcheck --n 50 --seed 3", tmp.path / "log") == 0);
  const std::string log = slurp(tmp.path / "log");
  CHECK(log.find("PASS") != std::string::npos);
  CHECK(log.find("pass rate") != std::string::npos);

  SUBCASE("zero instances warn and pass") {
    CHECK(run_cmd("gradcheck --n 0", tmp.path / "log0") == 0);
    CHECK(slurp(tmp.path / "log0").find("0 instances") != std::string::npos);
  }
  SUBCASE("fixed seed reports identically") {
    REQUIRE(run_cmd("gradcheck --n 25 --seed 11", tmp.path / "l1") == 0);
    REQUIRE(run_cmd("gradcheck --n 25 --seed 11", tmp.path / "l2") == 0);
    CHECK(slurp(tmp.path / "l1") == slurp(tmp.path / "l2"));
  }
}
