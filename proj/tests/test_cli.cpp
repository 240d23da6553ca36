#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

using namespace cathreg;
using namespace cathreg::test;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cathreg::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("cathreg_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

std::size_t count_ext(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

int shell_exit(const std::string& command) {
  const int status = std::system((command + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli simulate") {
  TEST_CASE("writes the phantom, paths and transforms") {
    TempDir d("sim");
    const Run r = invoke({"simulate", "--branches", "6", "--seed", "42", "--out", d / "out"});
    REQUIRE(r.code == 0);
    const fs::path out = d.path / "out";
    CHECK(fs::exists(out / "phantom.json"));
    CHECK(count_ext(out, ".csv") == 6);
    CHECK(count_ext(out, ".json") == 7);
    CHECK(fs::exists(out / "effective_config.toml"));
    for (int b = 0; b < 6; ++b) {
      const std::string id = std::to_string(b);
      const FramedTransform gt = read_transform_json(out / ("gt_transform_" + id + ".json"));
      CHECK(gt.from == Frame::Preop);
      CHECK(gt.to == Frame::Em);
      CHECK(gt.transform.is_proper(1e-12));
      CHECK(read_path_csv(out / ("em_path_" + id + ".csv"), Frame::Em).has_timestamps());
      CHECK(fs::exists(out / "routes" / ("centerline_" + id + ".csv")));
    }
    CHECK(parse_phantom_json(read_text_file(out / "phantom.json")) == generate_phantom(6, 42));
  }

  TEST_CASE("same invocation twice gives identical files") {
    TempDir d("sim_twice");
    REQUIRE(invoke({"simulate", "--seed", "3", "--out", d / "a"}).code == 0);
    REQUIRE(invoke({"simulate", "--seed", "3", "--out", d / "b"}).code == 0);
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(d.path / "a")) {
      if (!e.is_regular_file() || e.path().filename() == "effective_config.toml") continue;
      const auto rel = fs::relative(e.path(), d.path / "a");
      CHECK(read_text_file(e.path()) == read_text_file(d.path / "b" / rel));
      ++compared;
    }
    CHECK(compared == 1 + 6 * 3);
  }

  TEST_CASE("usage errors exit with 2") {
    TempDir d("sim_usage");
    const Run zero = invoke({"simulate", "--branches", "0", "--out", d / "x"});
    CHECK(zero.code == 2);
    CHECK(zero.err.find("--branches") != std::string::npos);
    CHECK(invoke({"simulate", "--branches", "13", "--out", d / "x"}).code == 2);
    CHECK(invoke({"simulate", "--noise", "-1", "--out", d / "x"}).code == 2);
    CHECK(invoke({"simulate", "--min-translation", "50", "--max-translation", "10", "--out", d / "x"}).code == 2);
    CHECK(invoke({"simulate"}).code == 2);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({"--help"}).code == 0);
  }
}

TEST_SUITE("cli register") {
  TEST_CASE("dtw on a simulated pair") {
    TempDir d("reg_dtw");
    REQUIRE(invoke({"simulate", "--branches", "3", "--seed", "5", "--out", d / "sim"}).code == 0);
    const Run r = invoke({"register", "--method", "dtw", "--em", d / "sim/em_path_1.csv", "--centerline",
                       d / "sim/routes/centerline_1.csv", "--out", d / "res/dtw.json", "--stdout", "--quiet"});
    REQUIRE(r.code == 0);
    const auto doc = nlohmann::json::parse(read_text_file(d / "res/dtw.json"));
    CHECK(doc["method"] == "dtw");
    CHECK(std::isfinite(doc["fit_rmse_mm"].get<double>()));
    CHECK(doc["correspondences"].size() == 30);
    CHECK(r.out == read_text_file(d / "res/dtw.json"));
    CHECK(r.err.empty());
    CHECK(fs::exists(d.path / "res" / "effective_config.toml"));
  }

  TEST_CASE("icp initialized from the ground truth file") {
    TempDir d("reg_init");
    REQUIRE(invoke({"simulate", "--branches", "2", "--seed", "6", "--out", d / "sim"}).code == 0);
    const Run r = invoke({"register", "--method", "icp", "--em", d / "sim/em_path_1.csv", "--centerline",
                       d / "sim/routes/centerline_1.csv", "--init", d / "sim/gt_transform_1.json", "--out",
                       d / "icp.json"});
    REQUIRE(r.code == 0);
    const FramedTransform gt = read_transform_json(d / "sim/gt_transform_1.json");
    const FramedTransform est = read_transform_json(d / "icp.json");
    CHECK(translation_error(est.transform, invert_transform(gt.transform)) < 2.0);
    CHECK(rotation_error_deg(est.transform, invert_transform(gt.transform)) < 2.0);
  }

  TEST_CASE("icp without init on distant signals exits with 3 and still writes the result") {
    TempDir d("reg_far");
    const Path3 cl = phantom_route(generate_phantom(2, 7), 1).centerline;
    write_path_csv(d / "cl.csv", cl);
    write_path_csv(d / "em.csv", apply_transform({Eigen::Matrix3d::Identity(), Point3(0, 300, 0)}, cl, Frame::Em));
    const Run r = invoke({"register", "--method", "icp", "--em", d / "em.csv", "--centerline", d / "cl.csv", "--out",
                       d / "far.json"});
    CHECK(r.code == 3);
    REQUIRE(fs::exists(d / "far.json"));
    const auto doc = nlohmann::json::parse(read_text_file(d / "far.json"));
    CHECK(doc["converged"] == false);
    CHECK(doc["method"] == "icp");
  }

  TEST_CASE("landmarks recover the generating transform") {
    TempDir d("reg_lm");
    std::mt19937_64 rng(60);
    const auto preop = random_points(rng, 10, -80, 80);
    const RigidTransform t = random_transform(rng);
    std::vector<Point3> em;
    for (const auto& p : preop) em.push_back(invert_transform(t).apply(p));
    write_path_csv(d / "preop.csv", Path3(preop, Frame::Preop));
    write_path_csv(d / "em.csv", Path3(em, Frame::Em));
    const Run r = invoke({"register", "--method", "landmarks", "--em", d / "em.csv", "--centerline", d / "preop.csv",
                       "--out", d / "lm.json"});
    REQUIRE(r.code == 0);
    const FramedTransform got = read_transform_json(d / "lm.json");
    CHECK(max_abs(got.transform.rotation - t.rotation) <= 1e-9);
    CHECK(max_abs(got.transform.translation - t.translation) <= 1e-9);
  }

  TEST_CASE("file and usage errors") {
    TempDir d("reg_err");
    write_text_file(d / "bad.csv", "x,y,z\n1,2\n");
    write_path_csv(d / "ok.csv", phantom_route(generate_phantom(1, 1), 0).centerline);
    CHECK(invoke({"register", "--em", d / "missing.csv", "--centerline", d / "ok.csv", "--out", d / "r.json"}).code == 1);
    CHECK(invoke({"register", "--em", d / "bad.csv", "--centerline", d / "ok.csv", "--out", d / "r.json"}).code == 1);
    CHECK(invoke({"register", "--method", "icp", "--em", d / "ok.csv", "--centerline", d / "ok.csv", "--init",
               d / "missing.json", "--out", d / "r.json"})
              .code == 1);
    CHECK(invoke({"register", "--method", "cpd", "--em", d / "ok.csv", "--centerline", d / "ok.csv"}).code == 2);
    CHECK(invoke({"register", "--em", d / "ok.csv"}).code == 2);
    CHECK(invoke({"register", "--per-segment", "0", "--em", d / "ok.csv", "--centerline", d / "ok.csv"}).code == 2);
    CHECK_FALSE(fs::exists(d / "r.json"));
  }
}

TEST_SUITE("cli evaluate") {
  TEST_CASE("defaults on a six-branch phantom give 30 DTW rows") {
    TempDir d("eval_default");
    write_text_file(d / "p.json", format_phantom_json(generate_phantom(6, 42)));
    const Run r = invoke({"evaluate", "--phantom", d / "p.json", "--seed", "1", "--out", d / "out", "--quiet"});
    REQUIRE(r.code == 0);
    const std::string csv = read_text_file(d / "out/report.csv");
    std::size_t dtw_rows = 0, icp_rows = 0;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);) {
      dtw_rows += line.find(",dtw,") != std::string::npos && !line.starts_with("overall");
      icp_rows += line.find(",icp-from-dtw,") != std::string::npos && !line.starts_with("overall");
    }
    CHECK(dtw_rows == 30);
    CHECK(icp_rows == 30);
    CHECK(fs::exists(d.path / "out" / "report.json"));
    CHECK(fs::exists(d.path / "out" / "report.svg"));
    CHECK_FALSE(fs::exists(d.path / "out" / "phantom.json"));
  }

  TEST_CASE("svg only") {
    TempDir d("eval_svg");
    write_text_file(d / "p.json", format_phantom_json(generate_phantom(2, 42)));
    REQUIRE(invoke({"evaluate", "--phantom", d / "p.json", "--runs", "1", "--formats", "svg", "--out", d / "out"}).code ==
            0);
    CHECK(count_ext(d.path / "out", ".svg") == 1);
    CHECK(count_ext(d.path / "out", ".csv") == 0);
    CHECK(count_ext(d.path / "out", ".json") == 0);
  }

  TEST_CASE("same seed gives byte-identical reports, also with threads") {
    TempDir d("eval_det");
    const std::vector<std::string> base{"evaluate", "--branches", "3", "--runs", "2", "--seed", "17", "--quiet"};
    auto with = [&](std::vector<std::string> extra) {
      std::vector<std::string> args = base;
      args.insert(args.end(), extra.begin(), extra.end());
      return invoke(args).code;
    };
    REQUIRE(with({"--out", d / "a", "--threads", "1"}) == 0);
    REQUIRE(with({"--out", d / "b", "--threads", "3"}) == 0);
    for (const std::string f : {"report.csv", "report.json", "report.svg", "phantom.json"}) {
      CHECK(read_text_file(d.path / "a" / f) == read_text_file(d.path / "b" / f));
    }
  }

  TEST_CASE("effective configuration reproduces the run") {
    TempDir d("eval_cfg");
    REQUIRE(invoke({"evaluate", "--branches", "2", "--runs", "1", "--seed", "9", "--noise", "0.8", "--pull-speed", "12",
                 "--methods", "dtw,icp-from-identity", "--aggregate", "both", "--out", d / "a", "--quiet"})
                .code == 0);
    const Run again = invoke({"--config", d / "a/effective_config.toml", "evaluate", "--out", d / "b"});
    REQUIRE(again.code == 0);
    CHECK(read_text_file(d / "a/report.csv") == read_text_file(d / "b/report.csv"));
    CHECK(read_text_file(d / "a/report.json") == read_text_file(d / "b/report.json"));
    CHECK(read_text_file(d / "a/report.csv").find("overall-per-point") != std::string::npos);
  }

  TEST_CASE("stdout and errors") {
    TempDir d("eval_err");
    const Run r = invoke({"evaluate", "--branches", "1", "--runs", "1", "--methods", "dtw", "--formats", "json", "--out",
                       d / "o", "--stdout", "--quiet"});
    REQUIRE(r.code == 0);
    CHECK(r.out.starts_with("branch,run,method,"));
    CHECK(invoke({"evaluate", "--methods", "cpd", "--out", d / "o"}).code == 2);
    CHECK(invoke({"evaluate", "--formats", "png", "--out", d / "o"}).code == 2);
    CHECK(invoke({"evaluate", "--runs", "0", "--out", d / "o"}).code == 2);
    CHECK(invoke({"evaluate", "--sample-rate", "0", "--out", d / "o"}).code == 2);
    CHECK(invoke({"evaluate", "--phantom", d / "missing.json", "--out", d / "o"}).code == 1);
    CHECK(invoke({"--config", d / "missing.toml", "evaluate", "--out", d / "o"}).code == 1);
    write_text_file(d / "bad.json", "{\"branches\": 3}");
    CHECK(invoke({"evaluate", "--phantom", d / "bad.json", "--out", d / "o"}).code == 1);
  }
}

TEST_SUITE("cli binary") {
  TEST_CASE("exit codes of the installed executable") {
    TempDir d("bin");
    const std::string exe = CATHREG_CLI_PATH;
    CHECK(shell_exit(exe + " --help") == 0);
    CHECK(shell_exit(exe + " simulate --branches 0 --out " + (d / "x")) == 2);
    CHECK(shell_exit(exe + " simulate --branches 2 --seed 1 --out " + (d / "sim")) == 0);
    CHECK(shell_exit(exe + " register --em " + (d / "nope.csv") + " --centerline " + (d / "nope.csv")) == 1);
    const Path3 cl = read_path_csv(d.path / "sim/routes/centerline_1.csv", Frame::Preop);
    write_path_csv(d / "far.csv", apply_transform({Eigen::Matrix3d::Identity(), Point3(250, 0, 0)}, cl, Frame::Em));
    CHECK(shell_exit(exe + " register --method icp --em " + (d / "far.csv") + " --centerline " +
                     (d / "sim/routes/centerline_1.csv") + " --out " + (d / "far.json")) == 3);
  }
}
