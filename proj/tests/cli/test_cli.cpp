#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = MINSKY_CLI;
const fs::path kSrc = MINSKY_SOURCE_DIR;
const fs::path kWork = MINSKY_WORK_DIR;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& args) {
  fs::create_directories(kWork);
  const auto out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = "'" + kCli + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int st = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path fresh(const std::string& name) {
  auto d = kWork / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string scenario(const std::string& name) { return "'" + (kSrc / "scenarios" / name).string() + "'"; }

fs::path write_json(const std::string& name, const json& j) {
  fs::create_directories(kWork);
  auto p = kWork / name;
  std::ofstream(p) << j.dump(1);
  return p;
}

}  // namespace

TEST_CASE("fixed-points from flags") {
  auto r = run("fixed-points --i0 0.004 --k 0.0015 --alpha 0.5 --beta 1.3");
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["accelerator"]["n_fix"].get<double>() == doctest::Approx(38.2).epsilon(0.01));
  CHECK(j["accelerator"]["stability"] == "stable");

  auto csv = run("fixed-points --i0 0.004 --k 0.0015 --alpha 0.5 --beta 1.3 --format csv");
  REQUIRE(csv.code == 0);
  CHECK(csv.out.rfind("quantity,value\n", 0) == 0);
}

TEST_CASE("fixed-points writes outputs and a manifest with --out") {
  auto dir = fresh("fp");
  auto r = run("fixed-points --i0 0.004 --k 0.0015 --alpha 0.5 --beta 1.3 --n0 2 --out '" + dir.string() + "'");
  REQUIRE(r.code == 0);
  for (auto f : {"fixed_points.json", "fixed_points.csv", "trajectory.csv", "manifest.json"})
    CHECK(fs::exists(dir / f));
  auto m = json::parse(slurp(dir / "manifest.json"));
  CHECK(m["command"] == "fixed-points");
  CHECK(m["config"]["alpha"] == 0.5);
}

TEST_CASE("exit codes") {
  CHECK(run("fixed-points --k 0.001").code == 2);
  CHECK(run("fixed-points --i0 0.005 --k 0.001 --alpha 0.5 --beta 2").code == 3);
  CHECK(run("no-such-command").code == 2);
  CHECK(run("simulate").code == 2);
  CHECK(run("simulate --config /nonexistent/scenario.json").code == 4);
  auto bad = write_json("bad_scenario.json", {{"network", {{"type", "tree"}}}});
  auto r = run("simulate --config '" + bad.string() + "' --out '" + fresh("bad").string() + "'");
  CHECK(r.code == 2);
  CHECK(r.err.find("/resilience") != std::string::npos);
}

TEST_CASE("unwritable output directory is an IO error") {
  auto blocker = kWork / "blocker";
  fs::remove_all(blocker);
  std::ofstream(blocker) << "file, not a directory";
  auto r = run("simulate --config " + scenario("dumbbell.json") + " --out '" + (blocker / "sub").string() + "'");
  CHECK(r.code == 4);
}

TEST_CASE("simulate the dumbbell and its protected variant") {
  auto a = fresh("dumbbell");
  auto r = run("simulate --config " + scenario("dumbbell.json") + " --out '" + a.string() + "'");
  REQUIRE(r.code == 0);
  CHECK(json::parse(slurp(a / "summary.json"))["cumulative_failed"] == 42);

  auto b = fresh("dumbbell_imm");
  r = run("simulate --config " + scenario("dumbbell_immunized.json") + " --out '" + b.string() + "'");
  REQUIRE(r.code == 0);
  CHECK(json::parse(slurp(b / "summary.json"))["cumulative_failed"] == 20);
  auto m = json::parse(slurp(b / "manifest.json"));
  CHECK(m["command"] == "simulate");
  CHECK(m["outputs"].size() >= 2);
}

TEST_CASE("reruns give identical CSV bytes and manifests replay") {
  auto a = fresh("rerun_a"), b = fresh("rerun_b");
  const std::string args = "simulate --config " + scenario("random_regular.json") + " --ticks 30 --seed 5";
  REQUIRE(run(args + " --out '" + a.string() + "'").code == 0);
  REQUIRE(run(args + " --out '" + b.string() + "'").code == 0);
  const auto first = slurp(a / "series.csv");
  CHECK(first.size() > 100);
  CHECK(first == slurp(b / "series.csv"));

  // the manifest is itself a valid config
  auto c = fresh("rerun_c");
  REQUIRE(run("simulate --config '" + (a / "manifest.json").string() + "' --out '" + c.string() + "'").code == 0);
  CHECK(slurp(c / "series.csv") == first);

  auto d = fresh("rerun_d");
  REQUIRE(run("simulate --config " + scenario("random_regular.json") + " --ticks 30 --seed 6 --out '" +
              d.string() + "'").code == 0);
  CHECK(slurp(d / "series.csv") != first);
}

TEST_CASE("zero ticks gives a header-only series") {
  auto d = fresh("zero");
  auto r = run("simulate --config " + scenario("dumbbell.json") + " --ticks 0 --out '" + d.string() + "'");
  REQUIRE(r.code == 0);
  CHECK(slurp(d / "series.csv") == "tick,new_failures,cumulative_failed,currently_ponzi,i_current\n");
}

TEST_CASE("ensemble flag") {
  auto d = fresh("ens");
  auto r = run("simulate --config " + scenario("random_regular.json") + " --ticks 50 --ensemble 100 --out '" +
               d.string() + "'");
  REQUIRE(r.code == 0);
  auto e = json::parse(slurp(d / "ensemble.json"));
  CHECK(e["runs"] == 100);
  CHECK(e["final_failures"].size() == 100);
  CHECK(e["mean_per_tick"].size() == 51);
  const auto runs = slurp(d / "runs.csv");
  CHECK(std::count(runs.begin(), runs.end(), '\n') == 101);
  CHECK(fs::exists(d / "ensemble.csv"));
}

TEST_CASE("phase sweep") {
  auto d = fresh("phase");
  auto r = run("sweep phase --config " + scenario("phase_request.json") +
               " --n0-count 10 --y-count 8 --out '" + d.string() + "'");
  REQUIRE(r.code == 0);
  const auto csv = slurp(d / "phase.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 81);
  auto side = json::parse(slurp(d / "phase_boundaries.json"));
  CHECK(side["boundaries"].size() == 8);
  CHECK(fs::exists(d / "manifest.json"));
}

TEST_CASE("scaling sweep") {
  auto d = fresh("scaling");
  auto r = run("sweep scaling --network-type random_regular --n 20000 --K 3 --rho-min 0.05 --rho-max 0.4 "
               "--rho-count 8 --runs 500 --seed 9 --out '" + d.string() + "'");
  REQUIRE(r.code == 0);
  auto f = json::parse(slurp(d / "scaling_fit.json"));
  CHECK(f["points"].size() == 8);
  CHECK(f["seed"] == 9);
  auto again = fresh("scaling2");
  REQUIRE(run("sweep scaling --network-type random_regular --n 20000 --K 3 --rho-min 0.05 --rho-max 0.4 "
              "--rho-count 8 --runs 500 --seed 9 --out '" + again.string() + "'").code == 0);
  CHECK(slurp(d / "scaling.csv") == slurp(again / "scaling.csv"));
  CHECK(run("sweep scaling --network-type random_regular --n 1000 --K 3 --runs 10").code == 2);
}
