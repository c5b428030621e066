#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <string>

#include "minsky/minsky.h"

using nlohmann::json;

namespace {

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  minsky_string_free(s);
  return out;
}

const char* kScenario = R"({
  "network": {"type": "explicit", "edges": [[0,1],[1,2],[2,3],[3,4],[4,5]]},
  "resilience": {"k": 1.0, "beta": 1.0, "shuffle": false},
  "i0": 100, "seeds": [0], "ticks": 8
})";

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::string(minsky_version()).size() > 0);
  char* out = nullptr;
  CHECK(minsky_fixed_points("{not json", 0, 0, &out) == MINSKY_ERR_CONFIG);
  CHECK(out == nullptr);
  CHECK(std::string(minsky_last_error()).find("JSON") != std::string::npos);
  CHECK(minsky_fixed_points(nullptr, 0, 0, &out) == MINSKY_ERR_CONFIG);
  CHECK(minsky_fixed_points(R"({"k": -1})", 0, 0, &out) == MINSKY_ERR_CONFIG);
  CHECK(std::string(minsky_last_error()).find("/k") != std::string::npos);
}

TEST_CASE("fixed points through the C interface") {
  char* out = nullptr;
  REQUIRE(minsky_fixed_points(R"({"i0": 0.005, "k": 0.001, "alpha": 0.5, "beta": 1.3})", 2.0, 50, &out) ==
          MINSKY_OK);
  CHECK(std::string(minsky_last_error()).empty());
  auto j = json::parse(take(out));
  CHECK(j["accelerator"]["n_fix"].get<double>() == doctest::Approx(std::pow(5.0, 1.3 / 0.35)));
  CHECK(j.contains("trajectory"));

  out = nullptr;
  CHECK(minsky_fixed_points(R"({"i0": 0.005, "k": 0.001, "alpha": 0.5, "beta": 2.0})", 0, 0, &out) ==
        MINSKY_ERR_NUMERICAL);
}

TEST_CASE("batch simulation and ensemble") {
  char *csv = nullptr, *summary = nullptr;
  REQUIRE(minsky_simulate(kScenario, nullptr, &csv, &summary) == MINSKY_OK);
  auto text = take(csv);
  auto s = json::parse(take(summary));
  CHECK(s["cumulative_failed"] == 6);
  CHECK(s["tick"] == 8);
  CHECK(text.rfind("tick,new_failures", 0) == 0);

  char *stats = nullptr, *runs = nullptr;
  REQUIRE(minsky_ensemble(kScenario, ".", 4, &stats, &runs, &summary) == MINSKY_OK);
  take(stats);
  take(runs);
  auto e = json::parse(take(summary));
  CHECK(e["runs"] == 4);
  CHECK(e["mean_final"] == 6.0);
  CHECK(minsky_ensemble(kScenario, ".", 1, &stats, &runs, &summary) == MINSKY_ERR_CONFIG);
}

TEST_CASE("stepwise handle") {
  minsky_sim* sim = nullptr;
  REQUIRE(minsky_sim_create(kScenario, nullptr, &sim) == MINSKY_OK);
  char* out = nullptr;
  REQUIRE(minsky_sim_tick(sim, 2, &out) == MINSKY_OK);
  auto d = json::parse(take(out));
  CHECK(d.size() == 2);
  CHECK(d[1]["new_failures"] == json::array({2}));

  REQUIRE(minsky_sim_preview(sim, R"({"kind":"immunize_nodes","ids":[3]})", &out) == MINSKY_OK);
  auto p = json::parse(take(out));
  CHECK(p["preview"]["new_failures"].empty());
  REQUIRE(minsky_sim_preview(sim, nullptr, &out) == MINSKY_OK);
  CHECK(json::parse(take(out))["preview"]["new_failures"] == json::array({3}));

  REQUIRE(minsky_sim_intervene(sim, R"({"kind":"immunize_nodes","ids":[3]})", &out) == MINSKY_OK);
  CHECK(json::parse(take(out))["accepted"] == true);
  CHECK(minsky_sim_intervene(sim, R"({"kind":"immunize_nodes","ids":[77]})", &out) == MINSKY_ERR_CONFIG);
  REQUIRE(minsky_sim_tick(sim, 5, &out) == MINSKY_OK);
  take(out);
  REQUIRE(minsky_sim_snapshot(sim, 1, &out) == MINSKY_OK);
  auto snap = json::parse(take(out));
  CHECK(snap["cumulative_failed"] == 3);
  CHECK(snap["firms"].size() == 6);
  minsky_sim_free(sim);

  CHECK(minsky_sim_tick(nullptr, 1, &out) == MINSKY_ERR_CONFIG);
  CHECK(minsky_sim_create("{}", nullptr, &sim) == MINSKY_ERR_CONFIG);
}

TEST_CASE("phase and scaling sweeps") {
  char *csv = nullptr, *side = nullptr;
  REQUIRE(minsky_phase_sweep(R"({
      "params": {"k": 0.001, "alpha": 0.4, "beta": 1.5, "gamma": 1.6666666666666667,
                 "S": 1, "rho_C": 0.5, "n_total": 1000000},
      "grid": {"n0_min": 1, "n0_max": 100, "n0_count": 3, "y_count": 3}})",
                             &csv, &side) == MINSKY_OK);
  CHECK(take(csv).rfind("N0,i0,label", 0) == 0);
  CHECK(json::parse(take(side))["boundaries"].size() == 3);

  char* fit = nullptr;
  REQUIRE(minsky_scaling_sweep(R"({"network": {"type": "random_regular", "n": 20000, "K": 3},
                                   "rho": {"min": 0.05, "max": 0.4, "count": 8}, "runs": 400})",
                               nullptr, 5, &csv, &fit) == MINSKY_OK);
  take(csv);
  auto f = json::parse(take(fit));
  CHECK(f["seed"] == 5);
  CHECK(f["points"].size() == 8);
}

TEST_CASE("server lifecycle") {
  minsky_server* srv = nullptr;
  REQUIRE(minsky_server_create(&srv) == MINSKY_OK);
  int port = 0;
  REQUIRE(minsky_server_listen(srv, "127.0.0.1", 0, &port) == MINSKY_OK);
  CHECK(port > 0);
  CHECK(minsky_server_stop(srv) == MINSKY_OK);
  minsky_server_free(srv);
  CHECK(minsky_server_stop(nullptr) == MINSKY_ERR_CONFIG);
}
