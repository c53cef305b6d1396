#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "gnep/path_following.hpp"

using namespace gnep;

namespace {

GameConfig coarse_config(int n, GameMode mode = GameMode::gnep) {
  GameConfig cfg;
  cfg.kind = ProblemKind::distributed;
  cfg.mode = mode;
  cfg.mesh_n = n;
  return cfg;
}

}  // namespace

TEST_CASE("gamma update law") {
  PathConfig path;  // c_path = 1e-5, eps = 10
  SUBCASE("large-step branch is unit-exact") {
    CHECK(gamma_update(10.0, 1e-7, path) == 110.0);
    CHECK(gamma_update(1.0, 1e-6, path) == 11.0);  // quotient exactly 10 = eps
  }
  SUBCASE("floor branch returns gamma + eps exactly") {
    CHECK(gamma_update(10.0, 1.0, path) == 20.0);
    CHECK(gamma_update(3.5, 0.9, path) == 13.5);
  }
  SUBCASE("nonincreasing in the penalty value") {
    double previous = gamma_update(5.0, 1e-9, path);
    for (double penalty : {1e-8, 1e-7, 1e-5, 1e-3, 1e-1, 10.0}) {
      const double next = gamma_update(5.0, penalty, path);
      CHECK(next <= previous + 1e-15);
      previous = next;
    }
  }
  SUBCASE("rejects nonpositive penalties") {
    CHECK_THROWS_AS(gamma_update(5.0, 0.0, path), UsageError);
    CHECK_THROWS_AS(gamma_update(5.0, -1.0, path), UsageError);
  }
  SUBCASE("config validation") {
    PathConfig bad = path;
    bad.eps = 0.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = path;
    bad.gamma0 = -1.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
  }
}

TEST_CASE("continuation loop") {
  SUBCASE("inactive obstacles terminate immediately with zero penalty") {
    GameConfig cfg = coarse_config(8);
    cfg.psi_lower = -1e6;
    cfg.psi_upper = 1e6;
    Mesh mesh = build_crossed_mesh(cfg.mesh_n);
    StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
    PathConfig path;
    auto [state, history] = run_path(problem, cfg, path);
    CHECK(history.termination_reason == "beta_tol");
    REQUIRE(history.records.size() == 1);
    CHECK(history.records[0].beta_value == 0.0);
    CHECK(state.gamma == 1.0);
  }
  SUBCASE("distributed defaults on a desk-scale mesh behave like the full run") {
    GameConfig cfg = coarse_config(16);
    Mesh mesh = build_crossed_mesh(cfg.mesh_n);
    StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
    PathConfig path;
    int sink_calls = 0;
    auto [state, history] = run_path(problem, cfg, path,
                                     [&](const PathRecord&) { ++sink_calls; });
    CHECK((history.termination_reason == "beta_tol" ||
           history.termination_reason == "gamma_max"));
    REQUIRE(history.records.size() >= 5);
    CHECK(sink_calls == static_cast<int>(history.records.size()));

    // gamma strictly increases and stays within the cap.
    for (std::size_t k = 0; k < history.records.size(); ++k) {
      CHECK(history.records[k].gamma <= path.gamma_max);
      if (k > 0) CHECK(history.records[k].gamma > history.records[k - 1].gamma);
      CHECK(history.records[k].k == static_cast<int>(k) + 1);
      CHECK(history.records[k].newton.converged);
    }
    // The penalty value is nonincreasing over the second half of the path.
    const std::size_t half = history.records.size() / 2;
    for (std::size_t k = half + 1; k < history.records.size(); ++k) {
      CHECK(history.records[k].beta_value <= history.records[k - 1].beta_value * (1.0 + 1e-9));
    }
    // Primal infeasibility decays to the penalized-solution level.
    for (std::size_t k = half + 1; k < history.records.size(); ++k) {
      CHECK(history.records[k].max_violation <=
            history.records[k - 1].max_violation * (1.0 + 1e-9));
    }
    CHECK(history.records.back().max_violation <= 1e-3);
    // The final iterate is the recorded one.
    CHECK(state.gamma == history.records.back().gamma);
    // Shared-penalty update: mid-path steps obey the documented law.
    for (std::size_t k = half; k + 1 < history.records.size(); ++k) {
      const auto& cur = history.records[k];
      const auto& nxt = history.records[k + 1];
      const double denominator = 4.0 * cur.beta_value;  // N players, shared penalty
      if (cur.beta_value > 0.0) {
        PathConfig law;
        CHECK(nxt.gamma == doctest::Approx(gamma_update(cur.gamma, denominator, law))
                               .epsilon(1e-12));
      }
    }
  }
  SUBCASE("cooperative mode divides by beta alone and caps at gamma_max") {
    GameConfig cfg = coarse_config(8, GameMode::coop);
    Mesh mesh = build_crossed_mesh(cfg.mesh_n);
    StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
    PathConfig path;
    path.gamma_max = 1e5;
    auto [state, history] = run_path(problem, cfg, path);
    CHECK((history.termination_reason == "beta_tol" ||
           history.termination_reason == "gamma_max"));
    for (std::size_t k = 1; k < history.records.size(); ++k) {
      const auto& cur = history.records[k - 1];
      if (cur.beta_value > 0.0) {
        PathConfig law;
        CHECK(history.records[k].gamma ==
              doctest::Approx(gamma_update(cur.gamma, cur.beta_value, law)).epsilon(1e-12));
      }
    }
    CHECK(history.records.back().gamma <= path.gamma_max);
  }
}

TEST_CASE("value function sampling") {
  GameConfig cfg = coarse_config(8);
  Mesh mesh = build_crossed_mesh(cfg.mesh_n);
  StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
  PathConfig path;
  path.gamma_max = 200.0;  // short run
  auto [state, history] = run_path(problem, cfg, path);
  SUBCASE("single-point grid reproduces the summed penalized objectives") {
    std::vector<WSample> samples = sample_value_function(cfg, problem, state, {state.gamma});
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].gamma == state.gamma);
    WEvaluation w = value_function_W(cfg, problem, state.gamma, state.u);
    CHECK(samples[0].value == doctest::Approx(w.value).epsilon(1e-10));
  }
  SUBCASE("monotone and midpoint-concave on an equispaced grid") {
    const double g = state.gamma;
    std::vector<WSample> s = sample_value_function(cfg, problem, state, {g, 1.5 * g, 2.0 * g});
    REQUIRE(s.size() == 3);
    CHECK(s[0].value <= s[1].value + 1e-12);
    CHECK(s[1].value <= s[2].value + 1e-12);
    // midpoint concavity: W(mid) >= (W(left) + W(right)) / 2
    CHECK(s[1].value >= 0.5 * (s[0].value + s[2].value) - 1e-10);
  }
  SUBCASE("run_path can sample on request") {
    PathConfig sampling = path;
    sampling.sample_w = true;
    sampling.w_grid = {state.gamma, 2.0 * state.gamma};
    auto [st2, hist2] = run_path(problem, cfg, sampling);
    REQUIRE(hist2.w_samples.size() == 2);
    CHECK(hist2.w_samples[0].value <= hist2.w_samples[1].value + 1e-12);
  }
}
