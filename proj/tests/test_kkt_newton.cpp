#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "gnep/kkt_newton.hpp"

using namespace gnep;

namespace {

GameConfig coarse_config(ProblemKind kind, GameMode mode, int n, int players = 4) {
  GameConfig cfg;
  cfg.kind = kind;
  cfg.mode = mode;
  cfg.mesh_n = n;
  cfg.num_players = players;
  if (players == 1) cfg.yd = {0.2};
  return cfg;
}

// Independent first-order oracle for the cooperative single-player problem:
// projected gradient iteration on the reduced objective
//   F(u) = 1/2||S(u) - y_d||^2 + alpha/2 ||u||^2 + gamma beta(S(u)),
// using only solve_state / solve_adjoint / beta_grad. The fixed point obeys
// u = clamp(-p/alpha), i.e. exactly the stationarity system the Newton
// solver discretizes, but computed through entirely different code.
struct PgdResult {
  Eigen::VectorXd u;       // compact control
  Eigen::VectorXd y;       // state
  Eigen::VectorXd p;       // adjoint
  int iterations = 0;
  double last_move = 0.0;
};

PgdResult projected_gradient_oracle(const StateProblem& problem, const GameConfig& cfg,
                                    double gamma, double step, int max_iter, double tol) {
  Obstacles obs = make_obstacles(cfg, *problem.mesh);
  const int player = 0;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<int>(problem.control_dofs[player].size()));
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(problem.num_vertices());
  PgdResult res;
  for (int it = 0; it < max_iter; ++it) {
    auto [y, rep] = solve_state(problem, {u}, y0);
    REQUIRE(rep.converged);
    Eigen::VectorXd rhs = problem.tracking_mass[player].matrix * y.coefficients -
                          cfg.yd[player] * problem.tracking_row_sum[player];
    rhs += gamma * beta_grad(y, obs);
    FeFunction p = solve_adjoint(problem, y, rhs);
    // L2 gradient of the reduced objective: alpha u + p restricted to the DOFs.
    Eigen::VectorXd pu = gather_dofs(problem, player, p.coefficients);
    Eigen::VectorXd next = (u - step * (cfg.alpha * u + pu))
                               .cwiseMax(cfg.a)
                               .cwiseMin(cfg.b);
    res.last_move = (next - u).lpNorm<Eigen::Infinity>();
    u = next;
    y0 = y.coefficients;
    res.iterations = it + 1;
    if (res.last_move < tol) {
      res.u = u;
      res.y = y.coefficients;
      res.p = p.coefficients;
      return res;
    }
  }
  auto [y, rep] = solve_state(problem, {u}, y0);
  Eigen::VectorXd rhs = problem.tracking_mass[player].matrix * y.coefficients -
                        cfg.yd[player] * problem.tracking_row_sum[player];
  rhs += gamma * beta_grad(y, obs);
  FeFunction p = solve_adjoint(problem, y, rhs);
  res.u = u;
  res.y = y.coefficients;
  res.p = p.coefficients;
  return res;
}

}  // namespace

TEST_CASE("stacked residual") {
  Mesh mesh = build_crossed_mesh(8);
  SUBCASE("zero targets and zero penalty: the origin solves the system") {
    GameConfig cfg = coarse_config(ProblemKind::distributed, GameMode::gnep, 8);
    cfg.yd = {0.0, 0.0, 0.0, 0.0};
    StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
    KktSystem sys = KktSystem::full_game(problem, cfg, 0.0);
    CHECK(sys.dim() == 5 * problem.num_vertices());
    Eigen::VectorXd r = sys.residual(Eigen::VectorXd::Zero(sys.dim()));
    CHECK(r.norm() == 0.0);
  }
  SUBCASE("residual vanishes at the independently computed cooperative optimum") {
    GameConfig cfg = coarse_config(ProblemKind::distributed, GameMode::coop, 8, 1);
    cfg.alpha = 1e-2;  // keeps the projected gradient iteration contractive
    StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
    const double gamma = 10.0;
    PgdResult pgd = projected_gradient_oracle(problem, cfg, gamma, 50.0, 400, 1e-13);
    CHECK(pgd.last_move < 1e-13);

    KktSystem sys = KktSystem::full_game(problem, cfg, gamma);
    Eigen::VectorXd z(sys.dim());
    z.head(problem.num_vertices()) = pgd.y;
    z.tail(problem.num_vertices()) = pgd.p;
    CHECK(sys.residual(z).lpNorm<Eigen::Infinity>() < 1e-8);
    // and the Newton solve from that point stays put
    NewtonSettings settings;
    auto [z_star, report] = semismooth_newton(sys, z, settings);
    CHECK(report.converged);
    CHECK(report.iterations <= 1);
    CHECK((z_star - z).lpNorm<Eigen::Infinity>() < 1e-8);
  }
  SUBCASE("generalized Jacobian is finite-difference consistent away from kinks") {
    GameConfig cfg = coarse_config(ProblemKind::distributed, GameMode::gnep, 8);
    StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
    KktSystem sys = KktSystem::full_game(problem, cfg, 5.0);
    std::mt19937 rng(67);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const int nv = problem.num_vertices();
    Eigen::VectorXd z(sys.dim()), h(sys.dim());
    // State entries well separated from the obstacle values {0, 0.3} and
    // adjoint entries far from the clamp thresholds so that no kink lies
    // between the probe points.
    for (int v = 0; v < nv; ++v) z[v] = 0.6 + 0.1 * dist(rng);
    for (int j = 0; j < 4; ++j) {
      for (int v = 0; v < nv; ++v) {
        z[(1 + j) * nv + v] = 1e-6 * dist(rng);  // -p/alpha well inside (a, b)
      }
    }
    for (int i = 0; i < h.size(); ++i) h[i] = dist(rng);
    sys.refresh_jacobian(z);
    Eigen::VectorXd r0 = sys.residual(z);
    // J is stored inside; apply it through a solve-free probe: residual is
    // cheap, so compare the first-order expansion at two step sizes.
    double q_prev = 0.0;
    int level = 0;
    for (double t : {1e-3, 1e-5}) {
      Eigen::VectorXd lhs = sys.residual(z + t * h) - r0;
      // retrieve J h by finite differencing the *linear* part exactly:
      // refresh/factorize are private to solve; use solve(J h) = h instead.
      sys.factorize();
      Eigen::VectorXd jh = sys.solve(lhs);  // J^{-1}(R(z+th) - R(z)) ~ t h
      const double q = (jh - t * h).lpNorm<Eigen::Infinity>() / t;
      if (level > 0) CHECK(q < 0.02 * q_prev + 1e-12);  // second-order decay
      q_prev = q;
      ++level;
    }
    // The probe runs through J^{-1}, which inflates the raw remainder by the
    // conditioning of the coupled system; the decay rate above is the sharp
    // check, this is a sanity bound.
    CHECK(q_prev < 1e-4);
  }
}

TEST_CASE("semismooth Newton solver") {
  Mesh mesh = build_crossed_mesh(8);
  GameConfig cfg = coarse_config(ProblemKind::distributed, GameMode::gnep, 8);
  StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
  SUBCASE("converges from cold start and restarting at the solution is free") {
    KktSystem sys = KktSystem::full_game(problem, cfg, 100.0);
    NewtonSettings settings;
    auto [z, report] = semismooth_newton(sys, Eigen::VectorXd::Zero(sys.dim()), settings);
    REQUIRE(report.converged);
    CHECK(report.final_absolute <= 1e-10);
    CHECK(report.final_relative <= 1e-10);
    NewtonSettings again;
    auto [z2, report2] = semismooth_newton(sys, z, again);
    CHECK(report2.converged);
    CHECK(report2.iterations <= 1);
  }
  SUBCASE("warm-started undamped solves end superlinearly") {
    // A cold start at large gamma may need damping, whose tail is linear by
    // design; the superlinear regime is reached through continuation. Solve
    // at a moderate gamma, push gamma up, re-solve warm with fresh settings.
    KktSystem sys = KktSystem::full_game(problem, cfg, 20.0);
    NewtonSettings settings;
    auto [z20, rep20] = semismooth_newton(sys, Eigen::VectorXd::Zero(sys.dim()), settings);
    REQUIRE(rep20.converged);
    sys.set_gamma(100.0);
    NewtonSettings fresh;
    auto [z, report] = semismooth_newton(sys, z20, fresh);
    REQUIRE(report.converged);
    REQUIRE(report.damping_used == 1.0);
    const auto& hist = report.residual_history;
    REQUIRE(hist.size() >= 3);
    const double r3 = hist[hist.size() - 3];
    const double r2 = hist[hist.size() - 2];
    const double r1 = hist[hist.size() - 1];
    CHECK(r2 <= 5.0 * std::pow(r3, 1.5));
    CHECK(r1 <= 5.0 * std::pow(r2, 1.5));
  }
  SUBCASE("escalation ladder bottoms out into a clean failure report") {
    NewtonReport fake;
    fake.damping_used = 1.0 / 64.0;  // already at the floor: next rung is out
    fake.max_iter_cap = 400;
    CHECK_THROWS_AS(escalate_damping(fake), SolverError);
    fake.damping_used = 1.0;
    NewtonSettings next = escalate_damping(fake);
    CHECK(next.damping == 0.5);
    CHECK(next.max_iter == 800);
  }
}

TEST_CASE("control recovery and state extraction") {
  Mesh mesh = build_crossed_mesh(8);
  GameConfig cfg = coarse_config(ProblemKind::distributed, GameMode::gnep, 8);
  StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
  KktSystem sys = KktSystem::full_game(problem, cfg, 50.0);
  NewtonSettings settings;
  auto [z, report] = semismooth_newton(sys, Eigen::VectorXd::Zero(sys.dim()), settings);
  REQUIRE(report.converged);
  SUBCASE("controls obey the box and the projection formula") {
    std::vector<Eigen::VectorXd> u = sys.recover_controls(z);
    REQUIRE(static_cast<int>(u.size()) == 4);
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd p = sys.adjoint_part(z, i);
      for (int k = 0; k < u[i].size(); ++k) {
        const int v = problem.control_dofs[i][k];
        CHECK(u[i][k] >= cfg.a);
        CHECK(u[i][k] <= cfg.b);
        CHECK(u[i][k] == doctest::Approx(clamp(-p[v] / cfg.alpha, cfg.a, cfg.b)).epsilon(1e-14));
      }
    }
  }
  SUBCASE("extract_state is consistent with the raw blocks") {
    EquilibriumState st = sys.extract_state(z);
    CHECK((st.y - sys.state_part(z)).norm() == 0.0);
    REQUIRE(static_cast<int>(st.p.size()) == 4);
    CHECK(st.gamma == 50.0);
    // multiplier proxy mu = gamma * Dbeta(y) carries the sign structure
    Obstacles obs = make_obstacles(cfg, mesh);
    for (int v = 0; v < problem.num_vertices(); ++v) {
      if (st.y[v] > obs.upper[v]) {
        CHECK(st.mu[v] > 0.0);
      } else if (st.y[v] < obs.lower[v]) {
        CHECK(st.mu[v] < 0.0);
      } else {
        CHECK(st.mu[v] == 0.0);
      }
    }
  }
  SUBCASE("the state block solves the state equation for the recovered controls") {
    std::vector<Eigen::VectorXd> u = sys.recover_controls(z);
    auto [y, rep] = solve_state(problem, u, sys.state_part(z));
    REQUIRE(rep.converged);
    CHECK((y.coefficients - sys.state_part(z)).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("best-response system") {
  Mesh mesh = build_crossed_mesh(8);
  GameConfig cfg = coarse_config(ProblemKind::distributed, GameMode::gnep, 8);
  StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
  const double gamma = 25.0;
  // Equilibrium of the full game ...
  KktSystem full = KktSystem::full_game(problem, cfg, gamma);
  NewtonSettings settings;
  auto [z_eq, rep] = semismooth_newton(full, Eigen::VectorXd::Zero(full.dim()), settings);
  REQUIRE(rep.converged);
  std::vector<Eigen::VectorXd> u_eq = full.recover_controls(z_eq);
  // ... is a fixed point of every player's best response.
  for (int i = 0; i < 4; ++i) {
    KktSystem br = KktSystem::best_response(problem, cfg, gamma, i, u_eq);
    CHECK(br.num_adjoints() == 1);
    NewtonSettings s2;
    auto [z_br, rep_br] = semismooth_newton(br, Eigen::VectorXd::Zero(br.dim()), s2);
    REQUIRE(rep_br.converged);
    Eigen::VectorXd u_br = br.recover_controls(z_br)[0];
    // Controls amplify adjoint-level residuals by 1/alpha = 1e5, so the two
    // independently converged solves agree to ~1e-10/alpha at best.
    CHECK((u_br - u_eq[i]).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("toy quadratic game") {
  SUBCASE("symmetric zero data has the zero equilibrium") {
    ToyEquilibrium eq = solve_toy_game({1.0, 0.0, 0.0});
    CHECK(eq.u1 == 0.0);
    CHECK(eq.u2 == 0.0);
    CHECK(eq.y == 0.0);
  }
  SUBCASE("alpha=1, d=(3,0) has the hand-derived equilibrium (2,-1)") {
    // Stationarity: 2 u1 + (u1 + u2) ... wait, (alpha+1) u_i + u_{-i} = d_i:
    //   2 u1 + u2 = 3, u1 + 2 u2 = 0  =>  u1 = 2, u2 = -1, y = 1.
    ToyEquilibrium eq = solve_toy_game({1.0, 3.0, 0.0});
    CHECK(std::abs(eq.u1 - 2.0) < 1e-12);
    CHECK(std::abs(eq.u2 + 1.0) < 1e-12);
    CHECK(std::abs(eq.y - 1.0) < 1e-12);
  }
  SUBCASE("equilibrium survives a brute-force best-response scan") {
    ToyQuadraticGame game{1.0, 3.0, 0.0};
    ToyEquilibrium eq = solve_toy_game(game);
    // V(u) = sum_i [ J_i(u_i, u_-i) - min_v J_i(v, u_-i) ] over a fine grid;
    // it vanishes at the equilibrium and is positive elsewhere.
    auto v_surrogate = [&](double u1, double u2) {
      double best1 = 1e300, best2 = 1e300;
      for (int k = -4000; k <= 4000; ++k) {
        const double v = k * 1e-3;
        best1 = std::min(best1, toy_objective(game, 0, v, u2));
        best2 = std::min(best2, toy_objective(game, 1, u1, v));
      }
      return (toy_objective(game, 0, u1, u2) - best1) +
             (toy_objective(game, 1, u1, u2) - best2);
    };
    CHECK(v_surrogate(eq.u1, eq.u2) >= 0.0);
    CHECK(v_surrogate(eq.u1, eq.u2) < 1e-5);
    CHECK(v_surrogate(eq.u1 + 0.5, eq.u2) > 1e-3);
    CHECK(v_surrogate(eq.u1, eq.u2 - 0.7) > 1e-3);
  }
  SUBCASE("singular interaction matrix is rejected") {
    CHECK_THROWS_AS(solve_toy_game({-2.0, 1.0, 1.0}), SolverError);
  }
}
