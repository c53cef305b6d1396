#include "gnep/game.hpp"

#include <cmath>
#include <sstream>

#include "gnep/kkt_newton.hpp"

namespace gnep {

namespace {

void check_player(const GameConfig& cfg, const StateProblem& problem) {
  if (problem.num_players != cfg.num_players) {
    throw UsageError("game config and state problem disagree on the number of players");
  }
  if (problem.kind != cfg.kind) {
    throw UsageError("game config and state problem disagree on the problem kind");
  }
}

void check_control(const StateProblem& problem, int i, const Eigen::VectorXd& u_i) {
  if (i < 0 || i >= problem.num_players) {
    throw UsageError("player index out of range");
  }
  if (u_i.size() != static_cast<Eigen::Index>(problem.control_dofs[i].size())) {
    std::ostringstream msg;
    msg << "control vector of player " << (i + 1) << " has " << u_i.size() << " entries, expected "
        << problem.control_dofs[i].size();
    throw UsageError(msg.str());
  }
}

}  // namespace

void GameConfig::validate() const {
  if (num_players != 1 && num_players != 4) {
    throw UsageError("num_players must be 1 or 4");
  }
  if (mesh_n < 2) {
    throw UsageError("mesh_n must be at least 2");
  }
  if (num_players == 4 && mesh_n % 2 != 0) {
    throw UsageError("the four-player quadrant partition needs an even mesh_n");
  }
  if (!std::isfinite(alpha) || alpha <= 0.0) {
    throw UsageError("alpha must be positive");
  }
  if (!std::isfinite(a) || !std::isfinite(b) || a >= b) {
    throw UsageError("control bounds must satisfy a < b");
  }
  if (!std::isfinite(psi_lower) || !std::isfinite(psi_upper) || psi_lower >= psi_upper) {
    throw UsageError("obstacles must satisfy psi_lower < psi_upper");
  }
  if (static_cast<int>(yd.size()) != num_players) {
    throw UsageError("yd must list exactly one desired value per player");
  }
  for (double d : yd) {
    if (!std::isfinite(d)) {
      throw UsageError("yd entries must be finite");
    }
  }
}

Obstacles make_obstacles(const GameConfig& cfg, const Mesh& mesh) {
  return Obstacles::constants(mesh, cfg.psi_lower, cfg.psi_upper);
}

double objective(const GameConfig& cfg, const StateProblem& problem, int i,
                 const Eigen::VectorXd& u_i, const Eigen::VectorXd& y) {
  check_player(cfg, problem);
  check_control(problem, i, u_i);
  if (y.size() != static_cast<Eigen::Index>(problem.num_vertices())) {
    throw UsageError("state vector has the wrong length");
  }
  Eigen::VectorXd t = y.array() - cfg.yd[i];
  double tracking = 0.5 * t.dot(problem.tracking_mass[i].matrix * t);
  const auto& dofs = problem.control_dofs[i];
  const Eigen::VectorXd& w = problem.control_weight[i];
  double control = 0.0;
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    control += w[dofs[k]] * u_i[static_cast<Eigen::Index>(k)] * u_i[static_cast<Eigen::Index>(k)];
  }
  return tracking + 0.5 * cfg.alpha * control;
}

double summed_objectives(const GameConfig& cfg, const StateProblem& problem,
                         const std::vector<Eigen::VectorXd>& u, const Eigen::VectorXd& y) {
  if (static_cast<int>(u.size()) != problem.num_players) {
    throw UsageError("expected one control vector per player");
  }
  double total = 0.0;
  for (int i = 0; i < problem.num_players; ++i) {
    total += objective(cfg, problem, i, u[i], y);
  }
  return total;
}

StateEvaluator make_state_evaluator(const StateProblem& problem) {
  return [&problem](const std::vector<Eigen::VectorXd>& controls) {
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(problem.num_vertices());
    auto [y, report] = solve_state(problem, controls, y0);
    (void)report;
    return y.coefficients;
  };
}

double nikaido_isoda(const GameConfig& cfg, const StateProblem& problem,
                     const std::vector<Eigen::VectorXd>& u, const std::vector<Eigen::VectorXd>& v,
                     const StateEvaluator& y_eval, double gamma) {
  check_player(cfg, problem);
  if (u.size() != v.size() || static_cast<int>(u.size()) != problem.num_players) {
    throw UsageError("nikaido_isoda expects one current and one trial control per player");
  }
  Obstacles obs = make_obstacles(cfg, *problem.mesh);
  Eigen::VectorXd y_u = y_eval(u);
  double beta_u = beta_weighted(problem.vol_lumped, y_u, obs);
  double total = 0.0;
  for (int i = 0; i < problem.num_players; ++i) {
    std::vector<Eigen::VectorXd> mixed = u;
    mixed[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
    Eigen::VectorXd y_mixed = y_eval(mixed);
    double beta_mixed = beta_weighted(problem.vol_lumped, y_mixed, obs);
    double current = objective(cfg, problem, i, u[static_cast<std::size_t>(i)], y_u);
    double trial = objective(cfg, problem, i, v[static_cast<std::size_t>(i)], y_mixed);
    total += (current + gamma * beta_u) - (trial + gamma * beta_mixed);
  }
  return total;
}

double WEvaluation::beta_sum() const {
  double total = 0.0;
  for (double b : beta_values) {
    total += b;
  }
  return total;
}

WEvaluation value_function_W(const GameConfig& cfg, const StateProblem& problem, double gamma,
                             const std::vector<Eigen::VectorXd>& u_bar) {
  check_player(cfg, problem);
  if (static_cast<int>(u_bar.size()) != problem.num_players) {
    throw UsageError("value_function_W expects one frozen control per player");
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw UsageError("gamma must be finite and nonnegative");
  }
  Obstacles obs = make_obstacles(cfg, *problem.mesh);
  WEvaluation out;
  for (int i = 0; i < problem.num_players; ++i) {
    KktSystem sys = KktSystem::best_response(problem, cfg, gamma, i, u_bar);
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(sys.dim());
    NewtonSettings settings;
    auto [z, report] = semismooth_newton(sys, z0, settings);
    if (!report.converged) {
      std::ostringstream msg;
      msg << "best response of player " << (i + 1) << " at gamma " << gamma
          << " did not converge (residual " << report.final_absolute << ")";
      throw SolverError(msg.str());
    }
    Eigen::VectorXd y = sys.state_part(z);
    Eigen::VectorXd p = sys.adjoint_part(z, 0);
    Eigen::VectorXd v_i = sys.recover_controls(z)[0];
    double beta_i = beta_weighted(problem.vol_lumped, y, obs);
    out.value += objective(cfg, problem, i, v_i, y) + gamma * beta_i;
    out.controls.push_back(std::move(v_i));
    out.states.push_back(std::move(y));
    out.adjoints.push_back(std::move(p));
    out.beta_values.push_back(beta_i);
  }
  return out;
}

ResidualReport equilibrium_residuals(const GameConfig& cfg, const StateProblem& problem,
                                     const EquilibriumState& st) {
  check_player(cfg, problem);
  const int n = problem.num_players;
  if (static_cast<int>(st.u.size()) != n || static_cast<int>(st.lambda.size()) != n) {
    throw UsageError("equilibrium state must carry one control and one lambda per player");
  }
  if (st.p.empty() || (static_cast<int>(st.p.size()) != n && st.p.size() != 1)) {
    throw UsageError("equilibrium state must carry N adjoints or a single shared one");
  }
  if (st.y.size() != static_cast<Eigen::Index>(problem.num_vertices()) ||
      st.mu.size() != st.y.size()) {
    throw UsageError("state and multiplier vectors must live on the mesh vertices");
  }
  Obstacles obs = make_obstacles(cfg, *problem.mesh);
  ResidualReport rep;
  for (int i = 0; i < n; ++i) {
    check_control(problem, i, st.u[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd& p = st.p.size() == 1 ? st.p[0] : st.p[static_cast<std::size_t>(i)];
    const auto& dofs = problem.control_dofs[i];
    const Eigen::VectorXd& w = problem.control_weight[i];
    const Eigen::VectorXd& u_i = st.u[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& lam = st.lambda[static_cast<std::size_t>(i)];
    if (lam.size() != u_i.size()) {
      throw UsageError("lambda and control of one player differ in length");
    }
    for (std::size_t k = 0; k < dofs.size(); ++k) {
      const auto ke = static_cast<Eigen::Index>(k);
      double grad = w[dofs[k]] * (cfg.alpha * u_i[ke] + p[dofs[k]]) + lam[ke];
      rep.stationarity = std::max(rep.stationarity, std::abs(grad));
      double viol;
      if (u_i[ke] <= cfg.a) {
        viol = std::max(lam[ke], 0.0);  // lower bound active: lambda <= 0
      } else if (u_i[ke] >= cfg.b) {
        viol = std::max(-lam[ke], 0.0);  // upper bound active: lambda >= 0
      } else {
        viol = std::abs(lam[ke]);  // interior: lambda = 0
      }
      rep.normal_cone_violation = std::max(rep.normal_cone_violation, viol);
    }
  }
  rep.primal_infeasibility = max_violation(st.y, obs);
  for (Eigen::Index v = 0; v < st.y.size(); ++v) {
    double dist = std::max(0.0, st.y[v] - obs.upper[v]) + std::max(0.0, obs.lower[v] - st.y[v]);
    rep.complementarity_gap += std::abs(st.mu[v]) * dist;
  }
  return rep;
}

double price_of_anarchy(const GameConfig& cfg, const StateProblem& problem,
                        const EquilibriumState& nash, const EquilibriumState& coop) {
  double nash_sum = summed_objectives(cfg, problem, nash.u, nash.y);
  double coop_sum = summed_objectives(cfg, problem, coop.u, coop.y);
  if (!(coop_sum > 0.0)) {
    throw SolverError("cooperative objective sum is not positive; objective ratio undefined");
  }
  return nash_sum / coop_sum;
}

}  // namespace gnep
