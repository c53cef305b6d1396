#pragma once

#include <functional>
#include <vector>

#include "gnep/penalty.hpp"
#include "gnep/semilinear_state.hpp"

namespace gnep {

enum class GameMode { gnep, coop };

// Full description of one game instance: N tracking-type players on the
// quadrant partition (or a single player owning the whole domain), control
// cost weight alpha, shared control box [a, b], shared state obstacles and
// per-player desired constants.
struct GameConfig {
  ProblemKind kind = ProblemKind::distributed;
  GameMode mode = GameMode::gnep;
  int mesh_n = 128;
  int num_players = 4;
  double alpha = 1e-5;
  double a = -32.0;
  double b = 32.0;
  double psi_lower = 0.0;
  double psi_upper = 0.3;
  std::vector<double> yd = {0.1, 0.2, 0.0, 0.3};

  void validate() const;
};

Obstacles make_obstacles(const GameConfig& cfg, const Mesh& mesh);

// Solver output bundle: controls (compact, one per player), state, adjoints
// (one per player in gnep mode, a single shared one in cooperative mode), the
// flattened multiplier proxy mu^gamma = gamma * beta_grad(y) (>= 0 on the
// upper-active set, <= 0 on the lower-active set) and the normal-cone
// residuals lambda_i = -w_i .* (alpha u_i + p|_{dofs_i}).
struct EquilibriumState {
  std::vector<Eigen::VectorXd> u;
  Eigen::VectorXd y;
  std::vector<Eigen::VectorXd> p;
  Eigen::VectorXd mu;
  std::vector<Eigen::VectorXd> lambda;
  double gamma = 0.0;
};

// J_i(u_i, y) = 1/2 (y - yd_i)' M^{omega_i} (y - yd_i) + alpha/2 u_i' W_i u_i
// with the consistent tracking mass and the lumped control weight.
double objective(const GameConfig& cfg, const StateProblem& problem, int i,
                 const Eigen::VectorXd& u_i, const Eigen::VectorXd& y);
double summed_objectives(const GameConfig& cfg, const StateProblem& problem,
                         const std::vector<Eigen::VectorXd>& u, const Eigen::VectorXd& y);

using StateEvaluator =
    std::function<Eigen::VectorXd(const std::vector<Eigen::VectorXd>& controls)>;
StateEvaluator make_state_evaluator(const StateProblem& problem);

// Nikaido-Isoda functional Psi(u, v) = sum_i (J_i(u_i,u_-i) - J_i(v_i,u_-i)),
// evaluated through N+1 state solves. With gamma > 0 each J_i is augmented by
// the penalty gamma*beta(state), giving the penalized variant.
double nikaido_isoda(const GameConfig& cfg, const StateProblem& problem,
                     const std::vector<Eigen::VectorXd>& u, const std::vector<Eigen::VectorXd>& v,
                     const StateEvaluator& y_eval, double gamma = 0.0);

// Value function W(gamma, u_bar) = inf_v sum_i (J_i(v_i, u_bar_-i) +
// gamma*beta(S(v_i, u_bar_-i))): N independent penalized best responses with
// the opponents frozen.
struct WEvaluation {
  double value = 0.0;
  std::vector<Eigen::VectorXd> controls;  // best responses, compact
  std::vector<Eigen::VectorXd> states;    // per player: state at (v_i, u_bar_-i)
  std::vector<Eigen::VectorXd> adjoints;
  std::vector<double> beta_values;        // beta at each player's state

  double beta_sum() const;
};
WEvaluation value_function_W(const GameConfig& cfg, const StateProblem& problem, double gamma,
                             const std::vector<Eigen::VectorXd>& u_bar);

// Diagnostics against the unpenalized first-order system.
struct ResidualReport {
  double stationarity = 0.0;          // ||alpha W u + W p + lambda||_inf over players
  double primal_infeasibility = 0.0;  // max pointwise obstacle violation
  double complementarity_gap = 0.0;   // sum_v |mu_v| dist(y_v, [psi, psibar])
  double normal_cone_violation = 0.0; // sign-pattern breach of lambda vs active bounds
};
ResidualReport equilibrium_residuals(const GameConfig& cfg, const StateProblem& problem,
                                     const EquilibriumState& st);

// Ratio of summed unpenalized objectives, Nash over cooperative.
double price_of_anarchy(const GameConfig& cfg, const StateProblem& problem,
                        const EquilibriumState& nash, const EquilibriumState& coop);

}  // namespace gnep
