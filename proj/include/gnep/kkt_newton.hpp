#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "gnep/game.hpp"
#include "gnep/newton.hpp"

namespace gnep {

// Coupled penalized first-order system in the stacked unknown
// z = (y, p_1, ..., p_m). Controls are not unknowns: they are recovered
// pointwise as u_i = clamp(-p_j/alpha, a, b) on the owning adjoint j
// (variational discretization). Three flavours share the assembly:
//   gnep           m = N adjoints, player i tracks into p_i,
//   coop           m = 1 shared adjoint accumulating all tracking terms,
//   best_response  m = 1 adjoint for a single player, the other controls
//                  frozen into a constant load.
enum class KktMode { gnep, coop, best_response };

class KktSystem {
 public:
  static KktSystem full_game(const StateProblem& problem, const GameConfig& cfg, double gamma);
  static KktSystem best_response(const StateProblem& problem, const GameConfig& cfg, double gamma,
                                 int player, const std::vector<Eigen::VectorXd>& u_bar);

  KktMode mode() const { return mode_; }
  int num_adjoints() const { return static_cast<int>(adjoint_players_.size()); }
  int dim() const;
  double gamma() const { return gamma_; }
  void set_gamma(double gamma);

  // Semismooth residual of the stacked system; Dirichlet rows are identity.
  Eigen::VectorXd residual(const Eigen::VectorXd& z) const;

  // Newton matrix at z (fixed union sparsity pattern, values scattered in
  // place) and the corresponding linear solve. factorize() must follow every
  // refresh before solve() is called.
  void refresh_jacobian(const Eigen::VectorXd& z);
  void factorize();
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  // Pointwise control recovery from the adjoint blocks of z. Full-game
  // systems return one control per player; best-response systems return a
  // single control for the active player.
  std::vector<Eigen::VectorXd> recover_controls(const Eigen::VectorXd& z) const;
  Eigen::VectorXd state_part(const Eigen::VectorXd& z) const;
  Eigen::VectorXd adjoint_part(const Eigen::VectorXd& z, int j) const;

  // Full-game only: package the solution (controls, multipliers included).
  EquilibriumState extract_state(const Eigen::VectorXd& z) const;

  const StateProblem& problem() const { return *problem_; }
  const GameConfig& config() const { return *cfg_; }

 private:
  KktSystem(const StateProblem& problem, const GameConfig& cfg, double gamma, KktMode mode,
            std::vector<std::vector<int>> adjoint_players, Eigen::VectorXd frozen_load);

  void build_pattern();
  int slot(int row, int col) const;

  const StateProblem* problem_;
  const GameConfig* cfg_;
  double gamma_;
  KktMode mode_;
  // adjoint_players_[j] = players whose tracking terms and control coupling
  // attach to adjoint block j.
  std::vector<std::vector<int>> adjoint_players_;
  Eigen::VectorXd frozen_load_;
  Obstacles obstacles_;

  Eigen::SparseMatrix<double> jac_;
  struct ConstEntry {
    int slot;
    double value;
  };
  std::vector<ConstEntry> const_entries_;  // base blocks, tracking blocks, identity rows
  struct CubicEntry {
    int slot;
    int vertex;
  };
  std::vector<CubicEntry> cubic_entries_;  // diag 3*cw*y^2 in (0,0) and every (j,j)
  struct CouplingEntry {
    int slot;
    int vertex;
    int adjoint;
    double weight;  // lumped control weight of the owning player at vertex
  };
  std::vector<CouplingEntry> coupling_entries_;  // (0,j) diag, active only off the control bounds
  struct AdjointDiagEntry {
    int slot;
    int vertex;
    int adjoint;
  };
  std::vector<AdjointDiagEntry> adjoint_diag_entries_;  // (j,0) diag: 6*cw*y*p_j - gamma*m*active

  struct Factorization;
  std::shared_ptr<Factorization> fact_;
};

// Damped semismooth Newton with the escalation ladder: run with the settings
// handed in; if the run fails both tolerances, halve the damping factor and
// double the iteration cap, then retry from the same starting point. Settings
// that eventually succeed are written back so subsequent calls keep them.
// When the ladder bottoms out (damping would drop below 1/64) the final
// report is returned with converged = false.
std::pair<Eigen::VectorXd, NewtonReport> semismooth_newton(KktSystem& sys,
                                                           const Eigen::VectorXd& z0,
                                                           NewtonSettings& settings);

// Two-player scalar quadratic game y = u1 + u2,
// J_i = 1/2 (y - d_i)^2 + alpha/2 u_i^2: closed-form Nash equilibrium from
// the 2x2 stationarity system (alpha+1) u_i + u_{-i} = d_i.
struct ToyQuadraticGame {
  double alpha = 1.0;
  double d1 = 0.0;
  double d2 = 0.0;
};
struct ToyEquilibrium {
  double u1 = 0.0;
  double u2 = 0.0;
  double y = 0.0;
};
ToyEquilibrium solve_toy_game(const ToyQuadraticGame& game);
double toy_objective(const ToyQuadraticGame& game, int i, double u1, double u2);

}  // namespace gnep
