#pragma once

#include <utility>
#include <vector>

#include "gnep/mesh_fem.hpp"
#include "gnep/newton.hpp"

namespace gnep {

enum class ProblemKind { distributed, boundary };

// Discretization of one semilinear state equation together with the per-player
// control embeddings B_i:
//   distributed:  K y + diag(m) y^3 = sum_i B_i u_i,   y = 0 on the boundary,
//   boundary:     (K + M) y + diag(m_bnd) y^3 = sum_i B_i u_i.
// Cubic terms use the vertex rule (lumped quadrature); the linear volume term
// of the boundary problem uses the consistent mass matrix. B_i scatters the
// player's control through the lumped quadrant mass (distributed) or the
// lumped Gamma_i boundary mass (boundary kind).
struct StateProblem {
  ProblemKind kind = ProblemKind::distributed;
  const Mesh* mesh = nullptr;
  int num_players = 4;

  SparseOperator stiffness;  // K
  SparseOperator mass;       // M, whole domain, consistent
  SparseOperator base;       // K (distributed) or K + M (boundary)
  Eigen::VectorXd vol_lumped;
  Eigen::VectorXd bnd_lumped;

  // Per player: consistent tracking mass over omega_i, its row sums, the
  // lumped control weight (quadrant or boundary segment) and the vertex
  // indices carrying a control degree of freedom (weight > 0). Interface
  // vertices appear in the DOF set of every adjacent player; the tie-broken
  // mesh maps decide ownership for combined outputs.
  std::vector<SparseOperator> tracking_mass;
  std::vector<Eigen::VectorXd> tracking_row_sum;
  std::vector<Eigen::VectorXd> control_weight;
  std::vector<std::vector<int>> control_dofs;

  std::vector<int> dirichlet;  // boundary vertices for distributed, else empty

  SpaceTag state_tag() const {
    return kind == ProblemKind::distributed ? SpaceTag::zero_trace : SpaceTag::full;
  }
  const Eigen::VectorXd& cubic_weight() const {
    return kind == ProblemKind::distributed ? vol_lumped : bnd_lumped;
  }
  int num_vertices() const { return mesh->num_vertices(); }
};

// num_players is 4 (quadrant partition) or 1 (single player owning the whole
// domain / whole boundary). Requires even n for the quadrant case so that
// every triangle lies in exactly one quadrant.
StateProblem build_state_problem(const Mesh& mesh, ProblemKind kind, int num_players = 4);

// Compact control vector (indexed by control_dofs[i]) -> full load vector.
Eigen::VectorXd apply_B(const StateProblem& problem, int i, const Eigen::VectorXd& u_i);

// Restriction of a full vertex vector to player i's control DOFs.
Eigen::VectorXd gather_dofs(const StateProblem& problem, int i, const Eigen::VectorXd& full);

// Damped Newton solve of the nonlinear state equation; extra_load is an
// optional assembled functional added to sum_i B_i u_i (used by manufactured-
// solution studies). Residual contract: ||R(y)|| <= 1e-12 * max(1, ||load||).
std::pair<FeFunction, NewtonReport> solve_state(const StateProblem& problem,
                                                const std::vector<Eigen::VectorXd>& u,
                                                const Eigen::VectorXd& y0,
                                                const Eigen::VectorXd& extra_load = Eigen::VectorXd());

// DA(y) = base + 3 diag(cubic_weight .* y^2), assembled symmetric and returned
// without Dirichlet rows; constraints are applied at solve time.
SparseOperator linearized_operator(const StateProblem& problem, const Eigen::VectorXd& y);

// Solves DA(y) p = rhs (self-adjoint) with the state's boundary conditions;
// 1e-12 relative residual contract via solve_sparse.
FeFunction solve_adjoint(const StateProblem& problem, const FeFunction& y,
                         const Eigen::VectorXd& rhs);

}  // namespace gnep
