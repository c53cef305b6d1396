#pragma once

#include <utility>
#include <vector>

#include "gnep/mesh_fem.hpp"

namespace gnep {

// Bilateral pointwise state bounds psi <= y <= psibar, stored per vertex.
struct Obstacles {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Obstacles constants(const Mesh& mesh, double lower, double upper);
  void validate() const;
};

// Moreau-Yosida penalty of the bound violation, vertex rule:
//   beta(y) = 1/2 sum_v m_v [ max(y_v - psibar_v, 0)^2 + max(psi_v - y_v, 0)^2 ].
// beta_grad is the exact gradient of this discrete functional,
//   component v:  m_v [ max(y_v - psibar_v, 0) - max(psi_v - y_v, 0) ].
double beta(const FeFunction& y, const Obstacles& obs);
Eigen::VectorXd beta_grad(const FeFunction& y, const Obstacles& obs);

// Weighted raw-vector variants for hot loops (weights = lumped volume mass).
double beta_weighted(const Eigen::VectorXd& weights, const Eigen::VectorXd& y,
                     const Obstacles& obs);
Eigen::VectorXd beta_grad_weighted(const Eigen::VectorXd& weights, const Eigen::VectorXd& y,
                                   const Obstacles& obs);

// Strictly violating vertex sets {v : y_v > psibar_v} and {v : y_v < psi_v};
// a vertex exactly on a bound is inactive (generalized derivative of max at 0
// is taken as 0).
std::pair<std::vector<int>, std::vector<int>> beta_active_sets(const FeFunction& y,
                                                               const Obstacles& obs);

// Largest pointwise violation max(0, y - psibar, psi - y) over all vertices.
double max_violation(const Eigen::VectorXd& y, const Obstacles& obs);

}  // namespace gnep
