#include "gnep/penalty.hpp"

#include <algorithm>
#include <cmath>

namespace gnep {

Obstacles Obstacles::constants(const Mesh& mesh, double lower, double upper) {
  Obstacles obs;
  obs.lower = Eigen::VectorXd::Constant(mesh.num_vertices(), lower);
  obs.upper = Eigen::VectorXd::Constant(mesh.num_vertices(), upper);
  obs.validate();
  return obs;
}

void Obstacles::validate() const {
  if (lower.size() != upper.size()) throw UsageError("Obstacles: bound vectors differ in length");
  for (Eigen::Index v = 0; v < lower.size(); ++v)
    if (!(lower[v] < upper[v]))
      throw UsageError("Obstacles: lower bound must be strictly below upper bound everywhere");
}

namespace {

void check_sizes(const Eigen::VectorXd& weights, const Eigen::VectorXd& y, const Obstacles& obs) {
  if (y.size() != weights.size() || y.size() != obs.lower.size())
    throw UsageError("penalty: mesh/obstacle size mismatch");
}

}  // namespace

double beta_weighted(const Eigen::VectorXd& weights, const Eigen::VectorXd& y,
                     const Obstacles& obs) {
  check_sizes(weights, y, obs);
  double value = 0.0;
  for (Eigen::Index v = 0; v < y.size(); ++v) {
    const double up = std::max(y[v] - obs.upper[v], 0.0);
    const double lo = std::max(obs.lower[v] - y[v], 0.0);
    value += 0.5 * weights[v] * (up * up + lo * lo);
  }
  return value;
}

Eigen::VectorXd beta_grad_weighted(const Eigen::VectorXd& weights, const Eigen::VectorXd& y,
                                   const Obstacles& obs) {
  check_sizes(weights, y, obs);
  Eigen::VectorXd g(y.size());
  for (Eigen::Index v = 0; v < y.size(); ++v) {
    const double up = std::max(y[v] - obs.upper[v], 0.0);
    const double lo = std::max(obs.lower[v] - y[v], 0.0);
    g[v] = weights[v] * (up - lo);
  }
  return g;
}

double beta(const FeFunction& y, const Obstacles& obs) {
  y.validate();
  return beta_weighted(lumped_mass(*y.mesh), y.coefficients, obs);
}

Eigen::VectorXd beta_grad(const FeFunction& y, const Obstacles& obs) {
  y.validate();
  return beta_grad_weighted(lumped_mass(*y.mesh), y.coefficients, obs);
}

std::pair<std::vector<int>, std::vector<int>> beta_active_sets(const FeFunction& y,
                                                               const Obstacles& obs) {
  y.validate();
  if (y.coefficients.size() != obs.lower.size())
    throw UsageError("beta_active_sets: mesh/obstacle size mismatch");
  std::vector<int> upper_active, lower_active;
  for (Eigen::Index v = 0; v < y.coefficients.size(); ++v) {
    if (y.coefficients[v] > obs.upper[v]) upper_active.push_back(static_cast<int>(v));
    if (y.coefficients[v] < obs.lower[v]) lower_active.push_back(static_cast<int>(v));
  }
  return {std::move(upper_active), std::move(lower_active)};
}

double max_violation(const Eigen::VectorXd& y, const Obstacles& obs) {
  if (y.size() != obs.lower.size()) throw UsageError("max_violation: size mismatch");
  double worst = 0.0;
  for (Eigen::Index v = 0; v < y.size(); ++v)
    worst = std::max({worst, y[v] - obs.upper[v], obs.lower[v] - y[v]});
  return worst;
}

}  // namespace gnep
