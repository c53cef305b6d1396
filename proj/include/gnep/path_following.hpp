#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gnep/kkt_newton.hpp"

namespace gnep {

struct PathConfig {
  double gamma0 = 1.0;
  double c_path = 1e-5;
  double eps = 10.0;
  double gamma_max = 1e8;
  double beta_tol = 1e-15;
  bool sample_w = false;
  std::vector<double> w_grid;  // gamma values at which W is sampled post-run

  void validate() const;
};

// gamma_{k+1} = gamma_k + max(c_path / penalty_value, eps). The caller feeds
// the mode-appropriate denominator (N * beta for the shared-penalty game,
// beta for the cooperative problem). penalty_value must be positive: a zero
// penalty terminates the path before any update is attempted.
double gamma_update(double gamma_k, double penalty_value, const PathConfig& cfg);

struct PathRecord {
  int k = 0;
  double gamma = 0.0;
  double beta_value = 0.0;
  std::vector<double> beta_per_player;
  double sum_objectives = 0.0;
  NewtonReport newton;
  double wall_ms = 0.0;
  double max_violation = 0.0;
};

struct WSample {
  double gamma = 0.0;
  double value = 0.0;
};

struct PathHistory {
  std::vector<PathRecord> records;
  std::string termination_reason;  // "beta_tol" or "gamma_max"
  std::vector<WSample> w_samples;
};

// Raised when a Newton run inside the continuation loop exhausts the
// escalation ladder; carries the partial history for post-mortem output.
struct PathFailure : SolverError {
  PathFailure(const std::string& what, PathHistory partial)
      : SolverError(what), history(std::move(partial)) {}
  PathHistory history;
};

using PathSink = std::function<void(const PathRecord&)>;

// Outer continuation loop: solve the penalized system at gamma_k (warm
// started from the previous iterate, Newton settings persisting across
// steps), record the step, stop once beta <= beta_tol or the next gamma
// would exceed gamma_max.
std::pair<EquilibriumState, PathHistory> run_path(const StateProblem& problem,
                                                  const GameConfig& cfg, const PathConfig& path,
                                                  const PathSink& sink = {});

// Sample W(gamma, u_bar) on a gamma grid with u_bar frozen at the supplied
// equilibrium.
std::vector<WSample> sample_value_function(const GameConfig& cfg, const StateProblem& problem,
                                           const EquilibriumState& at,
                                           const std::vector<double>& grid);

}  // namespace gnep
