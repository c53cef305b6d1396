#pragma once

#include <vector>

#include "gnep/common.hpp"

namespace gnep {

// Shared Newton policy: absolute and relative tolerance 1e-10, first attempt
// undamped with at most 25 iterations; on failure the damping factor is halved
// and the iteration cap doubled, retrying from the same starting value, until
// the damping would drop below 1/64. Successful escalated settings are kept by
// the caller for all subsequent solves of a run.
inline constexpr double kNewtonAbsTol = 1e-10;
inline constexpr double kNewtonRelTol = 1e-10;
inline constexpr double kDampingFloor = 1.0 / 64.0;
inline constexpr int kNewtonBaseMaxIter = 25;

struct NewtonSettings {
  double damping = 1.0;
  int max_iter = kNewtonBaseMaxIter;
};

struct NewtonReport {
  int iterations = 0;
  double final_absolute = 0.0;
  // Residual scaled by max(initial residual, 1); converged implies both the
  // absolute and this relative value are <= 1e-10.
  double final_relative = 0.0;
  double damping_used = 1.0;
  int max_iter_cap = kNewtonBaseMaxIter;
  bool converged = false;
  int escalations = 0;
  std::vector<double> residual_history;  // absolute norms, entry 0 = start
};

// Next rung of the damping ladder after a failed attempt. Throws SolverError
// once the damping would fall below the 1/64 floor (terminal failure).
NewtonSettings escalate_damping(const NewtonReport& failed_attempt);

}  // namespace gnep
