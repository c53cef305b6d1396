#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>

namespace gnep {

// Raised when a linear or nonlinear solve cannot meet its contract
// (singular system, Newton failure after the full damping escalation, ...).
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised on malformed user input (CLI flags, inconsistent configuration).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised on file-system problems while reading or writing artifacts.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double clamp(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

}  // namespace gnep
