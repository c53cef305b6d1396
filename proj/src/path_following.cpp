#include "gnep/path_following.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace gnep {

void PathConfig::validate() const {
  if (!std::isfinite(gamma0) || gamma0 <= 0.0) {
    throw UsageError("gamma0 must be positive");
  }
  if (!std::isfinite(c_path) || c_path <= 0.0) {
    throw UsageError("c_path must be positive");
  }
  if (!std::isfinite(eps) || eps <= 0.0) {
    throw UsageError("eps must be positive");
  }
  if (!std::isfinite(gamma_max) || gamma_max < gamma0) {
    throw UsageError("gamma_max must be finite and at least gamma0");
  }
  if (!std::isfinite(beta_tol) || beta_tol < 0.0) {
    throw UsageError("beta_tol must be nonnegative");
  }
  for (double g : w_grid) {
    if (!std::isfinite(g) || g <= 0.0) {
      throw UsageError("value-function sample points must be positive");
    }
  }
}

double gamma_update(double gamma_k, double penalty_value, const PathConfig& cfg) {
  if (!std::isfinite(gamma_k) || gamma_k <= 0.0) {
    throw UsageError("gamma must be positive");
  }
  if (!std::isfinite(penalty_value) || penalty_value <= 0.0) {
    throw UsageError(
        "penalty value must be positive: a vanishing penalty terminates the path before any "
        "update");
  }
  double quotient = cfg.c_path / penalty_value;
  // Canonicalize quotients that are integral in exact decimal arithmetic:
  // the decimal-representation error of the operands (a few ulps) would
  // otherwise leak into the update and break unit-exact comparisons.
  const double nearest = std::nearbyint(quotient);
  if (nearest > 0.0 &&
      std::abs(quotient - nearest) <= 8.0 * std::numeric_limits<double>::epsilon() * quotient) {
    quotient = nearest;
  }
  return gamma_k + std::max(quotient, cfg.eps);
}

std::pair<EquilibriumState, PathHistory> run_path(const StateProblem& problem,
                                                  const GameConfig& cfg, const PathConfig& path,
                                                  const PathSink& sink) {
  cfg.validate();
  path.validate();
  Obstacles obs = make_obstacles(cfg, *problem.mesh);
  KktSystem sys = KktSystem::full_game(problem, cfg, path.gamma0);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(sys.dim());
  NewtonSettings settings;
  PathHistory hist;
  double gamma = path.gamma0;
  int k = 1;
  while (true) {
    sys.set_gamma(gamma);
    const auto t0 = std::chrono::steady_clock::now();
    auto [z_next, report] = semismooth_newton(sys, z, settings);
    const auto t1 = std::chrono::steady_clock::now();
    if (!report.converged) {
      hist.termination_reason = "newton_failure";
      std::ostringstream msg;
      msg << "Newton did not converge at continuation step " << k << " (gamma " << gamma
          << ", residual " << report.final_absolute << ")";
      throw PathFailure(msg.str(), hist);
    }
    z = z_next;

    PathRecord rec;
    rec.k = k;
    rec.gamma = gamma;
    Eigen::VectorXd y = sys.state_part(z);
    rec.beta_value = beta_weighted(problem.vol_lumped, y, obs);
    // Every player is penalized at the shared state, so the per-player
    // penalty values coincide; keep one entry per adjoint block.
    rec.beta_per_player.assign(static_cast<std::size_t>(sys.num_adjoints()), rec.beta_value);
    rec.sum_objectives = summed_objectives(cfg, problem, sys.recover_controls(z), y);
    rec.newton = report;
    rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rec.max_violation = max_violation(y, obs);
    hist.records.push_back(rec);
    if (sink) {
      sink(rec);
    }

    if (rec.beta_value <= path.beta_tol) {
      hist.termination_reason = "beta_tol";
      break;
    }
    const double denominator =
        cfg.mode == GameMode::gnep ? cfg.num_players * rec.beta_value : rec.beta_value;
    const double gamma_next = gamma_update(gamma, denominator, path);
    if (gamma_next > path.gamma_max) {
      hist.termination_reason = "gamma_max";
      break;
    }
    gamma = gamma_next;
    ++k;
  }
  EquilibriumState st = sys.extract_state(z);
  if (path.sample_w && !path.w_grid.empty()) {
    hist.w_samples = sample_value_function(cfg, problem, st, path.w_grid);
  }
  return {std::move(st), std::move(hist)};
}

std::vector<WSample> sample_value_function(const GameConfig& cfg, const StateProblem& problem,
                                           const EquilibriumState& at,
                                           const std::vector<double>& grid) {
  std::vector<WSample> out;
  out.reserve(grid.size());
  for (double g : grid) {
    WEvaluation w = value_function_W(cfg, problem, g, at.u);
    out.push_back({g, w.value});
  }
  return out;
}

}  // namespace gnep
