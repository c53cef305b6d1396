#include "gnep/kkt_newton.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#ifdef GNEP_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#else
#include <Eigen/SparseLU>
#endif

namespace gnep {

struct KktSystem::Factorization {
#ifdef GNEP_HAVE_UMFPACK
  Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu;
#else
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
#endif
  bool analyzed = false;
  bool ready = false;
};

KktSystem::KktSystem(const StateProblem& problem, const GameConfig& cfg, double gamma,
                     KktMode mode, std::vector<std::vector<int>> adjoint_players,
                     Eigen::VectorXd frozen_load)
    : problem_(&problem),
      cfg_(&cfg),
      gamma_(gamma),
      mode_(mode),
      adjoint_players_(std::move(adjoint_players)),
      frozen_load_(std::move(frozen_load)),
      obstacles_(make_obstacles(cfg, *problem.mesh)) {
  cfg.validate();
  if (problem.num_players != cfg.num_players) {
    throw UsageError("game config and state problem disagree on the number of players");
  }
  if (problem.kind != cfg.kind) {
    throw UsageError("game config and state problem disagree on the problem kind");
  }
  if (!std::isfinite(gamma_) || gamma_ < 0.0) {
    throw UsageError("gamma must be finite and nonnegative");
  }
  const auto n = static_cast<Eigen::Index>(problem.num_vertices());
  if (frozen_load_.size() == 0) {
    frozen_load_ = Eigen::VectorXd::Zero(n);
  }
  if (frozen_load_.size() != n) {
    throw UsageError("frozen load must live on the mesh vertices");
  }
  build_pattern();
  fact_ = std::make_shared<Factorization>();
}

KktSystem KktSystem::full_game(const StateProblem& problem, const GameConfig& cfg, double gamma) {
  std::vector<std::vector<int>> adj;
  if (cfg.mode == GameMode::gnep) {
    for (int i = 0; i < cfg.num_players; ++i) {
      adj.push_back({i});
    }
  } else {
    std::vector<int> all(static_cast<std::size_t>(cfg.num_players));
    for (int i = 0; i < cfg.num_players; ++i) {
      all[static_cast<std::size_t>(i)] = i;
    }
    adj.push_back(std::move(all));
  }
  KktMode mode = cfg.mode == GameMode::gnep ? KktMode::gnep : KktMode::coop;
  return KktSystem(problem, cfg, gamma, mode, std::move(adj), Eigen::VectorXd());
}

KktSystem KktSystem::best_response(const StateProblem& problem, const GameConfig& cfg,
                                   double gamma, int player,
                                   const std::vector<Eigen::VectorXd>& u_bar) {
  if (player < 0 || player >= cfg.num_players) {
    throw UsageError("best response player index out of range");
  }
  if (static_cast<int>(u_bar.size()) != cfg.num_players) {
    throw UsageError("best response needs one frozen control per player");
  }
  Eigen::VectorXd frozen = Eigen::VectorXd::Zero(problem.num_vertices());
  for (int j = 0; j < cfg.num_players; ++j) {
    if (j == player) {
      continue;
    }
    frozen += apply_B(problem, j, u_bar[static_cast<std::size_t>(j)]);
  }
  std::vector<std::vector<int>> adj = {{player}};
  return KktSystem(problem, cfg, gamma, KktMode::best_response, std::move(adj),
                   std::move(frozen));
}

int KktSystem::dim() const {
  return (1 + num_adjoints()) * problem_->num_vertices();
}

void KktSystem::set_gamma(double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0) {
    throw UsageError("gamma must be finite and nonnegative");
  }
  gamma_ = gamma;  // sparsity pattern and symbolic factorization stay valid
}

int KktSystem::slot(int row, int col) const {
  const int* outer = jac_.outerIndexPtr();
  const int* inner = jac_.innerIndexPtr();
  const int* begin = inner + outer[col];
  const int* end = inner + outer[col + 1];
  const int* it = std::lower_bound(begin, end, row);
  if (it == end || *it != row) {
    throw SolverError("internal error: Jacobian slot missing from the fixed pattern");
  }
  return static_cast<int>(it - inner);
}

void KktSystem::build_pattern() {
  const StateProblem& pb = *problem_;
  const int nv = pb.num_vertices();
  const int m = num_adjoints();
  std::vector<char> dir(static_cast<std::size_t>(nv), 0);
  for (int d : pb.dirichlet) {
    dir[static_cast<std::size_t>(d)] = 1;
  }
  auto off = [nv](int block) { return block * nv; };

  std::vector<Eigen::Triplet<double>> trips;
  const Eigen::SparseMatrix<double>& base = pb.base.matrix;
  for (int c = 0; c < nv; ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(base, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      if (dir[static_cast<std::size_t>(r)]) {
        continue;
      }
      trips.emplace_back(r, c, 1.0);
      for (int j = 0; j < m; ++j) {
        trips.emplace_back(off(1 + j) + r, off(1 + j) + c, 1.0);
      }
    }
  }
  for (int d : pb.dirichlet) {
    for (int b = 0; b <= m; ++b) {
      trips.emplace_back(off(b) + d, off(b) + d, 1.0);
    }
  }
  for (int j = 0; j < m; ++j) {
    for (int i : adjoint_players_[static_cast<std::size_t>(j)]) {
      for (int v : pb.control_dofs[i]) {
        if (!dir[static_cast<std::size_t>(v)]) {
          trips.emplace_back(v, off(1 + j) + v, 1.0);
        }
      }
      const Eigen::SparseMatrix<double>& tm = pb.tracking_mass[static_cast<std::size_t>(i)].matrix;
      for (int c = 0; c < nv; ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(tm, c); it; ++it) {
          const int r = static_cast<int>(it.row());
          if (!dir[static_cast<std::size_t>(r)]) {
            trips.emplace_back(off(1 + j) + r, c, 1.0);
          }
        }
      }
    }
    for (int v = 0; v < nv; ++v) {
      if (!dir[static_cast<std::size_t>(v)]) {
        trips.emplace_back(off(1 + j) + v, v, 1.0);
      }
    }
  }

  jac_.resize(dim(), dim());
  jac_.setFromTriplets(trips.begin(), trips.end());
  jac_.makeCompressed();

  const_entries_.clear();
  cubic_entries_.clear();
  coupling_entries_.clear();
  adjoint_diag_entries_.clear();

  for (int c = 0; c < nv; ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(base, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      if (dir[static_cast<std::size_t>(r)]) {
        continue;
      }
      const_entries_.push_back({slot(r, c), it.value()});
      for (int j = 0; j < m; ++j) {
        const_entries_.push_back({slot(off(1 + j) + r, off(1 + j) + c), it.value()});
      }
    }
  }
  for (int d : pb.dirichlet) {
    for (int b = 0; b <= m; ++b) {
      const_entries_.push_back({slot(off(b) + d, off(b) + d), 1.0});
    }
  }
  for (int v = 0; v < nv; ++v) {
    if (dir[static_cast<std::size_t>(v)]) {
      continue;
    }
    cubic_entries_.push_back({slot(v, v), v});
    for (int j = 0; j < m; ++j) {
      cubic_entries_.push_back({slot(off(1 + j) + v, off(1 + j) + v), v});
    }
  }
  for (int j = 0; j < m; ++j) {
    for (int i : adjoint_players_[static_cast<std::size_t>(j)]) {
      const Eigen::VectorXd& w = pb.control_weight[static_cast<std::size_t>(i)];
      for (int v : pb.control_dofs[static_cast<std::size_t>(i)]) {
        if (!dir[static_cast<std::size_t>(v)]) {
          coupling_entries_.push_back({slot(v, off(1 + j) + v), v, j, w[v]});
        }
      }
      const Eigen::SparseMatrix<double>& tm = pb.tracking_mass[static_cast<std::size_t>(i)].matrix;
      for (int c = 0; c < nv; ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(tm, c); it; ++it) {
          const int r = static_cast<int>(it.row());
          if (!dir[static_cast<std::size_t>(r)]) {
            const_entries_.push_back({slot(off(1 + j) + r, c), -it.value()});
          }
        }
      }
    }
    for (int v = 0; v < nv; ++v) {
      if (!dir[static_cast<std::size_t>(v)]) {
        adjoint_diag_entries_.push_back({slot(off(1 + j) + v, v), v, j});
      }
    }
  }
}

Eigen::VectorXd KktSystem::state_part(const Eigen::VectorXd& z) const {
  return z.head(problem_->num_vertices());
}

Eigen::VectorXd KktSystem::adjoint_part(const Eigen::VectorXd& z, int j) const {
  if (j < 0 || j >= num_adjoints()) {
    throw UsageError("adjoint block index out of range");
  }
  const int nv = problem_->num_vertices();
  return z.segment((1 + j) * nv, nv);
}

Eigen::VectorXd KktSystem::residual(const Eigen::VectorXd& z) const {
  if (z.size() != dim()) {
    throw UsageError("stacked vector has the wrong dimension");
  }
  const StateProblem& pb = *problem_;
  const int nv = pb.num_vertices();
  const int m = num_adjoints();
  const Eigen::VectorXd& cw = pb.cubic_weight();
  const Eigen::VectorXd y = z.head(nv);

  Eigen::VectorXd r(dim());
  r.head(nv) = pb.base.matrix * y + cw.cwiseProduct(y.array().cube().matrix()) - frozen_load_;
  Eigen::VectorXd bg = beta_grad_weighted(pb.vol_lumped, y, obstacles_);
  for (int j = 0; j < m; ++j) {
    const auto pj = z.segment((1 + j) * nv, nv);
    auto rj = r.segment((1 + j) * nv, nv);
    rj = pb.base.matrix * pj - gamma_ * bg;
    rj.array() += 3.0 * cw.array() * y.array().square() * pj.array();
    for (int i : adjoint_players_[static_cast<std::size_t>(j)]) {
      const Eigen::VectorXd& w = pb.control_weight[static_cast<std::size_t>(i)];
      for (int v : pb.control_dofs[static_cast<std::size_t>(i)]) {
        const double u = clamp(-pj[v] / cfg_->alpha, cfg_->a, cfg_->b);
        r[v] -= w[v] * u;
      }
      rj -= pb.tracking_mass[static_cast<std::size_t>(i)].matrix * y;
      rj += cfg_->yd[static_cast<std::size_t>(i)] *
            pb.tracking_row_sum[static_cast<std::size_t>(i)];
    }
  }
  for (int d : pb.dirichlet) {
    r[d] = y[d];
    for (int j = 0; j < m; ++j) {
      r[(1 + j) * nv + d] = z[(1 + j) * nv + d];
    }
  }
  return r;
}

void KktSystem::refresh_jacobian(const Eigen::VectorXd& z) {
  if (z.size() != dim()) {
    throw UsageError("stacked vector has the wrong dimension");
  }
  const StateProblem& pb = *problem_;
  const int nv = pb.num_vertices();
  const Eigen::VectorXd& cw = pb.cubic_weight();
  const Eigen::VectorXd& lm = pb.vol_lumped;
  const Eigen::VectorXd y = z.head(nv);

  double* val = jac_.valuePtr();
  std::fill(val, val + jac_.nonZeros(), 0.0);
  for (const ConstEntry& e : const_entries_) {
    val[e.slot] += e.value;
  }
  for (const CubicEntry& e : cubic_entries_) {
    val[e.slot] += 3.0 * cw[e.vertex] * y[e.vertex] * y[e.vertex];
  }
  for (const CouplingEntry& e : coupling_entries_) {
    const double p = z[(1 + e.adjoint) * nv + e.vertex];
    const double q = -p / cfg_->alpha;
    if (q > cfg_->a && q < cfg_->b) {
      val[e.slot] += e.weight / cfg_->alpha;
    }
  }
  for (const AdjointDiagEntry& e : adjoint_diag_entries_) {
    const double p = z[(1 + e.adjoint) * nv + e.vertex];
    double value = 6.0 * cw[e.vertex] * y[e.vertex] * p;
    const bool active =
        y[e.vertex] > obstacles_.upper[e.vertex] || y[e.vertex] < obstacles_.lower[e.vertex];
    if (active) {
      value -= gamma_ * lm[e.vertex];
    }
    val[e.slot] += value;
  }
  fact_->ready = false;
}

void KktSystem::factorize() {
  if (!fact_->analyzed) {
    fact_->lu.analyzePattern(jac_);
    fact_->analyzed = true;
  }
  fact_->lu.factorize(jac_);
  if (fact_->lu.info() != Eigen::Success) {
    throw SolverError("KKT Jacobian factorization failed");
  }
  fact_->ready = true;
}

Eigen::VectorXd KktSystem::solve(const Eigen::VectorXd& rhs) const {
  if (!fact_->ready) {
    throw SolverError("factorize() must be called before solve()");
  }
  if (rhs.size() != dim()) {
    throw UsageError("right-hand side has the wrong dimension");
  }
  Eigen::VectorXd x = fact_->lu.solve(rhs);
  if (fact_->lu.info() != Eigen::Success) {
    throw SolverError("KKT Jacobian triangular solve failed");
  }
  return x;
}

std::vector<Eigen::VectorXd> KktSystem::recover_controls(const Eigen::VectorXd& z) const {
  if (z.size() != dim()) {
    throw UsageError("stacked vector has the wrong dimension");
  }
  const StateProblem& pb = *problem_;
  const int nv = pb.num_vertices();
  std::vector<Eigen::VectorXd> out;
  for (int j = 0; j < num_adjoints(); ++j) {
    for (int i : adjoint_players_[static_cast<std::size_t>(j)]) {
      const auto& dofs = pb.control_dofs[static_cast<std::size_t>(i)];
      Eigen::VectorXd u(static_cast<Eigen::Index>(dofs.size()));
      for (std::size_t k = 0; k < dofs.size(); ++k) {
        const double p = z[(1 + j) * nv + dofs[k]];
        u[static_cast<Eigen::Index>(k)] = clamp(-p / cfg_->alpha, cfg_->a, cfg_->b);
      }
      out.push_back(std::move(u));
    }
  }
  if (mode_ != KktMode::best_response) {
    // reorder by player index (gnep order already matches; coop lists players
    // in ascending order within the single adjoint, which also matches)
    if (static_cast<int>(out.size()) != cfg_->num_players) {
      throw SolverError("internal error: control recovery lost a player");
    }
  }
  return out;
}

EquilibriumState KktSystem::extract_state(const Eigen::VectorXd& z) const {
  if (mode_ == KktMode::best_response) {
    throw UsageError("extract_state applies to full-game systems only");
  }
  const StateProblem& pb = *problem_;
  const int nv = pb.num_vertices();
  EquilibriumState st;
  st.gamma = gamma_;
  st.y = z.head(nv);
  for (int j = 0; j < num_adjoints(); ++j) {
    st.p.push_back(z.segment((1 + j) * nv, nv));
  }
  st.u = recover_controls(z);
  st.mu = gamma_ * beta_grad_weighted(pb.vol_lumped, st.y, obstacles_);
  for (int i = 0; i < cfg_->num_players; ++i) {
    const Eigen::VectorXd& p = st.p.size() == 1 ? st.p[0] : st.p[static_cast<std::size_t>(i)];
    const auto& dofs = pb.control_dofs[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& w = pb.control_weight[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& u = st.u[static_cast<std::size_t>(i)];
    Eigen::VectorXd lam(static_cast<Eigen::Index>(dofs.size()));
    for (std::size_t k = 0; k < dofs.size(); ++k) {
      lam[static_cast<Eigen::Index>(k)] =
          -w[dofs[k]] * (cfg_->alpha * u[static_cast<Eigen::Index>(k)] + p[dofs[k]]);
    }
    st.lambda.push_back(std::move(lam));
  }
  return st;
}

NewtonSettings escalate_damping(const NewtonReport& failed_attempt) {
  const double next = failed_attempt.damping_used / 2.0;
  if (next < kDampingFloor) {
    std::ostringstream msg;
    msg << "Newton damping ladder exhausted (damping " << failed_attempt.damping_used
        << ", residual " << failed_attempt.final_absolute << " after "
        << failed_attempt.iterations << " iterations)";
    throw SolverError(msg.str());
  }
  NewtonSettings settings;
  settings.damping = next;
  settings.max_iter = failed_attempt.max_iter_cap * 2;
  return settings;
}

std::pair<Eigen::VectorXd, NewtonReport> semismooth_newton(KktSystem& sys,
                                                           const Eigen::VectorXd& z0,
                                                           NewtonSettings& settings) {
  if (z0.size() != sys.dim()) {
    throw UsageError("starting point has the wrong dimension");
  }
  NewtonSettings current = settings;
  int escalations = 0;
  Eigen::VectorXd z;
  NewtonReport report;
  while (true) {
    z = z0;
    report = NewtonReport{};
    report.damping_used = current.damping;
    report.max_iter_cap = current.max_iter;
    report.escalations = escalations;

    Eigen::VectorXd r = sys.residual(z);
    double r0 = r.norm();
    double rnorm = r0;
    report.residual_history.push_back(r0);
    int it = 0;
    bool ok = rnorm <= kNewtonAbsTol && rnorm / std::max(r0, 1.0) <= kNewtonRelTol;
    if (!ok) {
      try {
        while (it < current.max_iter) {
          sys.refresh_jacobian(z);
          sys.factorize();
          Eigen::VectorXd delta = sys.solve(-r);
          z += current.damping * delta;
          r = sys.residual(z);
          rnorm = r.norm();
          ++it;
          report.residual_history.push_back(rnorm);
          if (!std::isfinite(rnorm)) {
            break;
          }
          if (rnorm <= kNewtonAbsTol && rnorm / std::max(r0, 1.0) <= kNewtonRelTol) {
            ok = true;
            break;
          }
        }
      } catch (const SolverError&) {
        ok = false;  // singular Jacobian on this rung: escalate like divergence
      }
    }
    report.iterations = it;
    report.final_absolute = rnorm;
    report.final_relative = rnorm / std::max(r0, 1.0);
    report.converged = ok;
    if (ok) {
      settings = current;  // successful settings persist for subsequent calls
      return {z, report};
    }
    try {
      current = escalate_damping(report);
    } catch (const SolverError&) {
      return {z, report};  // ladder exhausted: failure report, caller decides
    }
    ++escalations;
  }
}

ToyEquilibrium solve_toy_game(const ToyQuadraticGame& game) {
  const double a = game.alpha + 1.0;
  const double det = a * a - 1.0;
  if (std::abs(det) <= 1e-12 * std::max(1.0, a * a)) {
    throw SolverError("toy game stationarity system is singular");
  }
  ToyEquilibrium eq;
  eq.u1 = (a * game.d1 - game.d2) / det;
  eq.u2 = (a * game.d2 - game.d1) / det;
  eq.y = eq.u1 + eq.u2;
  return eq;
}

double toy_objective(const ToyQuadraticGame& game, int i, double u1, double u2) {
  if (i != 0 && i != 1) {
    throw UsageError("toy game has players 0 and 1");
  }
  const double y = u1 + u2;
  const double d = i == 0 ? game.d1 : game.d2;
  const double u = i == 0 ? u1 : u2;
  return 0.5 * (y - d) * (y - d) + 0.5 * game.alpha * u * u;
}

}  // namespace gnep
