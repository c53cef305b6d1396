#include "gnep/semilinear_state.hpp"

#include <cmath>
#include <sstream>

namespace gnep {

StateProblem build_state_problem(const Mesh& mesh, ProblemKind kind, int num_players) {
  if (num_players != 1 && num_players != 4)
    throw UsageError("build_state_problem: num_players must be 1 or 4");
  if (num_players == 4 && mesh.n_segments % 2 != 0)
    throw UsageError("build_state_problem: quadrant partition requires even n");

  StateProblem p;
  p.kind = kind;
  p.mesh = &mesh;
  p.num_players = num_players;
  p.stiffness = assemble_stiffness(mesh);
  p.mass = assemble_mass(mesh);
  p.vol_lumped = lumped_mass(mesh);
  p.bnd_lumped = lumped_boundary_mass(mesh);

  p.base = p.stiffness;
  if (kind == ProblemKind::boundary) p.base.matrix += p.mass.matrix;

  for (int i = 0; i < num_players; ++i) {
    const int region = num_players == 1 ? 0 : i + 1;
    p.tracking_mass.push_back(assemble_mass(mesh, region));
    p.tracking_row_sum.push_back(p.tracking_mass.back().matrix *
                                 Eigen::VectorXd::Ones(mesh.num_vertices()));
    Eigen::VectorXd w = kind == ProblemKind::distributed ? lumped_mass(mesh, region)
                                                        : lumped_boundary_mass(mesh, region);
    std::vector<int> dofs;
    for (int v = 0; v < mesh.num_vertices(); ++v)
      if (w[v] > 0.0) dofs.push_back(v);
    p.control_weight.push_back(std::move(w));
    p.control_dofs.push_back(std::move(dofs));
  }

  if (kind == ProblemKind::distributed) p.dirichlet = mesh.boundary_vertices;
  return p;
}

Eigen::VectorXd apply_B(const StateProblem& problem, int i, const Eigen::VectorXd& u_i) {
  if (i < 0 || i >= problem.num_players) throw UsageError("apply_B: player index out of range");
  const auto& dofs = problem.control_dofs[i];
  if (u_i.size() != static_cast<Eigen::Index>(dofs.size())) {
    std::ostringstream msg;
    msg << "apply_B: control vector for player " << i + 1 << " has length " << u_i.size()
        << ", expected " << dofs.size();
    throw UsageError(msg.str());
  }
  Eigen::VectorXd load = Eigen::VectorXd::Zero(problem.num_vertices());
  const Eigen::VectorXd& w = problem.control_weight[i];
  for (size_t k = 0; k < dofs.size(); ++k) load[dofs[k]] = w[dofs[k]] * u_i[k];
  return load;
}

Eigen::VectorXd gather_dofs(const StateProblem& problem, int i, const Eigen::VectorXd& full) {
  if (i < 0 || i >= problem.num_players) throw UsageError("gather_dofs: player index out of range");
  if (full.size() != problem.num_vertices())
    throw UsageError("gather_dofs: full vector has wrong length");
  const auto& dofs = problem.control_dofs[i];
  Eigen::VectorXd out(dofs.size());
  for (size_t k = 0; k < dofs.size(); ++k) out[k] = full[dofs[k]];
  return out;
}

namespace {

Eigen::VectorXd state_residual(const StateProblem& p, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& load) {
  const Eigen::VectorXd& cw = p.cubic_weight();
  Eigen::VectorXd r = p.base.matrix * y + cw.cwiseProduct(y.array().cube().matrix()) - load;
  for (int v : p.dirichlet) r[v] = y[v];
  return r;
}

}  // namespace

std::pair<FeFunction, NewtonReport> solve_state(const StateProblem& problem,
                                                const std::vector<Eigen::VectorXd>& u,
                                                const Eigen::VectorXd& y0,
                                                const Eigen::VectorXd& extra_load) {
  if (static_cast<int>(u.size()) != problem.num_players)
    throw UsageError("solve_state: expected one control vector per player");
  const int nv = problem.num_vertices();

  Eigen::VectorXd load = Eigen::VectorXd::Zero(nv);
  for (int i = 0; i < problem.num_players; ++i) load += apply_B(problem, i, u[i]);
  if (extra_load.size() != 0) {
    if (extra_load.size() != nv) throw UsageError("solve_state: extra_load has wrong length");
    load += extra_load;
  }

  Eigen::VectorXd start = y0.size() == 0 ? Eigen::VectorXd::Zero(nv) : y0;
  if (start.size() != nv) throw UsageError("solve_state: initial guess has wrong length");
  for (int v : problem.dirichlet) start[v] = 0.0;

  const double tol = 1e-12 * std::max(1.0, load.norm());
  NewtonSettings settings;
  NewtonReport report;
  int escalations = 0;
  while (true) {
    Eigen::VectorXd y = start;
    Eigen::VectorXd r = state_residual(problem, y, load);
    report = NewtonReport{};
    report.escalations = escalations;
    report.damping_used = settings.damping;
    report.max_iter_cap = settings.max_iter;
    report.residual_history = {r.norm()};
    const double r0 = std::max(r.norm(), 1.0);
    for (int it = 0; it <= settings.max_iter; ++it) {
      const double rn = r.norm();
      if (rn <= tol) {
        report.converged = true;
        report.iterations = it;
        report.final_absolute = rn;
        report.final_relative = rn / r0;
        FeFunction fy{problem.mesh, y, problem.state_tag()};
        return {fy, report};
      }
      if (it == settings.max_iter) break;
      SparseOperator J = linearized_operator(problem, y);
      Eigen::VectorXd rhsn = -r;
      for (int v : problem.dirichlet) rhsn[v] = 0.0;
      Eigen::VectorXd delta = solve_sparse(J, rhsn, problem.dirichlet);
      y += settings.damping * delta;
      for (int v : problem.dirichlet) y[v] = 0.0;
      r = state_residual(problem, y, load);
      report.residual_history.push_back(r.norm());
    }
    ++escalations;
    settings = escalate_damping(report);  // throws at the ladder floor
  }
}

SparseOperator linearized_operator(const StateProblem& problem, const Eigen::VectorXd& y) {
  if (y.size() != problem.num_vertices())
    throw UsageError("linearized_operator: state vector has wrong length");
  SparseOperator op = problem.base;
  const Eigen::VectorXd& cw = problem.cubic_weight();
  Eigen::VectorXd diag = 3.0 * cw.cwiseProduct(y.cwiseProduct(y));
  Eigen::SparseMatrix<double> D(problem.num_vertices(), problem.num_vertices());
  std::vector<Eigen::Triplet<double>> trips;
  for (int v = 0; v < problem.num_vertices(); ++v)
    if (diag[v] != 0.0) trips.emplace_back(v, v, diag[v]);
  D.setFromTriplets(trips.begin(), trips.end());
  op.matrix += D;
  op.symmetric = true;
  return op;
}

FeFunction solve_adjoint(const StateProblem& problem, const FeFunction& y,
                         const Eigen::VectorXd& rhs) {
  y.validate();
  if (rhs.size() != problem.num_vertices())
    throw UsageError("solve_adjoint: right-hand side has wrong length");
  SparseOperator A = linearized_operator(problem, y.coefficients);
  Eigen::VectorXd p = solve_sparse(A, rhs, problem.dirichlet);
  return FeFunction{problem.mesh, p, problem.state_tag()};
}

}  // namespace gnep
