#include "gnep/mesh_fem.hpp"

#include <cmath>
#include <sstream>

#ifdef GNEP_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif
#ifdef GNEP_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace gnep {

namespace {

// Quadrants are numbered counterclockwise: 1 lower-left, 2 lower-right,
// 3 upper-right, 4 upper-left. The lowest adjacent index wins on the
// interface lines x = 1/2, y = 1/2.
int quadrant_of(double x, double y) {
  const double eps = 1e-12;
  const bool left = x <= 0.5 + eps;
  const bool right = x >= 0.5 - eps;
  const bool bottom = y <= 0.5 + eps;
  const bool top = y >= 0.5 - eps;
  int best = 5;
  if (left && bottom) best = std::min(best, 1);
  if (right && bottom) best = std::min(best, 2);
  if (right && top) best = std::min(best, 3);
  if (left && top) best = std::min(best, 4);
  return best;
}

// Gamma_i = boundary of Omega intersected with the closure of omega_i: an
// L-shaped piece of length 1 wrapping corner i. Side midpoints are tied to
// the lowest adjacent segment index.
int boundary_segment_of(double x, double y) {
  const double eps = 1e-12;
  int seg = 5;
  if (y < eps) {  // bottom side: Gamma_1 left half, Gamma_2 right half
    if (x <= 0.5 + eps) seg = std::min(seg, 1);
    if (x >= 0.5 - eps) seg = std::min(seg, 2);
  }
  if (x > 1.0 - eps) {  // right side: Gamma_2 lower half, Gamma_3 upper half
    if (y <= 0.5 + eps) seg = std::min(seg, 2);
    if (y >= 0.5 - eps) seg = std::min(seg, 3);
  }
  if (y > 1.0 - eps) {  // top side: Gamma_3 right half, Gamma_4 left half
    if (x >= 0.5 - eps) seg = std::min(seg, 3);
    if (x <= 0.5 + eps) seg = std::min(seg, 4);
  }
  if (x < eps) {  // left side: Gamma_4 upper half, Gamma_1 lower half
    if (y >= 0.5 - eps) seg = std::min(seg, 4);
    if (y <= 0.5 + eps) seg = std::min(seg, 1);
  }
  return seg == 5 ? 0 : seg;
}

}  // namespace

double Mesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  const Eigen::Vector2d& a = vertices[tri[0]];
  const Eigen::Vector2d& b = vertices[tri[1]];
  const Eigen::Vector2d& c = vertices[tri[2]];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

Mesh build_crossed_mesh(int n) {
  if (n < 1) throw UsageError("build_crossed_mesh: n must be >= 1");

  Mesh mesh;
  mesh.n_segments = n;
  const double h = 1.0 / n;
  const int grid = (n + 1) * (n + 1);

  mesh.vertices.reserve(grid + n * n);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) mesh.vertices.emplace_back(i * h, j * h);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      mesh.vertices.emplace_back((i + 0.5) * h, (j + 0.5) * h);

  auto gid = [n](int i, int j) { return j * (n + 1) + i; };
  auto cid = [n, grid](int i, int j) { return grid + j * n + i; };

  mesh.triangles.reserve(4 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int sw = gid(i, j), se = gid(i + 1, j);
      const int nw = gid(i, j + 1), ne = gid(i + 1, j + 1);
      const int c = cid(i, j);
      mesh.triangles.push_back({sw, se, c});  // south
      mesh.triangles.push_back({se, ne, c});  // east
      mesh.triangles.push_back({ne, nw, c});  // north
      mesh.triangles.push_back({nw, sw, c});  // west
    }
  }

  const int nv = mesh.num_vertices();
  mesh.is_boundary.assign(nv, false);
  mesh.vertex_subdomain.resize(nv);
  mesh.boundary_segment.assign(nv, 0);
  const double eps = 1e-12;
  for (int v = 0; v < nv; ++v) {
    const double x = mesh.vertices[v].x(), y = mesh.vertices[v].y();
    mesh.vertex_subdomain[v] = quadrant_of(x, y);
    if (x < eps || x > 1.0 - eps || y < eps || y > 1.0 - eps) {
      mesh.is_boundary[v] = true;
      mesh.boundary_vertices.push_back(v);
      mesh.boundary_segment[v] = boundary_segment_of(x, y);
    }
  }

  mesh.triangle_subdomain.resize(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    Eigen::Vector2d c = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
    mesh.triangle_subdomain[t] = quadrant_of(c.x(), c.y());
  }

  // Boundary edges counterclockwise starting at the origin; the open edge
  // never straddles a side midpoint for even n, so its segment id is decided
  // by the midpoint.
  auto push_edge = [&](int a, int b) {
    Eigen::Vector2d m = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
    mesh.boundary_edges.push_back({a, b, boundary_segment_of(m.x(), m.y())});
  };
  for (int i = 0; i < n; ++i) push_edge(gid(i, 0), gid(i + 1, 0));      // bottom
  for (int j = 0; j < n; ++j) push_edge(gid(n, j), gid(n, j + 1));      // right
  for (int i = n; i > 0; --i) push_edge(gid(i, n), gid(i - 1, n));      // top
  for (int j = n; j > 0; --j) push_edge(gid(0, j), gid(0, j - 1));      // left

  return mesh;
}

void FeFunction::validate() const {
  if (mesh == nullptr) throw UsageError("FeFunction: missing mesh");
  if (coefficients.size() != mesh->num_vertices())
    throw UsageError("FeFunction: coefficient vector length != vertex count");
  if (space_tag == SpaceTag::zero_trace) {
    for (int v : mesh->boundary_vertices)
      if (coefficients[v] != 0.0)
        throw UsageError("FeFunction: zero_trace function with nonzero boundary coefficient");
  }
}

SparseOperator assemble_stiffness(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector2d& a = mesh.vertices[tri[0]];
    const Eigen::Vector2d& b = mesh.vertices[tri[1]];
    const Eigen::Vector2d& c = mesh.vertices[tri[2]];
    const double area = mesh.triangle_area(t);
    // Constant P1 gradients: grad phi_k = perp(opposite edge) / (2 |T|).
    Eigen::Matrix<double, 3, 2> g;
    g.row(0) = Eigen::Vector2d(b.y() - c.y(), c.x() - b.x()) / (2.0 * area);
    g.row(1) = Eigen::Vector2d(c.y() - a.y(), a.x() - c.x()) / (2.0 * area);
    g.row(2) = Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) / (2.0 * area);
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s)
        trips.emplace_back(tri[r], tri[s], area * g.row(r).dot(g.row(s)));
  }
  SparseOperator op;
  op.matrix.resize(mesh.num_vertices(), mesh.num_vertices());
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  op.symmetric = true;
  return op;
}

SparseOperator assemble_mass(const Mesh& mesh, int subdomain) {
  if (subdomain < 0 || subdomain > 4)
    throw UsageError("assemble_mass: unknown subdomain id");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (subdomain != 0 && mesh.triangle_subdomain[t] != subdomain) continue;
    const auto& tri = mesh.triangles[t];
    const double w = mesh.triangle_area(t) / 12.0;
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s)
        trips.emplace_back(tri[r], tri[s], r == s ? 2.0 * w : w);
  }
  SparseOperator op;
  op.matrix.resize(mesh.num_vertices(), mesh.num_vertices());
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  op.symmetric = true;
  return op;
}

SparseOperator assemble_boundary_mass(const Mesh& mesh, int segment) {
  if (segment < 0 || segment > 4)
    throw UsageError("assemble_boundary_mass: unknown segment id");
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& e : mesh.boundary_edges) {
    if (segment != 0 && e.segment != segment) continue;
    const double len = (mesh.vertices[e.a] - mesh.vertices[e.b]).norm();
    trips.emplace_back(e.a, e.a, len / 3.0);
    trips.emplace_back(e.b, e.b, len / 3.0);
    trips.emplace_back(e.a, e.b, len / 6.0);
    trips.emplace_back(e.b, e.a, len / 6.0);
  }
  SparseOperator op;
  op.matrix.resize(mesh.num_vertices(), mesh.num_vertices());
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  op.symmetric = true;
  return op;
}

Eigen::VectorXd lumped_mass(const Mesh& mesh, int subdomain) {
  if (subdomain < 0 || subdomain > 4)
    throw UsageError("lumped_mass: unknown subdomain id");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (subdomain != 0 && mesh.triangle_subdomain[t] != subdomain) continue;
    const double w = mesh.triangle_area(t) / 3.0;
    for (int k : mesh.triangles[t]) m[k] += w;
  }
  return m;
}

Eigen::VectorXd lumped_boundary_mass(const Mesh& mesh, int segment) {
  if (segment < 0 || segment > 4)
    throw UsageError("lumped_boundary_mass: unknown segment id");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (const auto& e : mesh.boundary_edges) {
    if (segment != 0 && e.segment != segment) continue;
    const double len = (mesh.vertices[e.a] - mesh.vertices[e.b]).norm();
    m[e.a] += 0.5 * len;
    m[e.b] += 0.5 * len;
  }
  return m;
}

namespace {

// Zero the constrained rows and columns and put 1 on their diagonal. Keeps
// symmetric inputs symmetric so the SPD path stays available.
Eigen::SparseMatrix<double> eliminate_constraints(const Eigen::SparseMatrix<double>& A,
                                                  const std::vector<bool>& constrained) {
  Eigen::SparseMatrix<double> B(A.rows(), A.cols());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(A.nonZeros()) + constrained.size());
  for (int k = 0; k < A.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
      if (constrained[it.row()] || constrained[it.col()]) continue;
      trips.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int i = 0; i < A.rows(); ++i)
    if (constrained[i]) trips.emplace_back(i, i, 1.0);
  B.setFromTriplets(trips.begin(), trips.end());
  return B;
}

}  // namespace

Eigen::VectorXd solve_sparse(const SparseOperator& A, const Eigen::VectorXd& b,
                             const std::vector<int>& constrained_vertices) {
  if (A.rows() != A.cols()) throw UsageError("solve_sparse: operator not square");
  if (b.size() != A.rows()) throw UsageError("solve_sparse: right-hand side size mismatch");

  std::vector<bool> constrained(A.rows(), false);
  for (int v : constrained_vertices) {
    if (v < 0 || v >= A.rows()) throw UsageError("solve_sparse: constrained index out of range");
    constrained[v] = true;
  }

  Eigen::SparseMatrix<double> sys =
      constrained_vertices.empty() ? A.matrix : eliminate_constraints(A.matrix, constrained);
  sys.makeCompressed();
  Eigen::VectorXd rhs = b;
  for (int v : constrained_vertices) rhs[v] = 0.0;

  Eigen::VectorXd x;
  bool solved = false;
  if (A.symmetric) {
    // Cholesky first; indefinite or rank-deficient symmetric systems fall
    // through to the general factorization before any failure is reported.
#ifdef GNEP_HAVE_CHOLMOD
    Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> solver;
#else
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
#endif
    solver.compute(sys);
    if (solver.info() == Eigen::Success) {
      x = solver.solve(rhs);
      solved = solver.info() == Eigen::Success;
    }
  }
  if (!solved) {
#ifdef GNEP_HAVE_UMFPACK
    Eigen::UmfPackLU<Eigen::SparseMatrix<double>> solver;
#else
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
#endif
    solver.compute(sys);
    if (solver.info() != Eigen::Success)
      throw SolverError("solve_sparse: singular system (factorization failed, dimension " +
                        std::to_string(sys.rows()) + ")");
    x = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
      throw SolverError("solve_sparse: backsubstitution failed");
  }

  for (int v : constrained_vertices) x[v] = 0.0;
  const double resid = (sys * x - rhs).norm();
  const double bound = 1e-12 * std::max(1.0, b.norm());
  if (!(resid <= bound)) {
    std::ostringstream msg;
    msg << "solve_sparse: residual contract missed (residual " << resid << " > bound " << bound
        << ", dimension " << sys.rows() << ")";
    throw SolverError(msg.str());
  }
  return x;
}

}  // namespace gnep
