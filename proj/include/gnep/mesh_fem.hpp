#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <vector>

#include "gnep/common.hpp"

namespace gnep {

// Crossed triangulation of the unit square: n x n cells, each split into four
// triangles by both diagonals meeting in a cell-center node. Vertex order is
// fixed by construction (grid nodes row-major, then cell centers row-major) so
// that all downstream artifacts are deterministic.
struct Mesh {
  struct BoundaryEdge {
    int a, b;     // vertex indices, oriented counterclockwise along the boundary
    int segment;  // 1..4, the Gamma_i owning the (open) edge
  };

  int n_segments = 0;
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<int> boundary_vertices;         // ascending indices
  std::vector<bool> is_boundary;
  // Quadrant id in {1,2,3,4} per vertex / per triangle, numbered
  // counterclockwise (1 lower-left, 2 lower-right, 3 upper-right,
  // 4 upper-left). Interface vertices are
  // assigned to the lowest-index adjacent quadrant; triangles lie wholly inside
  // one quadrant for even n and are classified by centroid.
  std::vector<int> vertex_subdomain;
  std::vector<int> triangle_subdomain;
  // 0 for interior vertices, otherwise the Gamma_i id in {1,2,3,4} with
  // corner/midpoint ties resolved to the lowest adjacent index.
  std::vector<int> boundary_segment;
  std::vector<BoundaryEdge> boundary_edges;  // counterclockwise, starting at (0,0)

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  double triangle_area(int t) const;
};

Mesh build_crossed_mesh(int n);

// Nodal P1 coefficient vector over a mesh. zero_trace functions vanish on the
// boundary vertex set.
enum class SpaceTag { full, zero_trace };

struct FeFunction {
  const Mesh* mesh = nullptr;
  Eigen::VectorXd coefficients;
  SpaceTag space_tag = SpaceTag::full;

  void validate() const;
};

// Deduplicated sparse operator with an exact-symmetry promise for symmetric
// assemblies (built from symmetric element contributions, never symmetrized
// after the fact).
struct SparseOperator {
  Eigen::SparseMatrix<double> matrix;
  bool symmetric = false;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
};

// Whole-domain P1 operators. `subdomain` (1..4) restricts the assembly to the
// triangles of one quadrant; 0 means the whole domain. Boundary masses take a
// Gamma_i id the same way.
SparseOperator assemble_stiffness(const Mesh& mesh);
SparseOperator assemble_mass(const Mesh& mesh, int subdomain = 0);
SparseOperator assemble_boundary_mass(const Mesh& mesh, int segment = 0);

// Vertex-rule (lumped) masses: row sums of the consistent operators.
Eigen::VectorXd lumped_mass(const Mesh& mesh, int subdomain = 0);
Eigen::VectorXd lumped_boundary_mass(const Mesh& mesh, int segment = 0);

// Direct sparse solve with Dirichlet elimination: rows/columns listed in
// `constrained_vertices` are replaced by the identity and the returned entries
// there are exactly zero. Residual contract over the free rows:
// ||Ax - b|| <= 1e-12 * max(1, ||b||). Throws SolverError with diagnostics on
// singular systems or a missed contract.
Eigen::VectorXd solve_sparse(const SparseOperator& A, const Eigen::VectorXd& b,
                             const std::vector<int>& constrained_vertices = {});

}  // namespace gnep
