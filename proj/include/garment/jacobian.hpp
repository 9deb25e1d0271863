#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

// One 3x3 deformation gradient per face of the rest mesh.
using JacobianField = std::vector<Mat3>;

JacobianField identity_jacobians(size_t face_count);

// Piecewise-linear gradient operator of the rest mesh: maps per-vertex scalars
// to per-face 3D gradient vectors. Rows are grouped 3 per face.
struct GradientOperator {
  Eigen::SparseMatrix<double> G;   // (3F) x V
  std::vector<double> areas;       // rest face areas |t_i|
  int vertex_count = 0;
  int face_count = 0;

  // Per-face gradients of a vertex scalar field, as an F x 3 matrix.
  Eigen::MatrixXd apply(const Eigen::VectorXd& vertex_values) const;

  // Per-face achieved Jacobians of a vertex position matrix (V x 3).
  JacobianField face_jacobians(const Eigen::MatrixXd& positions) const;
};

// Prefactorized area-weighted normal equations of the Poisson problem
//   min_V sum_i |t_i| || G_i V - J_i^T ||^2,  V[pin] fixed at its rest position.
// One vertex is pinned to remove the translation null space, so the reduced
// system is SPD and the factorization is reused for every solve and adjoint.
class PoissonSystem {
 public:
  PoissonSystem(const GradientOperator& op, const TriMesh& rest_mesh);

  int pinned_vertex() const { return pin_; }
  const Vec3& pinned_position() const { return pin_position_; }

  // Least-squares vertex positions for prescribed Jacobians (V x 3).
  Eigen::MatrixXd solve(const GradientOperator& op, const JacobianField& jacobians) const;

  // Pull a vertex-position gradient back to Jacobian entries through the same
  // factorization: lambda = Lmat^-1 dL/dV, dL/dJ_i = (|t_i| G_i lambda)^T.
  JacobianField adjoint(const GradientOperator& op, const Eigen::MatrixXd& dL_dV) const;

  // Relative residual ||Lmat x - b|| / ||b|| of the last solve.
  double last_residual() const { return last_residual_; }

  const Eigen::SparseMatrix<double>& normal_matrix() const { return Lmat_; }

 private:
  Eigen::VectorXd solve_reduced(const Eigen::VectorXd& rhs_full, double pinned_value) const;

  Eigen::SparseMatrix<double> Lmat_;       // G^T M G, V x V
  Eigen::SparseMatrix<double> Lff_;        // pinned row/col removed
  Eigen::VectorXd Lfp_;                    // free-rows slice of the pinned column
  Eigen::SparseMatrix<double> GtM_;        // G^T M, V x 3F
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> chol_;
  int pin_ = 0;
  Vec3 pin_position_ = Vec3::Zero();
  mutable double last_residual_ = 0.0;
};

// Builds the gradient operator and the prefactorized system from the rest
// mesh. Throws TopologyError for degenerate faces, SolveError when the mesh
// has more than one connected component (one pin cannot fix the null space)
// or the factorization fails.
std::pair<GradientOperator, std::shared_ptr<PoissonSystem>> build_system(const TriMesh& rest_mesh);

// Positions as a mesh with the rest connectivity.
TriMesh mesh_with_positions(const TriMesh& rest_mesh, const Eigen::MatrixXd& positions);
Eigen::MatrixXd positions_matrix(const TriMesh& mesh);

}  // namespace garment
