#include "garment/jacobian.hpp"

#include <cmath>

#include "garment/errors.hpp"

namespace garment {

JacobianField identity_jacobians(size_t face_count) {
  return JacobianField(face_count, Mat3::Identity());
}

Eigen::MatrixXd GradientOperator::apply(const Eigen::VectorXd& vertex_values) const {
  const Eigen::VectorXd g = G * vertex_values;
  Eigen::MatrixXd out(face_count, 3);
  for (int f = 0; f < face_count; ++f) out.row(f) = g.segment<3>(3 * f).transpose();
  return out;
}

JacobianField GradientOperator::face_jacobians(const Eigen::MatrixXd& positions) const {
  // G_i V is J_i^T for the piecewise-linear map defined by the positions.
  const Eigen::MatrixXd GV = G * positions;  // (3F) x 3
  JacobianField J(face_count);
  for (int f = 0; f < face_count; ++f) J[f] = GV.block<3, 3>(3 * f, 0).transpose();
  return J;
}

std::pair<GradientOperator, std::shared_ptr<PoissonSystem>> build_system(const TriMesh& rest_mesh) {
  rest_mesh.validate();
  if (rest_mesh.faces.empty()) throw TopologyError("cannot build a Poisson system without faces");
  const int components = connected_component_count(rest_mesh);
  if (components != 1)
    throw SolveError("mesh has " + std::to_string(components) +
                     " connected components; a single pinned vertex needs exactly one");

  GradientOperator op;
  op.vertex_count = int(rest_mesh.vertices.size());
  op.face_count = int(rest_mesh.faces.size());
  op.areas.resize(op.face_count);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(size_t(op.face_count) * 9);
  for (int f = 0; f < op.face_count; ++f) {
    const auto& t = rest_mesh.faces[f];
    const Vec3& a = rest_mesh.vertices[t[0]];
    const Vec3& b = rest_mesh.vertices[t[1]];
    const Vec3& c = rest_mesh.vertices[t[2]];
    const Vec3 cr = triangle_cross(a, b, c);
    const double area2 = cr.norm();
    if (area2 <= 2e-12) throw TopologyError("degenerate face " + std::to_string(f));
    op.areas[f] = 0.5 * area2;
    const Vec3 n = cr / area2;
    // Hat-function gradients: grad phi_k = n x (opposite edge) / (2A).
    const Vec3 grads[3] = {n.cross(c - b) / area2, n.cross(a - c) / area2, n.cross(b - a) / area2};
    for (int k = 0; k < 3; ++k)
      for (int r = 0; r < 3; ++r) trips.emplace_back(3 * f + r, t[k], grads[k][r]);
  }
  op.G.resize(3 * op.face_count, op.vertex_count);
  op.G.setFromTriplets(trips.begin(), trips.end());
  op.G.makeCompressed();

  auto system = std::make_shared<PoissonSystem>(op, rest_mesh);
  return {std::move(op), std::move(system)};
}

PoissonSystem::PoissonSystem(const GradientOperator& op, const TriMesh& rest_mesh) {
  pin_ = 0;
  pin_position_ = rest_mesh.vertices[0];

  Eigen::SparseMatrix<double> M(3 * op.face_count, 3 * op.face_count);
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(size_t(op.face_count) * 3);
    for (int f = 0; f < op.face_count; ++f)
      for (int r = 0; r < 3; ++r) trips.emplace_back(3 * f + r, 3 * f + r, op.areas[f]);
    M.setFromTriplets(trips.begin(), trips.end());
  }
  GtM_ = op.G.transpose() * M;
  Lmat_ = GtM_ * op.G;
  Lmat_.makeCompressed();

  const double asym = (Eigen::SparseMatrix<double>(Lmat_.transpose()) - Lmat_).norm();
  if (!(asym < 1e-12 * std::max(1.0, Lmat_.norm())))
    throw SolveError("normal-equation matrix is not symmetric");

  // Remove the pinned row/column (pin_ = 0, so this is the trailing block).
  const int n = op.vertex_count;
  Lff_ = Lmat_.block(1, 1, n - 1, n - 1);
  Lff_.makeCompressed();
  const Eigen::VectorXd pin_col = Lmat_.col(pin_);
  Lfp_ = pin_col.tail(n - 1);
  chol_ = std::make_unique<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
  chol_->compute(Lff_);
  if (chol_->info() != Eigen::Success)
    throw SolveError("Cholesky factorization failed; mesh is degenerate or disconnected");
}

Eigen::VectorXd PoissonSystem::solve_reduced(const Eigen::VectorXd& rhs_full,
                                             double pinned_value) const {
  const int n = int(rhs_full.size());
  Eigen::VectorXd rhs = rhs_full.segment(1, n - 1);
  // Move the pinned column to the right-hand side.
  rhs -= Lfp_ * pinned_value;
  const Eigen::VectorXd xf = chol_->solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm > 0.0)
    last_residual_ = (Lff_ * xf - rhs).norm() / rhs_norm;
  else
    last_residual_ = 0.0;
  Eigen::VectorXd x(n);
  x[0] = pinned_value;
  x.tail(n - 1) = xf;
  return x;
}

Eigen::MatrixXd PoissonSystem::solve(const GradientOperator& op,
                                     const JacobianField& jacobians) const {
  if (int(jacobians.size()) != op.face_count)
    throw SolveError("Jacobian field length " + std::to_string(jacobians.size()) +
                     " does not match face count " + std::to_string(op.face_count));
  Eigen::MatrixXd D(3 * op.face_count, 3);
  for (int f = 0; f < op.face_count; ++f) {
    if (!jacobians[f].allFinite()) throw NumericError("non-finite Jacobian at face " + std::to_string(f));
    D.block<3, 3>(3 * f, 0) = jacobians[f].transpose();
  }
  const Eigen::MatrixXd rhs = GtM_ * D;  // V x 3
  Eigen::MatrixXd positions(op.vertex_count, 3);
  for (int c = 0; c < 3; ++c)
    positions.col(c) = solve_reduced(rhs.col(c), pin_position_[c]);
  return positions;
}

JacobianField PoissonSystem::adjoint(const GradientOperator& op,
                                     const Eigen::MatrixXd& dL_dV) const {
  if (dL_dV.rows() != op.vertex_count || dL_dV.cols() != 3)
    throw SolveError("vertex gradient shape mismatch");
  if (!dL_dV.allFinite()) throw NumericError("non-finite vertex gradient");
  const int n = op.vertex_count;
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(n, 3);
  for (int c = 0; c < 3; ++c) {
    const Eigen::VectorXd rhs = dL_dV.col(c).tail(n - 1);
    lambda.col(c).tail(n - 1) = chol_->solve(rhs);
    // The pinned vertex is constant: its adjoint stays zero.
  }
  const Eigen::MatrixXd dLdD = GtM_.transpose() * lambda;  // (3F) x 3
  JacobianField grad(op.face_count);
  for (int f = 0; f < op.face_count; ++f) grad[f] = dLdD.block<3, 3>(3 * f, 0).transpose();
  return grad;
}

TriMesh mesh_with_positions(const TriMesh& rest_mesh, const Eigen::MatrixXd& positions) {
  TriMesh out = rest_mesh;
  for (int v = 0; v < positions.rows(); ++v) out.vertices[v] = positions.row(v).transpose();
  return out;
}

Eigen::MatrixXd positions_matrix(const TriMesh& mesh) {
  Eigen::MatrixXd V(mesh.vertices.size(), 3);
  for (size_t v = 0; v < mesh.vertices.size(); ++v) V.row(v) = mesh.vertices[v].transpose();
  return V;
}

}  // namespace garment
