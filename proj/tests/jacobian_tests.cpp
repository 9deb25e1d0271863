#include <Eigen/Dense>
#include <random>

#include "doctest.h"
#include "garment/errors.hpp"
#include "garment/jacobian.hpp"
#include "garment/mesh.hpp"
#include "support/fixtures.hpp"

using namespace garment;
using namespace garment::testfx;

namespace {

Eigen::VectorXd vertex_scalar(const TriMesh& mesh, const Vec3& a) {
  Eigen::VectorXd f(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i) f[i] = a.dot(mesh.vertices[i]);
  return f;
}

double max_position_error(const Eigen::MatrixXd& got, const TriMesh& expected) {
  double err = 0.0;
  for (size_t i = 0; i < expected.vertices.size(); ++i)
    err = std::max(err, (got.row(i).transpose() - expected.vertices[i]).norm());
  return err;
}

}  // namespace

TEST_CASE("gradient operator reproduces linear functions exactly") {
  TriMesh tri;
  tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  tri.faces = {{0, 1, 2}};
  auto [op, system] = build_system(tri);
  (void)system;

  const Eigen::MatrixXd gx = op.apply(vertex_scalar(tri, Vec3(1, 0, 0)));
  CHECK((gx.row(0).transpose() - Vec3(1, 0, 0)).norm() < 1e-12);

  // Linear reproduction and constant annihilation on a curved mesh.
  const TriMesh sphere = make_icosphere(2);
  auto [op2, sys2] = build_system(sphere);
  (void)sys2;
  const Vec3 a(0.3, -1.2, 0.7);
  const Eigen::MatrixXd g = op2.apply(vertex_scalar(sphere, a));
  const Eigen::MatrixXd zero = op2.apply(Eigen::VectorXd::Ones(sphere.vertices.size()));
  for (int f = 0; f < op2.face_count; ++f) {
    // On a curved surface only the tangential part of `a` is representable.
    const Vec3 grad = g.row(f).transpose();
    const Vec3 residual = grad - a;
    const auto& face = sphere.faces[f];
    const Vec3 n = triangle_normal(sphere.vertices[face[0]], sphere.vertices[face[1]],
                                   sphere.vertices[face[2]]);
    CHECK((residual - residual.dot(n) * n).norm() < 1e-8);  // tangential error only
    CHECK(zero.row(f).norm() < 1e-10);
  }
}

TEST_CASE("build_system rejects degenerate faces and split meshes") {
  TriMesh degenerate = make_triangle();
  degenerate.vertices[2] = Vec3(2, 0, 0);  // collinear
  CHECK_THROWS_AS(build_system(degenerate), TopologyError);

  TriMesh two = make_triangle();
  two.vertices.push_back(Vec3(5, 0, 0));
  two.vertices.push_back(Vec3(6, 0, 0));
  two.vertices.push_back(Vec3(5, 1, 0));
  two.faces.push_back({3, 4, 5});
  CHECK_THROWS_AS(build_system(two), SolveError);
}

TEST_CASE("normal matrix equals the dense assembly on a 10x10 grid") {
  const TriMesh grid = make_grid(10, 10);
  auto [op, system] = build_system(grid);

  const Eigen::MatrixXd G = Eigen::MatrixXd(op.G);
  Eigen::VectorXd m(3 * op.face_count);
  for (int f = 0; f < op.face_count; ++f)
    for (int k = 0; k < 3; ++k) m[3 * f + k] = op.areas[size_t(f)];
  const Eigen::MatrixXd dense = G.transpose() * m.asDiagonal() * G;
  const Eigen::MatrixXd got = Eigen::MatrixXd(system->normal_matrix());
  CHECK((got - dense).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identity jacobians reproduce the rest mesh") {
  const TriMesh mesh = make_shirt(2);
  auto [op, system] = build_system(mesh);
  const Eigen::MatrixXd out = system->solve(op, identity_jacobians(mesh.faces.size()));
  CHECK(max_position_error(out, mesh) < 1e-8);
  CHECK(system->last_residual() < 1e-8);
}

TEST_CASE("uniform scale jacobians scale the mesh about the pin") {
  const TriMesh mesh = make_open_cylinder(10, 5);
  auto [op, system] = build_system(mesh);

  JacobianField J(mesh.faces.size(), 2.0 * Mat3::Identity());
  const Eigen::MatrixXd out = system->solve(op, J);

  TriMesh expected = mesh;
  const Vec3 pin = mesh.vertices[size_t(system->pinned_vertex())];
  similarity_transform(expected, pin, 2.0, Mat3::Identity());
  CHECK(max_position_error(out, expected) < 1e-8);
}

TEST_CASE("constant rotation jacobians rotate the mesh about the pin") {
  const TriMesh mesh = make_shirt(2);
  auto [op, system] = build_system(mesh);

  const Mat3 R = yaw_matrix(33.0);
  JacobianField J(mesh.faces.size(), R);
  const Eigen::MatrixXd out = system->solve(op, J);

  TriMesh expected = mesh;
  const Vec3 pin = mesh.vertices[size_t(system->pinned_vertex())];
  similarity_transform(expected, pin, 1.0, R);
  CHECK(max_position_error(out, expected) < 1e-8);
}

TEST_CASE("pinned vertex stays exactly at its rest position") {
  const TriMesh mesh = make_fan(9);
  auto [op, system] = build_system(mesh);

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(-0.4, 0.4);
  JacobianField J(mesh.faces.size());
  for (auto& j : J) {
    j = Mat3::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) j(r, c) += dist(rng);
  }
  const Eigen::MatrixXd out = system->solve(op, J);
  const int pin = system->pinned_vertex();
  CHECK((out.row(pin).transpose() - mesh.vertices[size_t(pin)]).norm() == 0.0);
  CHECK((system->pinned_position() - mesh.vertices[size_t(pin)]).norm() == 0.0);
}

TEST_CASE("solve output is a fixed point under jacobian re-extraction") {
  const TriMesh mesh = make_shirt(2);
  auto [op, system] = build_system(mesh);

  std::mt19937 rng(23);
  std::uniform_real_distribution<double> dist(-0.3, 0.3);
  JacobianField J(mesh.faces.size());
  for (auto& j : J) {
    j = Mat3::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) j(r, c) += dist(rng);
  }
  const Eigen::MatrixXd once = system->solve(op, J);
  const JacobianField achieved = op.face_jacobians(once);
  const Eigen::MatrixXd twice = system->solve(op, achieved);
  CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("solve rejects non-finite jacobians") {
  const TriMesh mesh = make_triangle();
  auto [op, system] = build_system(mesh);
  JacobianField J(1, Mat3::Identity());
  J[0](1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(system->solve(op, J), NumericError);
}

TEST_CASE("adjoint of zero is zero and the map is linear") {
  const TriMesh mesh = make_grid(5, 5);
  auto [op, system] = build_system(mesh);

  const Eigen::MatrixXd zero =
      Eigen::MatrixXd::Zero(Eigen::Index(mesh.vertices.size()), 3);
  for (const Mat3& g : system->adjoint(op, zero)) CHECK(g.norm() == 0.0);

  std::mt19937 rng(31);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd dL(mesh.vertices.size(), 3);
  for (int i = 0; i < dL.rows(); ++i)
    for (int c = 0; c < 3; ++c) dL(i, c) = dist(rng);

  const JacobianField g1 = system->adjoint(op, dL);
  const JacobianField g2 = system->adjoint(op, Eigen::MatrixXd(2.0 * dL));
  for (size_t f = 0; f < g1.size(); ++f)
    CHECK((g2[f] - 2.0 * g1[f]).norm() < 1e-12 * std::max(1.0, g1[f].norm()));
}

TEST_CASE("adjoint gradient matches finite differences on a quadratic loss") {
  const TriMesh mesh = make_fan(8);  // 8 faces, small enough for dense FD
  auto [op, system] = build_system(mesh);

  // L = || V - V_target ||^2 with an arbitrary fixed target.
  TriMesh target = mesh;
  similarity_transform(target, Vec3(0.2, 0.1, 0), 1.3, yaw_matrix(20.0));
  const Eigen::MatrixXd T = positions_matrix(target);

  std::mt19937 rng(41);
  std::uniform_real_distribution<double> dist(-0.2, 0.2);
  JacobianField J(mesh.faces.size());
  for (auto& j : J) {
    j = Mat3::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) j(r, c) += dist(rng);
  }

  auto loss = [&](const JacobianField& field) {
    const Eigen::MatrixXd V = system->solve(op, field);
    return (V - T).squaredNorm();
  };

  const Eigen::MatrixXd V = system->solve(op, J);
  const Eigen::MatrixXd dL_dV = 2.0 * (V - T);
  const JacobianField grad = system->adjoint(op, dL_dV);

  const double h = 1e-5;
  for (size_t f = 0; f < J.size(); ++f)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        JacobianField probe = J;
        probe[f](r, c) += h;
        const double up = loss(probe);
        probe[f](r, c) -= 2 * h;
        const double down = loss(probe);
        const double fd = (up - down) / (2 * h);
        const double scale = std::max({1.0, std::abs(fd), std::abs(grad[f](r, c))});
        CHECK(std::abs(grad[f](r, c) - fd) / scale < 1e-4);
      }
}

TEST_CASE("adjoint satisfies the inner-product identity") {
  const TriMesh mesh = make_open_cylinder(8, 4);
  auto [op, system] = build_system(mesh);

  std::mt19937 rng(53);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  JacobianField J(mesh.faces.size(), Mat3::Identity());
  JacobianField dJ(mesh.faces.size());
  for (auto& j : dJ)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) j(r, c) = dist(rng);
  Eigen::MatrixXd dL(mesh.vertices.size(), 3);
  for (int i = 0; i < dL.rows(); ++i)
    for (int c = 0; c < 3; ++c) dL(i, c) = dist(rng);

  // <dL_dJ, dJ> must equal <dL_dV, deltaV> where deltaV is the solve response
  // to the jacobian perturbation (the map J -> V is affine).
  const JacobianField dL_dJ = system->adjoint(op, dL);
  double lhs = 0.0;
  for (size_t f = 0; f < dJ.size(); ++f)
    lhs += (dL_dJ[f].array() * dJ[f].array()).sum();

  JacobianField J2 = J;
  for (size_t f = 0; f < J.size(); ++f) J2[f] += dJ[f];
  const Eigen::MatrixXd dV = system->solve(op, J2) - system->solve(op, J);
  const double rhs = (dL.array() * dV.array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
}

TEST_CASE("deformation preserves connectivity and boundary structure") {
  const TriMesh mesh = make_shirt(2);
  auto [op, system] = build_system(mesh);
  JacobianField J(mesh.faces.size(), 1.5 * yaw_matrix(45.0));
  const TriMesh out = mesh_with_positions(mesh, system->solve(op, J));
  CHECK(out.faces == mesh.faces);
  CHECK(boundary_loops(out).loops.size() == boundary_loops(mesh).loops.size());
}
