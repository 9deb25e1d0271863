#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

struct Joint {
  int parent = -1;  // -1 for the root; parents precede children
  Vec3 rest_position = Vec3::Zero();
  std::string name;
};

struct FitParams {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();  // axis-angle, radians
  double scale = 1.0;
  Eigen::VectorXd shape;   // S blendshape coefficients
  Eigen::MatrixXd pose;    // J x 3 per-joint axis-angle

  void require_finite() const;
};

// Template mesh + shape blendshapes + skeleton + skinning weights. Entirely
// self-contained; no external body-model files.
struct ParametricBody {
  TriMesh template_mesh;
  std::vector<Eigen::MatrixXd> shape_basis;  // each V x 3
  std::vector<Joint> joints;
  Eigen::MatrixXd weights;  // V x J, rows sum to 1

  int vertex_count() const { return int(template_mesh.vertices.size()); }
  int shape_count() const { return int(shape_basis.size()); }
  int joint_count() const { return int(joints.size()); }
  int param_count() const { return 7 + shape_count() + 3 * joint_count(); }
  FitParams identity_params() const;
  void validate() const;
};

// Rodrigues rotation and the exact Jacobian d(R(aa) x)/d(aa).
Mat3 axis_angle_to_matrix(const Vec3& aa);
Mat3 rotate_point_jacobian(const Vec3& aa, const Vec3& x);

// Forward model: blendshapes, then linear blend skinning with per-joint
// rotations about their rest positions, then global scale/rotation/translation.
TriMesh pose_body(const ParametricBody& body, const FitParams& params);

// Packed free-parameter order: [translation(3), rotation(3), log_scale(1),
// shape(S), pose(3J)]. Scale optimizes as its logarithm so it stays positive.
Eigen::VectorXd pack_params(const ParametricBody& body, const FitParams& params);
FitParams unpack_params(const ParametricBody& body, const Eigen::VectorXd& packed);

struct PosedBody {
  TriMesh mesh;
  // Per-vertex analytic Jacobians: jacobian[v] is 3 x P in packed order.
  std::vector<Eigen::MatrixXd> jacobian;
};
PosedBody pose_body_with_jacobian(const ParametricBody& body, const FitParams& params);

// Mean squared penetration depth of garment vertices below the body surface
// (offset outward by `margin`): d = max(0, margin - (g - p) . n) with p the
// closest body point and n its outward face normal (held fixed in the
// gradient). Gradient is w.r.t. body vertex positions.
std::pair<double, Eigen::MatrixXd> collision_penalty(const TriMesh& body_mesh,
                                                     const TriMesh& garment, double margin);

// Fraction of garment vertices strictly inside the body surface.
double penetration_fraction(const TriMesh& body_mesh, const TriMesh& garment);

struct FitStageConfig {
  int iterations = 300;
  double learning_rate = 0.01;
};

struct FitConfig {
  FitStageConfig rigid{300, 0.03};      // translation + rotation + scale
  FitStageConfig articulated{500, 0.01};  // + shape and pose
  FitStageConfig collision{200, 0.005};   // + collision penalty
  int garment_samples = 2000;
  double collision_margin = 0.003;  // meters
  double collision_weight = 10.0;  // relative to the Chamfer term
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitResult {
  FitParams params;
  std::vector<std::vector<double>> stage_history;  // loss per iteration, 3 stages
  double penetration = 0.0;  // garment-vertex penetration fraction after stage 3
};

// Three-stage fit of the body into a FIXED garment: (1) rigid + scale,
// (2) + shape/pose, (3) + collision penalty. The loss is the one-directional
// Chamfer from garment surface samples to the body surface. The garment is
// never modified.
FitResult fit_body_to_garment(const ParametricBody& body, const TriMesh& garment,
                              const FitConfig& config = {},
                              const FitParams* initial = nullptr);

// Binary body container (magic "GBDY"); layout in docs/body_format.md.
void save_body(const ParametricBody& body, const std::string& path);
ParametricBody load_body(const std::string& path);

// Capped two-bone cylinder with a radial and a height blendshape; the test
// and demo body. Deterministic.
ParametricBody make_test_body(int radial_segments = 16, int height_segments = 16);

void save_fit_params_json(const ParametricBody& body, const FitParams& params,
                          const std::string& path);

}  // namespace garment
