#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <list>
#include <string>
#include <unordered_map>
#include <vector>

#include "garment/camera.hpp"
#include "garment/embed.hpp"
#include "garment/jacobian.hpp"
#include "garment/mesh.hpp"
#include "garment/render.hpp"

namespace garment {

struct LossWeights {
  double cd = 1.0;
  double lap = 0.05;
  double triag = 0.01;
  double render2d = 0.5;
  double embed = 0.1;

  void validate() const;  // finite and >= 0
};

// Weighted contribution of each term; `total` is their sum, so the breakdown
// is additive in the weights.
struct LossBreakdown {
  double cd = 0, lap = 0, triag = 0, render2d = 0, embed = 0, total = 0;
};

// Area-weighted random surface points with barycentric provenance, so point
// gradients chain to vertex gradients.
struct SurfaceSamples {
  Eigen::MatrixXd points;  // N x 3
  std::vector<int> face;
  Eigen::MatrixXd bary;  // N x 3

  // Points for the same (face, bary) provenance on other vertex positions.
  Eigen::MatrixXd reposition(const TriMesh& mesh) const;
};

SurfaceSamples sample_surface(const TriMesh& mesh, int count, std::uint64_t seed);

// Eq.-style one-directional Chamfer: mean squared distance from each source
// point to its nearest target point. Gradients flow to sources only.
struct ChamferResult {
  double value = 0.0;
  Eigen::MatrixXd grad_src;  // N x 3
};
ChamferResult chamfer_one_directional(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt);

// Uniform-weight Laplacian smoothness: mean over vertices of the squared
// offset from the one-ring neighbor mean.
std::pair<double, Eigen::MatrixXd> laplacian_loss(const TriMesh& mesh);

// Degenerate-triangle barrier plus edge-length uniformity:
//   (1/F) sum eps/(A^2+eps) + (1/E) sum (l - lbar)^2 / lbar^2,
// eps = (1e-3 lbar)^4, all evaluated on the current mesh (lbar included in
// the gradient chain).
std::pair<double, Eigen::MatrixXd> triangle_quality_loss(const TriMesh& mesh);

// Small LRU of guide renders keyed by camera parameters, so repeated
// evaluations with the same cameras skip the guide rasterization.
class GuideRenderCache {
 public:
  explicit GuideRenderCache(size_t capacity = 64) : capacity_(capacity) {}
  const RenderBuffers* find(const std::string& key) const;
  void insert(const std::string& key, RenderBuffers buffers);
  static std::string camera_key(const Camera& cam, double softness);

 private:
  size_t capacity_;
  std::list<std::pair<std::string, RenderBuffers>> entries_;
  std::unordered_map<std::string, std::list<std::pair<std::string, RenderBuffers>>::iterator> index_;
};

// Mean absolute difference of silhouette + camera-space-normal channels
// between renders of the two meshes, averaged over cameras. Gradient w.r.t.
// the first mesh's vertices.
std::pair<double, Eigen::MatrixXd> render_l1(const TriMesh& def_mesh, const TriMesh& guide_mesh,
                                             const std::vector<Camera>& cameras,
                                             double softness = 1.0,
                                             GuideRenderCache* guide_cache = nullptr);

// Mean (1 - CosSim) across paired image lists. Provider errors are rethrown
// with the offending view index.
double embedding_loss(const std::vector<Image>& def_renders,
                      const std::vector<Image>& guide_renders, EmbeddingProvider& provider);

// Everything total_loss needs that stays fixed across iterations.
struct DeformContext {
  const TriMesh* base = nullptr;   // rest mesh; also the sampling provenance source
  const TriMesh* guide = nullptr;  // aligned guide, never modified
  const GradientOperator* op = nullptr;
  const PoissonSystem* system = nullptr;
  EmbeddingProvider* provider = nullptr;  // may be null when weights.embed == 0
  int cameras_per_iter = 4;
  int surface_samples = 5000;
  int render_resolution = 256;
  double softness = 1.0;
  double vertical_fov = 75.0;
  mutable GuideRenderCache guide_cache;
};

struct TotalLossResult {
  LossBreakdown breakdown;
  JacobianField grad;         // dTotal/dJ
  Eigen::MatrixXd positions;  // solved vertex positions for this field
};

// Solves positions from the Jacobian field, evaluates every weighted term,
// sums the vertex-space gradients, and pulls them back to Jacobian entries
// through the adjoint solve. Fresh cameras and surface samples are drawn from
// `iter_seed`. Terms with zero weight are skipped entirely.
TotalLossResult total_loss(const DeformContext& ctx, const JacobianField& jacobians,
                           const LossWeights& weights, std::uint64_t iter_seed);

}  // namespace garment
