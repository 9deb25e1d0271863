#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "garment/losses.hpp"

namespace garment {

struct OptConfig {
  int iterations = 2000;
  double learning_rate = 1e-3;
  double lr_final = 1e-4;  // cosine decay target
  double beta1 = 0.9;
  double beta2 = 0.999;
  LossWeights weights;
  int cameras_per_iter = 4;
  int surface_samples = 5000;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // iterations between saves, 0 = off
  std::string checkpoint_path;
  int early_stop_patience = 300;  // iterations without a new best, 0 = off
  int render_resolution = 256;
  double softness = 1.0;
  double vertical_fov = 75.0;
  std::string loss_log_path;  // per-iteration CSV, empty = off

  void validate() const;
};

struct OptState {
  int iteration = 0;
  JacobianField jacobians;
  JacobianField m, v;  // Adam moments
  double best_loss = std::numeric_limits<double>::infinity();
  int best_iteration = -1;
  JacobianField best_jacobians;
  std::vector<LossBreakdown> history;
};

struct DeformResult {
  TriMesh mesh;  // best-loss iterate, connectivity identical to the base
  OptState state;
};

// The optimization loop: per-face Jacobians updated by Adam under the total
// loss, fresh cameras and surface samples each iteration from a seeded
// stream, best iterate returned. Deterministic per config. Pass a state from
// load_checkpoint to resume; the remaining trajectory is bit-identical to an
// uninterrupted run.
DeformResult deform(const TriMesh& base, const TriMesh& guide, const OptConfig& config,
                    EmbeddingProvider* provider = nullptr, const OptState* resume = nullptr);

// Rescales/translates the guide so its centroid and bounding-sphere radius
// match the base; optionally tries the four 90-degree yaws about the vertical
// axis and keeps the Chamfer-minimal one (ties favor no rotation).
TriMesh align_guide(const TriMesh& base, const TriMesh& guide, bool yaw_search = true);

// Versioned binary container (magic "G3DG"); layout in docs/checkpoint_format.md.
void save_checkpoint(const OptState& state, const std::string& path);
OptState load_checkpoint(const std::string& path);

}  // namespace garment
