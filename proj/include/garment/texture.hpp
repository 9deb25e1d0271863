#pragma once

#include <string>
#include <vector>

#include "garment/camera.hpp"
#include "garment/image.hpp"
#include "garment/mesh.hpp"

namespace garment {

// Per-texel surface correspondence of a UV chart, sampled at texel centers
// uv = ((ix + 0.5) / size, 1 - (iy + 0.5) / size). Row 0 is v ~= 1 so the
// atlas row order matches image row order.
struct TexelMap {
  int size = 0;
  std::vector<int> face;       // owning face per texel, -1 outside every chart
  std::vector<Vec3> position;  // barycentric surface point
  std::vector<Vec3> normal;    // interpolated smooth normal, unit
  int covered_count = 0;       // texels owned by some face
  int overlap_count = 0;       // texels strictly interior to two or more charts

  int texel_count() const { return size * size; }
};

// Throws TopologyError when the mesh carries no UVs. First face (ascending
// index) wins contested texels; a texel counts as an overlap only when two
// claims are both strictly interior, so shared chart borders stay quiet.
TexelMap rasterize_uv_points(const TriMesh& mesh, int size);

// Color accumulator over the texel grid. Within one pass, samples blend by
// facing weight; across passes the first pass to claim a texel keeps it.
struct TextureAtlas {
  int size = 0;
  std::vector<Vec3> color;   // facing-weighted RGB sums until finalize
  std::vector<double> weight;
  std::vector<int> fill_pass;  // -1 while unclaimed

  void resize(int s);
  bool filled(int t) const { return fill_pass[size_t(t)] >= 0; }
};

struct ViewImage {
  Image rgb;
  Camera camera;
  std::string tag;  // "front" / "back" views are applied first, together
};

struct BackprojectOptions {
  // Visibility depth tolerance as a fraction of the bounding radius. Must
  // exceed the per-pixel depth slope at the worst accepted grazing angle
  // (about half a pixel of tan(acos(min_facing_cos)) / projected radius),
  // while staying far below front-to-back surface separation.
  double depth_tol_factor = 0.01;
  double min_facing_cos = 0.2;     // reject grazing texels
  int atlas_size = 1024;
};

// Projects every mapped texel into the view, keeps those that pass the
// depth-buffer visibility test and face the camera, and blends their bilinear
// image color into the atlas under the pass rules above. Returns the number
// of previously unfilled texels this view claimed.
int backproject_view(TextureAtlas& atlas, const TexelMap& map, const TriMesh& mesh,
                     const ViewImage& view, int pass_id,
                     const BackprojectOptions& options = {});

// Newly claimable texel count if `view` were applied now; atlas is untouched.
int count_new_texels(const TextureAtlas& atlas, const TexelMap& map, const TriMesh& mesh,
                     const ViewImage& view, const BackprojectOptions& options = {});

// Application order: views tagged front/back first (ascending index), then
// greedily the view claiming the most still-unfilled visible texels, lowest
// index on ties, stopping once no view claims anything.
std::vector<int> select_views(const std::vector<ViewImage>& views, const TexelMap& map,
                              const TriMesh& mesh, const BackprojectOptions& options = {});

// Normalizes accumulated colors, returns chart coverage (filled / mapped,
// measured before dilation), then flood-fills the remaining texels from their
// nearest filled neighbors and paints anything still empty neutral gray.
double finalize_texture(TextureAtlas& atlas, const TexelMap& map);

// Post-finalize atlas as a 3-channel float image.
Image atlas_to_image(const TextureAtlas& atlas);

struct TextureResult {
  Image texture;
  double coverage = 0.0;       // filled fraction of mapped texels, pre-dilation
  std::vector<int> view_order;
  int overlap_texels = 0;
};

// One-call pipeline: rasterize the UV chart, order the views, backproject
// them (front/back share pass 0, each greedy view gets its own pass), finalize.
TextureResult backproject_texture(const TriMesh& mesh, const std::vector<ViewImage>& views,
                                  const BackprojectOptions& options = {});

// OBJ + sibling MTL that references `texture_filename` as the diffuse map.
void save_textured_obj(const TriMesh& mesh, const std::string& obj_path,
                       const std::string& texture_filename);

}  // namespace garment
