#pragma once

#include <limits>
#include <string>
#include <vector>

#include "garment/camera.hpp"
#include "garment/image.hpp"
#include "garment/mesh.hpp"

namespace garment {

// Output of one rasterization pass. All planes are row-major height x width.
struct RenderBuffers {
  int width = 0;
  int height = 0;
  std::vector<double> silhouette;  // coverage in [0, 1]
  std::vector<double> normals;     // 3 per pixel, camera space, 0 where empty
  std::vector<double> depth;       // -z_camera, +inf where empty

  static constexpr double kEmptyDepth = std::numeric_limits<double>::infinity();

  void resize(int w, int h);
  size_t pixel_count() const { return size_t(width) * size_t(height); }
};

// Per-pixel gradients of a scalar loss, shaped like RenderBuffers.
struct BufferGrad {
  int width = 0;
  int height = 0;
  std::vector<double> silhouette;
  std::vector<double> normals;
  std::vector<double> depth;

  void resize_zero(int w, int h);
};

// Z-buffered rasterization with a soft silhouette: pixel coverage ramps over
// a band of `softness` pixels centered on the projected mesh boundary, so the
// silhouette is a smooth function of vertex positions. Softness 0 gives exact
// {0,1} coverage. Normals and depth come from the hard depth test and are
// barycentrically interpolated with perspective correction.
RenderBuffers render(const TriMesh& mesh, const Camera& camera, double softness);

// Gradient of any scalar image loss w.r.t. world-space vertex positions.
// Recomputes the forward rasterization internally; `dL` must match the
// resolution of the corresponding render call.
std::vector<Vec3> render_backward(const TriMesh& mesh, const Camera& camera, double softness,
                                  const BufferGrad& dL);

// Hard-rasterized preview of a UV-textured mesh (bilinear texture lookup),
// composited over `background` gray. Not part of the loss path.
Image render_textured(const TriMesh& mesh, const Camera& camera, const Image& texture,
                      float background = 0.0f);

// RGB view of the buffers used for embedding providers and previews:
// channel c = (normal_c * 0.5 + 0.5) * silhouette.
Image buffers_to_image(const RenderBuffers& buffers);
// Pullback of the map above: image-space gradients to buffer-space gradients.
BufferGrad buffers_image_backward(const RenderBuffers& buffers, const Image& dL_dImage);

// Writes <prefix>_silhouette.png, <prefix>_normals.png, <prefix>_depth.png and
// <prefix>_depth.json (the min/max used to normalize the depth plane).
void save_buffers_png(const RenderBuffers& buffers, const std::string& prefix);

}  // namespace garment
