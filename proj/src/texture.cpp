#include "garment/texture.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>

#include "garment/errors.hpp"
#include "garment/render.hpp"

namespace garment {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

float channel_at(const Image& img, double px, double py, int c) {
  return img.sample_bilinear(px, py, std::min(c, img.channels - 1));
}

// Shared core of backproject_view / count_new_texels. When `atlas` is null
// only counts the texels a write pass would newly claim.
int backproject_impl(TextureAtlas* atlas, const TexelMap& map, const TriMesh& mesh,
                     const ViewImage& view, int pass_id, const BackprojectOptions& options) {
  view.camera.validate();
  if (view.rgb.width < 1 || view.rgb.height < 1 || view.rgb.channels < 1)
    throw Error("backprojection view has an empty image");
  if (atlas && atlas->size != map.size)
    throw Error("texture atlas and texel map sizes differ");

  const CameraFrame frame = camera_frame(view.camera);
  const RenderBuffers depth_pass = render(mesh, view.camera, 0.0);
  const double tol = options.depth_tol_factor * std::max(mesh.bounding_radius(), 1e-12);
  const double sx = double(view.rgb.width) / view.camera.width;
  const double sy = double(view.rgb.height) / view.camera.height;

  int newly = 0;
  for (int t = 0; t < map.texel_count(); ++t) {
    if (map.face[size_t(t)] < 0) continue;
    if (atlas && atlas->filled(t) && atlas->fill_pass[size_t(t)] != pass_id) continue;
    const Vec3& pos = map.position[size_t(t)];
    const PixelPoint pp = project_to_pixel(view.camera, frame.to_camera(pos));
    if (!pp.in_front) continue;
    const double px = pp.pixel.x(), py = pp.pixel.y();
    if (px < 0.0 || px >= view.camera.width || py < 0.0 || py >= view.camera.height) continue;
    const int ix = std::clamp(int(px), 0, view.camera.width - 1);
    const int iy = std::clamp(int(py), 0, view.camera.height - 1);
    const double dref = depth_pass.depth[size_t(iy) * depth_pass.width + size_t(ix)];
    if (!(std::abs(pp.depth - dref) <= tol)) continue;  // occluded or off-silhouette
    const double facing = map.normal[size_t(t)].dot((view.camera.position - pos).normalized());
    if (facing <= options.min_facing_cos) continue;

    if (!atlas) {
      ++newly;
      continue;
    }
    if (!atlas->filled(t)) {
      ++newly;
      atlas->fill_pass[size_t(t)] = pass_id;
    }
    const Vec3 rgb(channel_at(view.rgb, px * sx, py * sy, 0),
                   channel_at(view.rgb, px * sx, py * sy, 1),
                   channel_at(view.rgb, px * sx, py * sy, 2));
    atlas->color[size_t(t)] += facing * rgb;
    atlas->weight[size_t(t)] += facing;
  }
  return newly;
}

// Count against a hypothetical atlas state: visible and currently unfilled.
int count_impl(const TextureAtlas& atlas, const TexelMap& map, const TriMesh& mesh,
               const ViewImage& view, const BackprojectOptions& options) {
  view.camera.validate();
  const CameraFrame frame = camera_frame(view.camera);
  const RenderBuffers depth_pass = render(mesh, view.camera, 0.0);
  const double tol = options.depth_tol_factor * std::max(mesh.bounding_radius(), 1e-12);
  int count = 0;
  for (int t = 0; t < map.texel_count(); ++t) {
    if (map.face[size_t(t)] < 0 || atlas.filled(t)) continue;
    const Vec3& pos = map.position[size_t(t)];
    const PixelPoint pp = project_to_pixel(view.camera, frame.to_camera(pos));
    if (!pp.in_front) continue;
    const double px = pp.pixel.x(), py = pp.pixel.y();
    if (px < 0.0 || px >= view.camera.width || py < 0.0 || py >= view.camera.height) continue;
    const int ix = std::clamp(int(px), 0, view.camera.width - 1);
    const int iy = std::clamp(int(py), 0, view.camera.height - 1);
    const double dref = depth_pass.depth[size_t(iy) * depth_pass.width + size_t(ix)];
    if (!(std::abs(pp.depth - dref) <= tol)) continue;
    const double facing = map.normal[size_t(t)].dot((view.camera.position - pos).normalized());
    if (facing <= options.min_facing_cos) continue;
    ++count;
  }
  return count;
}

bool is_primary_tag(const std::string& tag) { return tag == "front" || tag == "back"; }

}  // namespace

TexelMap rasterize_uv_points(const TriMesh& mesh, int size) {
  if (!mesh.has_uvs()) throw TopologyError("mesh has no UV chart to rasterize");
  if (size < 1) throw Error("texture size must be >= 1");
  mesh.validate();

  TexelMap map;
  map.size = size;
  map.face.assign(size_t(size) * size, -1);
  map.position.assign(size_t(size) * size, Vec3::Zero());
  map.normal.assign(size_t(size) * size, Vec3::UnitZ());
  std::vector<std::uint8_t> interior(size_t(size) * size, 0);

  const std::vector<Vec3> normals = vertex_normals(mesh);
  constexpr double kInteriorEps = 1e-6;

  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& uvf = mesh.uv_faces[f];
    // Texel-grid coordinates of the chart triangle; v flips to image rows.
    Vec2 p[3];
    for (int k = 0; k < 3; ++k) {
      const Vec2& uv = mesh.uvs[size_t(uvf[size_t(k)])];
      p[k] = Vec2(uv.x() * size, (1.0 - uv.y()) * size);
    }
    const double d = cross2(p[1] - p[0], p[2] - p[0]);
    if (d == 0.0) continue;  // degenerate chart triangle

    const double min_x = std::min({p[0].x(), p[1].x(), p[2].x()});
    const double max_x = std::max({p[0].x(), p[1].x(), p[2].x()});
    const double min_y = std::min({p[0].y(), p[1].y(), p[2].y()});
    const double max_y = std::max({p[0].y(), p[1].y(), p[2].y()});
    const int x0 = std::max(0, int(std::floor(min_x - 0.5)));
    const int x1 = std::min(size - 1, int(std::ceil(max_x - 0.5)));
    const int y0 = std::max(0, int(std::floor(min_y - 0.5)));
    const int y1 = std::min(size - 1, int(std::ceil(max_y - 0.5)));

    const auto& face = mesh.faces[f];
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        const Vec2 q(ix + 0.5, iy + 0.5);
        const double b0 = cross2(p[1] - q, p[2] - q) / d;
        const double b1 = cross2(p[2] - q, p[0] - q) / d;
        const double b2 = cross2(p[0] - q, p[1] - q) / d;
        if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) continue;
        const int t = iy * size + ix;
        const bool strict =
            b0 > kInteriorEps && b1 > kInteriorEps && b2 > kInteriorEps;
        if (map.face[size_t(t)] >= 0) {
          if (strict && interior[size_t(t)]) ++map.overlap_count;
          continue;
        }
        map.face[size_t(t)] = int(f);
        interior[size_t(t)] = strict ? 1 : 0;
        map.position[size_t(t)] = b0 * mesh.vertices[size_t(face[0])] +
                                  b1 * mesh.vertices[size_t(face[1])] +
                                  b2 * mesh.vertices[size_t(face[2])];
        Vec3 n = b0 * normals[size_t(face[0])] + b1 * normals[size_t(face[1])] +
                 b2 * normals[size_t(face[2])];
        const double len = n.norm();
        if (len > 1e-12) {
          map.normal[size_t(t)] = n / len;
        } else {
          const Vec3 a = mesh.vertices[size_t(face[0])];
          const Vec3 fn = (mesh.vertices[size_t(face[1])] - a)
                              .cross(mesh.vertices[size_t(face[2])] - a);
          map.normal[size_t(t)] = fn.normalized();
        }
        ++map.covered_count;
      }
    }
  }
  return map;
}

void TextureAtlas::resize(int s) {
  size = s;
  color.assign(size_t(s) * s, Vec3::Zero());
  weight.assign(size_t(s) * s, 0.0);
  fill_pass.assign(size_t(s) * s, -1);
}

int backproject_view(TextureAtlas& atlas, const TexelMap& map, const TriMesh& mesh,
                     const ViewImage& view, int pass_id, const BackprojectOptions& options) {
  if (pass_id < 0) throw Error("backprojection pass id must be >= 0");
  return backproject_impl(&atlas, map, mesh, view, pass_id, options);
}

int count_new_texels(const TextureAtlas& atlas, const TexelMap& map, const TriMesh& mesh,
                     const ViewImage& view, const BackprojectOptions& options) {
  return count_impl(atlas, map, mesh, view, options);
}

std::vector<int> select_views(const std::vector<ViewImage>& views, const TexelMap& map,
                              const TriMesh& mesh, const BackprojectOptions& options) {
  std::vector<int> order;
  TextureAtlas sim;
  sim.resize(map.size);
  std::vector<bool> used(views.size(), false);

  for (size_t i = 0; i < views.size(); ++i) {
    if (!is_primary_tag(views[i].tag)) continue;
    order.push_back(int(i));
    used[i] = true;
    backproject_impl(&sim, map, mesh, views[i], 0, options);
  }
  for (int pass = 1;; ++pass) {
    int best = -1, best_count = 0;
    for (size_t i = 0; i < views.size(); ++i) {
      if (used[i]) continue;
      const int count = count_impl(sim, map, mesh, views[i], options);
      if (count > best_count) {
        best_count = count;
        best = int(i);
      }
    }
    if (best < 0) break;
    order.push_back(best);
    used[size_t(best)] = true;
    backproject_impl(&sim, map, mesh, views[size_t(best)], pass, options);
  }
  return order;
}

double finalize_texture(TextureAtlas& atlas, const TexelMap& map) {
  if (atlas.size != map.size) throw Error("texture atlas and texel map sizes differ");
  const int n = atlas.size * atlas.size;
  int filled_chart = 0;
  for (int t = 0; t < n; ++t) {
    if (atlas.filled(t) && atlas.weight[size_t(t)] > 0.0) {
      atlas.color[size_t(t)] /= atlas.weight[size_t(t)];
      atlas.color[size_t(t)] = atlas.color[size_t(t)].cwiseMax(0.0).cwiseMin(1.0);
      atlas.weight[size_t(t)] = 1.0;
      if (map.face[size_t(t)] >= 0) ++filled_chart;
    } else {
      atlas.fill_pass[size_t(t)] = -1;
    }
  }
  const double coverage =
      map.covered_count > 0 ? double(filled_chart) / map.covered_count : 0.0;

  // Breadth-first flood from every filled texel, so each empty texel takes the
  // color of (approximately) its nearest neighbor. Seeded in index order and
  // expanded in fixed neighbor order: deterministic.
  std::deque<int> queue;
  for (int t = 0; t < n; ++t)
    if (atlas.filled(t)) queue.push_back(t);
  const int w = atlas.size;
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const int t = queue.front();
    queue.pop_front();
    const int ix = t % w, iy = t / w;
    for (int k = 0; k < 4; ++k) {
      const int nx = ix + dx[k], ny = iy + dy[k];
      if (nx < 0 || nx >= w || ny < 0 || ny >= w) continue;
      const int nt = ny * w + nx;
      if (atlas.filled(nt)) continue;
      atlas.color[size_t(nt)] = atlas.color[size_t(t)];
      atlas.weight[size_t(nt)] = 1.0;
      atlas.fill_pass[size_t(nt)] = atlas.fill_pass[size_t(t)];
      queue.push_back(nt);
    }
  }
  for (int t = 0; t < n; ++t) {
    if (!atlas.filled(t)) {  // nothing was filled anywhere
      atlas.color[size_t(t)] = Vec3(0.5, 0.5, 0.5);
      atlas.weight[size_t(t)] = 1.0;
    }
  }
  return coverage;
}

Image atlas_to_image(const TextureAtlas& atlas) {
  Image img;
  img.width = atlas.size;
  img.height = atlas.size;
  img.channels = 3;
  img.data.resize(size_t(atlas.size) * atlas.size * 3);
  for (int t = 0; t < atlas.size * atlas.size; ++t)
    for (int c = 0; c < 3; ++c)
      img.data[size_t(t) * 3 + size_t(c)] = float(atlas.color[size_t(t)][c]);
  return img;
}

TextureResult backproject_texture(const TriMesh& mesh, const std::vector<ViewImage>& views,
                                  const BackprojectOptions& options) {
  if (views.empty()) throw Error("texture backprojection needs at least one view");
  const TexelMap map = rasterize_uv_points(mesh, options.atlas_size);

  TextureResult result;
  result.overlap_texels = map.overlap_count;
  result.view_order = select_views(views, map, mesh, options);

  TextureAtlas atlas;
  atlas.resize(map.size);
  int pass = 1;
  for (int idx : result.view_order) {
    const bool primary = is_primary_tag(views[size_t(idx)].tag);
    backproject_view(atlas, map, mesh, views[size_t(idx)], primary ? 0 : pass++, options);
  }
  result.coverage = finalize_texture(atlas, map);
  result.texture = atlas_to_image(atlas);
  return result;
}

void save_textured_obj(const TriMesh& mesh, const std::string& obj_path,
                       const std::string& texture_filename) {
  if (!mesh.has_uvs()) throw TopologyError("textured OBJ export requires UVs");
  const std::filesystem::path obj(obj_path);
  std::filesystem::path mtl = obj;
  mtl.replace_extension(".mtl");

  std::ofstream mtl_file(mtl, std::ios::trunc);
  if (!mtl_file) throw IoError("cannot open material file for writing: " + mtl.string());
  mtl_file << "newmtl textured\n"
           << "Ka 1.0 1.0 1.0\nKd 1.0 1.0 1.0\nKs 0.0 0.0 0.0\n"
           << "map_Kd " << texture_filename << "\n";
  if (!mtl_file) throw IoError("failed writing material file: " + mtl.string());

  std::ofstream obj_file(obj, std::ios::trunc);
  if (!obj_file) throw IoError("cannot open OBJ for writing: " + obj_path);
  obj_file << "mtllib " << mtl.filename().string() << "\n"
           << "usemtl textured\n"
           << write_obj_string(mesh);
  if (!obj_file) throw IoError("failed writing OBJ: " + obj_path);
}

}  // namespace garment
