#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "garment/errors.hpp"
#include "garment/mesh.hpp"
#include "garment/texture.hpp"
#include "support/fixtures.hpp"

using namespace garment;
using namespace garment::testfx;

namespace {

// One triangle in the z = 0 plane whose chart covers the whole UV square:
// uv corners (0,0), (2,0), (0,2) put every texel center strictly inside.
TriMesh make_square_chart_triangle() {
  TriMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.faces = {{0, 1, 2}};
  m.uvs = {Vec2(0, 0), Vec2(2, 0), Vec2(0, 2)};
  m.uv_faces = {{0, 1, 2}};
  return m;
}

// Two facing-+z panels, x in [-2,-1] and [1,2], with disjoint UV charts.
TriMesh make_panels() {
  TriMesh m;
  m.vertices = {Vec3(-2, -0.5, 0), Vec3(-1, -0.5, 0), Vec3(-1, 0.5, 0), Vec3(-2, 0.5, 0),
                Vec3(1, -0.5, 0),  Vec3(2, -0.5, 0),  Vec3(2, 0.5, 0),  Vec3(1, 0.5, 0)};
  m.faces = {{0, 1, 2}, {0, 2, 3}, {4, 5, 6}, {4, 6, 7}};
  m.uvs = {Vec2(0.05, 0.05), Vec2(0.45, 0.05), Vec2(0.45, 0.95), Vec2(0.05, 0.95),
           Vec2(0.55, 0.05), Vec2(0.95, 0.05), Vec2(0.95, 0.95), Vec2(0.55, 0.95)};
  m.uv_faces = m.faces;
  return m;
}

Camera look_down(const Vec3& position, const Vec3& target, double fov, int res) {
  Camera cam;
  cam.position = position;
  cam.look_at = target;
  cam.vertical_fov = fov;
  cam.width = res;
  cam.height = res;
  return cam;
}

Image solid_image(int side, const Vec3& rgb) {
  Image img(side, side, 3);
  for (int i = 0; i < side * side; ++i)
    for (int c = 0; c < 3; ++c) img.data[size_t(i) * 3 + size_t(c)] = float(rgb[c]);
  return img;
}

}  // namespace

TEST_CASE("a full-square chart maps every texel to the surface") {
  const TriMesh mesh = make_square_chart_triangle();
  const int size = 16;
  const TexelMap map = rasterize_uv_points(mesh, size);

  CHECK(map.covered_count == size * size);
  CHECK(map.overlap_count == 0);
  for (int iy = 0; iy < size; ++iy) {
    for (int ix = 0; ix < size; ++ix) {
      const int t = iy * size + ix;
      REQUIRE(map.face[size_t(t)] == 0);
      const double u = (ix + 0.5) / size;
      const double v = 1.0 - (iy + 0.5) / size;
      // Chart uvs are doubled, so the surface point is (u/2, v/2, 0).
      CHECK((map.position[size_t(t)] - Vec3(u / 2, v / 2, 0)).norm() < 1e-12);
      CHECK((map.normal[size_t(t)] - Vec3(0, 0, 1)).norm() < 1e-12);
    }
  }
  // Row 0 corresponds to v ~= 1 (image row order).
  CHECK(map.position[0].y() > map.position[size_t(size * (size - 1))].y());
}

TEST_CASE("uv rasterization requires a chart and a sane size") {
  CHECK_THROWS_AS(rasterize_uv_points(make_triangle(), 16), TopologyError);
  CHECK_THROWS_AS(rasterize_uv_points(make_square_chart_triangle(), 0), Error);
}

TEST_CASE("cube chart texels sit on the cube surface") {
  const TriMesh cube = make_cube(/*with_uvs=*/true);
  const int size = 64;
  const TexelMap map = rasterize_uv_points(cube, size);
  CHECK(map.overlap_count == 0);

  // Six charts of (1/3 - 0.04) x (1/2 - 0.04) each.
  const double chart_area = 6.0 * (1.0 / 3.0 - 0.04) * (0.5 - 0.04);
  CHECK(double(map.covered_count) / map.texel_count() ==
        doctest::Approx(chart_area).epsilon(0.05));

  for (int t = 0; t < map.texel_count(); ++t) {
    if (map.face[size_t(t)] < 0) continue;
    const Vec3& p = map.position[size_t(t)];
    CHECK(p.cwiseAbs().maxCoeff() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(map.normal[size_t(t)].norm() == doctest::Approx(1.0).epsilon(1e-9));
    // Smooth normals tilt near corners but stay in the face's hemisphere.
    const auto& f = cube.faces[size_t(map.face[size_t(t)])];
    const Vec3 a = cube.vertices[size_t(f[0])];
    const Vec3 fn = (cube.vertices[size_t(f[1])] - a).cross(cube.vertices[size_t(f[2])] - a);
    CHECK(map.normal[size_t(t)].dot(fn.normalized()) > 0.3);
  }
}

TEST_CASE("overlapping charts are counted") {
  TriMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0),
                Vec3(0, 0, 2), Vec3(1, 0, 2), Vec3(0, 1, 2)};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  m.uvs = {Vec2(0.1, 0.1), Vec2(0.9, 0.1), Vec2(0.1, 0.9),
           Vec2(0.15, 0.15), Vec2(0.85, 0.15), Vec2(0.15, 0.85)};
  m.uv_faces = {{0, 1, 2}, {3, 4, 5}};
  const TexelMap map = rasterize_uv_points(m, 64);
  CHECK(map.overlap_count > 0);
  // First face wins the contested texels.
  int owned_by_second_inside_first = 0;
  for (int t = 0; t < map.texel_count(); ++t)
    if (map.face[size_t(t)] == 1) ++owned_by_second_inside_first;
  CHECK(owned_by_second_inside_first == 0);  // chart 1 lies entirely inside chart 0
}

TEST_CASE("a constant view paints claimed texels exactly") {
  const TriMesh mesh = make_square_chart_triangle();
  const TexelMap map = rasterize_uv_points(mesh, 32);
  TextureAtlas atlas;
  atlas.resize(32);

  ViewImage view;
  view.camera = look_down(Vec3(0.25, 0.25, 2.0), Vec3(0.25, 0.25, 0.0), 40.0, 128);
  view.rgb = solid_image(128, Vec3(0, 1, 0));
  const int newly = backproject_view(atlas, map, mesh, view, 0);
  CHECK(newly > int(0.8 * map.texel_count()));

  // Counting against the now-filled atlas claims nothing new.
  CHECK(count_new_texels(atlas, map, mesh, view) == 0);

  finalize_texture(atlas, map);
  for (int t = 0; t < map.texel_count(); ++t)
    CHECK((atlas.color[size_t(t)] - Vec3(0, 1, 0)).cwiseAbs().maxCoeff() < 1e-6);

  const Image img = atlas_to_image(atlas);
  REQUIRE(img.width == 32);
  REQUIRE(img.channels == 3);
  CHECK(img.at(5, 5, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("count_new_texels equals a dry backprojection") {
  const TriMesh mesh = make_square_chart_triangle();
  const TexelMap map = rasterize_uv_points(mesh, 32);
  ViewImage view;
  view.camera = look_down(Vec3(0.25, 0.25, 2.0), Vec3(0.25, 0.25, 0.0), 40.0, 96);
  view.rgb = solid_image(96, Vec3(1, 0, 0));

  TextureAtlas empty;
  empty.resize(32);
  const int predicted = count_new_texels(empty, map, mesh, view);
  TextureAtlas atlas;
  atlas.resize(32);
  CHECK(backproject_view(atlas, map, mesh, view, 0) == predicted);
}

TEST_CASE("occluded texels are not painted") {
  // The chart triangle plus a rectangle hovering at z = 1 shadowing x <= 0.25.
  TriMesh mesh = make_square_chart_triangle();
  mesh.vertices.insert(mesh.vertices.end(), {Vec3(-10, -10, 1), Vec3(0.25, -10, 1),
                                             Vec3(0.25, 10, 1), Vec3(-10, 10, 1)});
  mesh.uvs.push_back(Vec2(0.9, 0.9));  // degenerate chart: occluder owns no texels
  mesh.faces.push_back({3, 4, 5});
  mesh.faces.push_back({3, 5, 6});
  mesh.uv_faces.push_back({3, 3, 3});
  mesh.uv_faces.push_back({3, 3, 3});

  const int size = 32;
  const TexelMap map = rasterize_uv_points(mesh, size);
  TextureAtlas atlas;
  atlas.resize(size);
  ViewImage view;
  view.camera = look_down(Vec3(0.25, 0.25, 3.0), Vec3(0.25, 0.25, 0.0), 45.0, 128);
  view.rgb = solid_image(128, Vec3(1, 1, 0));
  backproject_view(atlas, map, mesh, view, 0);

  // The camera ray through surface x crosses the occluder plane at
  // 0.25 + (x - 0.25) * 2/3, so the shadow boundary sits at x = 0.25.
  for (int iy = 7; iy <= 24; ++iy) {
    for (int ix = 0; ix < size; ++ix) {
      const int t = iy * size + ix;
      const double x = map.position[size_t(t)].x();
      if (x < 0.2) CHECK(!atlas.filled(t));
      if (x > 0.3 && x < 0.48) CHECK(atlas.filled(t));
    }
  }
}

TEST_CASE("views sharing a pass blend by facing weight") {
  const TriMesh mesh = make_square_chart_triangle();
  const int size = 32;
  const TexelMap map = rasterize_uv_points(mesh, size);
  TextureAtlas atlas;
  atlas.resize(size);

  ViewImage left, right;
  left.camera = look_down(Vec3(-0.5, 0.25, 1.5), Vec3(0.25, 0.25, 0.0), 75.0, 256);
  left.rgb = solid_image(256, Vec3(1, 0, 0));
  right.camera = look_down(Vec3(1.0, 0.25, 1.5), Vec3(0.25, 0.25, 0.0), 75.0, 256);
  right.rgb = solid_image(256, Vec3(0, 0, 1));
  backproject_view(atlas, map, mesh, left, 0);
  backproject_view(atlas, map, mesh, right, 0);

  finalize_texture(atlas, map);
  int checked = 0;
  for (int iy = 10; iy <= 20; ++iy) {
    for (int ix = 2; ix < size - 2; ++ix) {
      const int t = iy * size + ix;
      const Vec3& c = atlas.color[size_t(t)];
      if (c.x() == 0.0 || c.z() == 0.0) continue;  // seen by only one view
      const Vec3& p = map.position[size_t(t)];
      const double fl = (left.camera.position - p).normalized().z();
      const double fr = (right.camera.position - p).normalized().z();
      CHECK(c.x() + c.z() == doctest::Approx(1.0).epsilon(1e-5));
      CHECK(c.y() == doctest::Approx(0.0).epsilon(1e-6));
      CHECK(c.x() == doctest::Approx(fl / (fl + fr)).epsilon(1e-4));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("later passes never overwrite texels claimed earlier") {
  const TriMesh mesh = make_square_chart_triangle();
  const TexelMap map = rasterize_uv_points(mesh, 32);
  TextureAtlas atlas;
  atlas.resize(32);
  ViewImage red, blue;
  red.camera = look_down(Vec3(0.25, 0.25, 2.0), Vec3(0.25, 0.25, 0.0), 40.0, 96);
  red.rgb = solid_image(96, Vec3(1, 0, 0));
  blue = red;
  blue.rgb = solid_image(96, Vec3(0, 0, 1));

  const int first = backproject_view(atlas, map, mesh, red, 0);
  const std::vector<Vec3> snapshot = atlas.color;
  const int second = backproject_view(atlas, map, mesh, blue, 1);  // all contested
  CHECK(first > 0);
  CHECK(second == 0);
  for (size_t t = 0; t < snapshot.size(); ++t)
    CHECK((atlas.color[t] - snapshot[t]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("view selection runs front and back first, then greedy by new texels") {
  const TriMesh panels = make_panels();
  const TexelMap map = rasterize_uv_points(panels, 64);

  ViewImage center, left, right;
  center.camera = look_down(Vec3(0, 0, 6), Vec3(0, 0, 0), 50.0, 128);
  center.rgb = solid_image(128, Vec3(1, 1, 1));
  left.camera = look_down(Vec3(-1.5, 0, 2), Vec3(-1.5, 0, 0), 40.0, 128);
  left.rgb = solid_image(128, Vec3(1, 0, 0));
  right.camera = look_down(Vec3(1.5, 0, 2), Vec3(1.5, 0, 0), 40.0, 128);
  right.rgb = solid_image(128, Vec3(0, 0, 1));

  SUBCASE("greedy picks the widest view, then stops once nothing is new") {
    const std::vector<ViewImage> views = {left, center, right};
    const std::vector<int> order = select_views(views, map, panels);
    REQUIRE(!order.empty());
    CHECK(order[0] == 1);  // center sees both panels
    CHECK(order.size() <= 3);
    const std::set<int> unique(order.begin(), order.end());
    CHECK(unique.size() == order.size());
  }

  SUBCASE("a tied count picks the lowest view index") {
    ViewImage right_cropped = right;
    right_cropped.camera.vertical_fov = 20.0;  // sees only part of its panel
    const std::vector<ViewImage> views = {left, left, right_cropped};
    const std::vector<int> order = select_views(views, map, panels);
    REQUIRE(order.size() == 2);
    CHECK(order[0] == 0);  // exact tie with index 1, which then never adds texels
    CHECK(order[1] == 2);
  }

  SUBCASE("front/back tags jump the queue in index order") {
    ViewImage front = right;
    front.tag = "front";
    ViewImage back = center;
    back.tag = "back";
    const std::vector<ViewImage> views = {back, front, left};
    const std::vector<int> order = select_views(views, map, panels);
    REQUIRE(order.size() >= 2);
    CHECK(order[0] == 0);
    CHECK(order[1] == 1);
    for (size_t i = 2; i < order.size(); ++i) CHECK(order[i] == 2);
  }
}

TEST_CASE("finalize normalizes, floods from the nearest seeds, and reports coverage") {
  TexelMap map;
  map.size = 8;
  map.face.assign(64, -1);
  map.position.assign(64, Vec3::Zero());
  map.normal.assign(64, Vec3::UnitZ());
  for (int iy = 2; iy <= 5; ++iy)
    for (int ix = 2; ix <= 5; ++ix) map.face[size_t(iy * 8 + ix)] = 0;
  map.covered_count = 16;

  TextureAtlas atlas;
  atlas.resize(8);
  const int red_t = 3 * 8 + 3, green_t = 4 * 8 + 4;
  atlas.fill_pass[red_t] = 2;
  atlas.color[red_t] = Vec3(2, 0, 0);  // weighted sum awaiting normalization
  atlas.weight[red_t] = 2.0;
  atlas.fill_pass[green_t] = 0;
  atlas.color[green_t] = Vec3(0, 0.5, 0);
  atlas.weight[green_t] = 1.0;

  const double coverage = finalize_texture(atlas, map);
  CHECK(coverage == doctest::Approx(2.0 / 16.0));
  CHECK((atlas.color[red_t] - Vec3(1, 0, 0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((atlas.color[green_t] - Vec3(0, 0.5, 0)).cwiseAbs().maxCoeff() == 0.0);
  for (int t = 0; t < 64; ++t) {
    CHECK(atlas.weight[size_t(t)] == 1.0);
    const Vec3& c = atlas.color[size_t(t)];
    const bool red = (c - Vec3(1, 0, 0)).norm() == 0.0;
    const bool green = (c - Vec3(0, 0.5, 0)).norm() == 0.0;
    CHECK((red || green));
  }
  CHECK((atlas.color[3 * 8 + 2] - Vec3(1, 0, 0)).norm() == 0.0);    // beside the red seed
  CHECK((atlas.color[4 * 8 + 5] - Vec3(0, 0.5, 0)).norm() == 0.0);  // beside the green seed
  CHECK(atlas.fill_pass[3 * 8 + 2] == 2);  // flood copies provenance
}

TEST_CASE("an empty atlas finalizes to neutral gray with zero coverage") {
  TexelMap map;
  map.size = 4;
  map.face.assign(16, 0);
  map.position.assign(16, Vec3::Zero());
  map.normal.assign(16, Vec3::UnitZ());
  map.covered_count = 16;
  TextureAtlas atlas;
  atlas.resize(4);
  CHECK(finalize_texture(atlas, map) == 0.0);
  for (int t = 0; t < 16; ++t)
    CHECK((atlas.color[size_t(t)] - Vec3(0.5, 0.5, 0.5)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-view colors reproduce the sampled image") {
  const TriMesh mesh = make_square_chart_triangle();
  const int size = 24;
  const TexelMap map = rasterize_uv_points(mesh, size);
  TextureAtlas atlas;
  atlas.resize(size);

  ViewImage view;
  view.camera = look_down(Vec3(0.25, 0.25, 2.0), Vec3(0.25, 0.25, 0.0), 40.0, 160);
  Image ramp(160, 160, 3);
  for (int y = 0; y < 160; ++y)
    for (int x = 0; x < 160; ++x) {
      ramp.at(x, y, 0) = float(x) / 159.0f;
      ramp.at(x, y, 1) = float(y) / 159.0f;
      ramp.at(x, y, 2) = 0.25f;
    }
  view.rgb = ramp;
  backproject_view(atlas, map, mesh, view, 0);
  finalize_texture(atlas, map);

  const CameraFrame frame = camera_frame(view.camera);
  int checked = 0;
  for (int t = 0; t < map.texel_count(); ++t) {
    if (!atlas.filled(t)) continue;
    const PixelPoint pp = project_to_pixel(view.camera, frame.to_camera(map.position[size_t(t)]));
    const double px = pp.pixel.x() * 160.0 / view.camera.width;
    const double py = pp.pixel.y() * 160.0 / view.camera.height;
    CHECK(double(atlas.color[size_t(t)].x()) ==
          doctest::Approx(double(ramp.sample_bilinear(px, py, 0))).epsilon(1e-5));
    CHECK(double(atlas.color[size_t(t)].y()) ==
          doctest::Approx(double(ramp.sample_bilinear(px, py, 1))).epsilon(1e-5));
    CHECK(double(atlas.color[size_t(t)].z()) == doctest::Approx(0.25).epsilon(1e-5));
    ++checked;
  }
  CHECK(checked > 400);
}

TEST_CASE("the one-call texture pipeline covers a cube from six views") {
  const TriMesh cube = make_cube(/*with_uvs=*/true);
  const Vec3 axes[6] = {Vec3(1, 0, 0),  Vec3(-1, 0, 0), Vec3(0, 1, 0),
                        Vec3(0, -1, 0), Vec3(0, 0, 1),  Vec3(0, 0, -1)};
  std::vector<ViewImage> views;
  for (int i = 0; i < 6; ++i) {
    ViewImage v;
    v.camera.position = 2.0 * axes[i];
    v.camera.look_at = Vec3::Zero();
    v.camera.up = i == 2 ? Vec3(1, 0, 0) : (i == 3 ? Vec3(1, 0, 0) : Vec3(0, 1, 0));
    v.camera.vertical_fov = 50.0;
    v.camera.width = v.camera.height = 96;
    v.rgb = solid_image(96, Vec3(double(i + 1) / 6.0, 0.5, 1.0 - double(i + 1) / 6.0));
    views.push_back(v);
  }
  views[4].tag = "front";
  views[5].tag = "back";

  BackprojectOptions options;
  options.atlas_size = 96;
  const TextureResult result = backproject_texture(cube, views, options);
  CHECK(result.coverage > 0.9);
  CHECK(result.overlap_texels == 0);
  REQUIRE(result.view_order.size() >= 2);
  CHECK(result.view_order[0] == 4);  // primaries first, ascending index
  CHECK(result.view_order[1] == 5);
  const std::set<int> unique(result.view_order.begin(), result.view_order.end());
  CHECK(unique.size() == result.view_order.size());
  CHECK(result.texture.width == 96);
  CHECK(result.texture.channels == 3);

  CHECK_THROWS_AS(backproject_texture(cube, {}, options), Error);
}

TEST_CASE("textured obj export writes a material that references the map") {
  TempDir dir;
  const TriMesh cube = make_cube(/*with_uvs=*/true);
  const std::string obj_path = dir.file("mesh.obj");
  save_textured_obj(cube, obj_path, "skin.png");

  const TriMesh back = load_obj(obj_path);
  CHECK(back.faces == cube.faces);
  CHECK(back.uv_faces == cube.uv_faces);

  std::ifstream mtl(dir.file("mesh.mtl"));
  REQUIRE(bool(mtl));
  std::string text((std::istreambuf_iterator<char>(mtl)), std::istreambuf_iterator<char>());
  CHECK(text.find("map_Kd skin.png") != std::string::npos);

  CHECK_THROWS_AS(save_textured_obj(make_triangle(), dir.file("x.obj"), "t.png"),
                  TopologyError);
}
