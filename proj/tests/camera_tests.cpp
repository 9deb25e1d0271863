#include <cmath>

#include "doctest.h"
#include "garment/camera.hpp"
#include "garment/errors.hpp"
#include "support/fixtures.hpp"

using namespace garment;
using namespace garment::testfx;

TEST_CASE("sample_cameras is deterministic per seed") {
  const TriMesh mesh = make_icosphere(1);
  const auto a = sample_cameras(99, 8, mesh);
  const auto b = sample_cameras(99, 8, mesh);
  const auto c = sample_cameras(100, 8, mesh);
  REQUIRE(a.size() == 8);
  bool identical = true, differs = false;
  for (size_t i = 0; i < a.size(); ++i) {
    identical &= (a[i].position - b[i].position).norm() == 0.0;
    differs |= (a[i].position - c[i].position).norm() > 0.0;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("sampled cameras sit on the 2.2-radius ring looking at the centroid") {
  TriMesh mesh = make_icosphere(1, 0.4);
  similarity_transform(mesh, Vec3::Zero(), 1.0, Mat3::Identity());
  for (auto& v : mesh.vertices) v += Vec3(1.0, 2.0, -0.5);
  const Vec3 centroid = mesh.centroid();
  const double radius = mesh.bounding_radius();

  for (const Camera& cam : sample_cameras(7, 16, mesh)) {
    CHECK((cam.look_at - centroid).norm() < 1e-12);
    CHECK((cam.position - centroid).norm() == doctest::Approx(2.2 * radius).epsilon(1e-9));
    // Elevation band [-20, 40] degrees.
    const Vec3 d = (cam.position - centroid).normalized();
    const double elevation = std::asin(d.y()) * 180.0 / M_PI;
    CHECK(elevation >= -20.0 - 1e-9);
    CHECK(elevation <= 40.0 + 1e-9);
  }
}

TEST_CASE("stratified rig covers azimuths in 10-degree steps at elevation 0") {
  const TriMesh mesh = make_icosphere(1);
  const auto cams = stratified_cameras(mesh, 36, 512);
  REQUIRE(cams.size() == 36);
  for (size_t i = 0; i < cams.size(); ++i) {
    const Vec3 d = (cams[i].position - mesh.centroid()).normalized();
    CHECK(std::abs(d.y()) < 1e-12);  // elevation 0
    const double az = std::atan2(d.x(), d.z()) * 180.0 / M_PI;
    const double expect = 10.0 * double(i);
    const double delta = std::fmod(std::abs(az - expect) + 360.0, 360.0);
    CHECK(std::min(delta, 360.0 - delta) < 1e-9);
    CHECK(cams[i].width == 512);
    CHECK(cams[i].height == 512);
  }
}

TEST_CASE("every sampled camera keeps the bounding box inside the frustum") {
  TriMesh mesh = make_open_cylinder(12, 6);
  for (auto& v : mesh.vertices) v += Vec3(0.3, -0.1, 0.2);
  const Aabb box = mesh.bounds();

  for (const Camera& cam : sample_cameras(1234, 24, mesh)) {
    const CameraFrame frame = camera_frame(cam);
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 p((corner & 1) ? box.hi.x() : box.lo.x(),
                   (corner & 2) ? box.hi.y() : box.lo.y(),
                   (corner & 4) ? box.hi.z() : box.lo.z());
      const PixelPoint px = project_to_pixel(cam, frame.to_camera(p));
      CHECK(px.in_front);
      CHECK(px.pixel.x() >= 0.0);
      CHECK(px.pixel.y() >= 0.0);
      CHECK(px.pixel.x() <= double(cam.width));
      CHECK(px.pixel.y() <= double(cam.height));
    }
  }
}

TEST_CASE("projection geometry matches the pinhole model") {
  Camera cam;
  cam.position = Vec3(0, 0, 2);
  cam.look_at = Vec3::Zero();
  cam.width = cam.height = 200;
  cam.vertical_fov = 90.0;

  const CameraFrame frame = camera_frame(cam);
  // Optical axis hits the image center at depth 2.
  const PixelPoint center = project_to_pixel(cam, frame.to_camera(Vec3(0, 0, 0)));
  CHECK(center.in_front);
  CHECK(center.depth == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(center.pixel.x() == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(center.pixel.y() == doctest::Approx(100.0).epsilon(1e-9));

  // At fov 90 and depth 2, world y = 2 maps to the top image border.
  const PixelPoint top = project_to_pixel(cam, frame.to_camera(Vec3(0, 2, 0)));
  CHECK(top.pixel.y() == doctest::Approx(0.0).epsilon(1e-9));
  // +x in world maps right, +y maps up (pixel y decreases).
  const PixelPoint right = project_to_pixel(cam, frame.to_camera(Vec3(0.5, 0, 0)));
  CHECK(right.pixel.x() > 100.0);

  const PixelPoint behind = project_to_pixel(cam, frame.to_camera(Vec3(0, 0, 5)));
  CHECK_FALSE(behind.in_front);
}

TEST_CASE("camera validate rejects bad parameters") {
  Camera cam;
  cam.vertical_fov = 0.0;
  CHECK_THROWS_AS(cam.validate(), Error);
  cam = Camera{};
  cam.near_plane = 5.0;
  cam.far_plane = 1.0;
  CHECK_THROWS_AS(cam.validate(), Error);
  cam = Camera{};
  cam.up = Vec3(0, 0, -1);
  cam.position = Vec3(0, 0, 3);  // view direction parallel to up
  CHECK_THROWS_AS(cam.validate(), Error);
}
