#pragma once

#include <cstdint>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

// Pinhole camera. Looks from `position` toward `look_at`; image plane spans
// `vertical_fov` degrees vertically at `width` x `height` pixels.
struct Camera {
  Vec3 position{0, 0, 3};
  Vec3 look_at{0, 0, 0};
  Vec3 up{0, 1, 0};
  double vertical_fov = 75.0;  // degrees
  int width = 256;
  int height = 256;
  double near_plane = 1e-3;
  double far_plane = 1e3;

  void validate() const;  // throws Error on bad fov/planes/up
};

// Rigid world -> camera transform. The camera looks down -z; +x is right,
// +y is up in the image.
struct CameraFrame {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Vec3 to_camera(const Vec3& world) const { return R * world + t; }
};

CameraFrame camera_frame(const Camera& cam);

struct PixelPoint {
  Vec2 pixel = Vec2::Zero();  // (px, py), y down, origin top-left
  double depth = 0.0;         // -z_camera, positive in front
  bool in_front = false;      // depth > near_plane
};

// Projects a camera-space point to pixel coordinates.
PixelPoint project_to_pixel(const Camera& cam, const Vec3& cam_pos);

// Random view ring around the mesh: azimuth uniform in [0, 360) degrees,
// elevation uniform in [-20, 40] degrees, distance 2.2 x bounding-sphere
// radius, aimed at the centroid. Deterministic per seed.
std::vector<Camera> sample_cameras(std::uint64_t seed, int count, const TriMesh& mesh,
                                   int resolution = 256, double vertical_fov = 75.0);

// Fixed evaluation rig: `count` equally spaced azimuths at elevation 0.
std::vector<Camera> stratified_cameras(const TriMesh& mesh, int count = 36,
                                       int resolution = 512, double vertical_fov = 75.0);

}  // namespace garment
