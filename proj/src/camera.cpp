#include "garment/camera.hpp"

#include <cmath>

#include "garment/errors.hpp"
#include "garment/rng.hpp"

namespace garment {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void Camera::validate() const {
  if (!(vertical_fov > 0.0 && vertical_fov < 180.0))
    throw Error("camera fov must be in (0, 180) degrees");
  if (!(near_plane > 0.0 && near_plane < far_plane))
    throw Error("camera requires 0 < near < far");
  if (width < 1 || height < 1) throw Error("camera resolution must be positive");
  const Vec3 dir = look_at - position;
  if (dir.norm() <= 0.0) throw Error("camera position coincides with look_at");
  if (dir.cross(up).norm() <= 1e-12 * dir.norm() * up.norm())
    throw Error("camera up vector is parallel to the view direction");
}

CameraFrame camera_frame(const Camera& cam) {
  cam.validate();
  const Vec3 f = (cam.look_at - cam.position).normalized();
  const Vec3 s = f.cross(cam.up).normalized();
  const Vec3 u = s.cross(f);
  CameraFrame frame;
  frame.R.row(0) = s.transpose();
  frame.R.row(1) = u.transpose();
  frame.R.row(2) = -f.transpose();
  frame.t = -frame.R * cam.position;
  return frame;
}

PixelPoint project_to_pixel(const Camera& cam, const Vec3& cam_pos) {
  PixelPoint out;
  out.depth = -cam_pos.z();
  out.in_front = out.depth > cam.near_plane;
  const double d = out.depth;
  if (std::abs(d) < 1e-300) return out;  // pixel stays zero; caller checks in_front
  const double tan_half = std::tan(0.5 * cam.vertical_fov * kPi / 180.0);
  const double aspect = double(cam.width) / double(cam.height);
  const double ndc_x = cam_pos.x() / (d * tan_half * aspect);
  const double ndc_y = cam_pos.y() / (d * tan_half);
  out.pixel.x() = (ndc_x * 0.5 + 0.5) * cam.width;
  out.pixel.y() = (0.5 - ndc_y * 0.5) * cam.height;
  return out;
}

namespace {

Camera orbit_camera(const TriMesh& mesh, double azimuth_deg, double elevation_deg,
                    int resolution, double vertical_fov) {
  const Vec3 center = mesh.centroid();
  const double radius = 2.2 * std::max(mesh.bounding_radius(), 1e-9);
  const double az = azimuth_deg * kPi / 180.0;
  const double el = elevation_deg * kPi / 180.0;
  Camera cam;
  cam.look_at = center;
  cam.position = center + radius * Vec3(std::cos(el) * std::sin(az), std::sin(el),
                                        std::cos(el) * std::cos(az));
  cam.up = Vec3(0, 1, 0);
  cam.vertical_fov = vertical_fov;
  cam.width = cam.height = resolution;
  cam.near_plane = 1e-3 * radius;
  cam.far_plane = 1e3 * radius;
  return cam;
}

}  // namespace

std::vector<Camera> sample_cameras(std::uint64_t seed, int count, const TriMesh& mesh,
                                   int resolution, double vertical_fov) {
  if (count < 1) throw Error("camera count must be >= 1");
  Rng rng(seed);
  std::vector<Camera> cams;
  cams.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double az = rng.uniform(0.0, 360.0);
    const double el = rng.uniform(-20.0, 40.0);
    cams.push_back(orbit_camera(mesh, az, el, resolution, vertical_fov));
  }
  return cams;
}

std::vector<Camera> stratified_cameras(const TriMesh& mesh, int count, int resolution,
                                       double vertical_fov) {
  if (count < 1) throw Error("camera count must be >= 1");
  std::vector<Camera> cams;
  cams.reserve(count);
  for (int i = 0; i < count; ++i)
    cams.push_back(orbit_camera(mesh, 360.0 * i / count, 0.0, resolution, vertical_fov));
  return cams;
}

}  // namespace garment
