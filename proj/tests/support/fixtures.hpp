#pragma once

#include <filesystem>
#include <string>

#include "garment/mesh.hpp"

namespace garment::testfx {

// Scratch directory deleted on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const;

 private:
  std::string path_;
};

// Flat grid in the z=0 plane spanning [0, size]^2 with nx*ny vertices.
TriMesh make_grid(int nx, int ny, double size = 1.0);

// Single triangle ((0,0,0), (1,0,0), (0,1,0)).
TriMesh make_triangle();

// Regular tetrahedron centered at the origin, outward orientation.
TriMesh make_tetrahedron(double radius = 1.0);

// Disk fan: one interior vertex at the origin ringed by `n` boundary
// vertices.  The only closed one-ring in the mesh is the center vertex.
TriMesh make_fan(int n = 8, double radius = 1.0);

// Icosphere by midpoint subdivision; 20 * 4^level faces.
TriMesh make_icosphere(int level, double radius = 1.0);

// Open tube around the y axis: `radial` segments, `rows` vertex rows,
// two boundary loops.
TriMesh make_open_cylinder(int radial, int rows, double radius = 0.5,
                           double y0 = -0.5, double y1 = 0.5);

// Closed unit cube ([-0.5, 0.5]^3, 12 faces).  With UVs, each face pair
// gets its own chart in a 3x2 atlas layout.
TriMesh make_cube(bool with_uvs = false);

// Lat/long sphere with seam-duplicated equirectangular UVs.
// `az` azimuth segments, `el` polar segments (>= 3 each).
TriMesh make_uv_sphere(int az, int el, double radius = 1.0);

// Icosphere with four disk-shaped holes (neck, waist, both arms): an
// open, single-component stand-in for a garment.  level 4 -> ~4.6k faces.
TriMesh make_shirt(int level = 4, double radius = 1.0);

// Applies x -> center + scale * R * (x - center) in place.
void similarity_transform(TriMesh& mesh, const Vec3& center, double scale,
                          const Mat3& rotation);

Mat3 yaw_matrix(double degrees);

// Brute-force references used as oracles.
Vec3 closest_point_on_triangle_ref(const Vec3& p, const Vec3& a, const Vec3& b,
                                   const Vec3& c);
double closest_dist2_ref(const TriMesh& mesh, const Vec3& p);

}  // namespace garment::testfx
