#include "support/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>

namespace fs = std::filesystem;

namespace garment::testfx {

TempDir::TempDir() {
  std::random_device rd;
  std::uniform_int_distribution<uint64_t> dist;
  for (int attempt = 0; attempt < 16; ++attempt) {
    fs::path candidate =
        fs::temp_directory_path() / ("garment-test-" + std::to_string(dist(rd)));
    std::error_code ec;
    if (fs::create_directory(candidate, ec)) {
      path_ = candidate.string();
      return;
    }
  }
  throw std::runtime_error("could not create temp directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string TempDir::file(const std::string& name) const {
  return (fs::path(path_) / name).string();
}

TriMesh make_grid(int nx, int ny, double size) {
  TriMesh mesh;
  mesh.name = "grid";
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      mesh.vertices.emplace_back(size * i / (nx - 1), size * j / (ny - 1), 0.0);
  auto idx = [&](int i, int j) { return j * nx + i; };
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      mesh.faces.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      mesh.faces.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  return mesh;
}

TriMesh make_triangle() {
  TriMesh mesh;
  mesh.name = "triangle";
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  mesh.faces = {{0, 1, 2}};
  return mesh;
}

TriMesh make_tetrahedron(double radius) {
  TriMesh mesh;
  mesh.name = "tetrahedron";
  const double s = radius / std::sqrt(3.0);
  mesh.vertices = {Vec3(s, s, s), Vec3(s, -s, -s), Vec3(-s, s, -s), Vec3(-s, -s, s)};
  mesh.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return mesh;
}

TriMesh make_fan(int n, double radius) {
  TriMesh mesh;
  mesh.name = "fan";
  mesh.vertices.emplace_back(0, 0, 0);
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * M_PI * k / n;
    mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  for (int k = 0; k < n; ++k) mesh.faces.push_back({0, 1 + k, 1 + (k + 1) % n});
  return mesh;
}

TriMesh make_icosphere(int level, double radius) {
  // Icosahedron from three orthogonal golden rectangles.
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
      {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
      {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
      {8, 6, 7},  {9, 8, 1}};
  for (auto& v : verts) v.normalize();

  for (int step = 0; step < level; ++step) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriMesh mesh;
  mesh.name = "icosphere";
  mesh.vertices.reserve(verts.size());
  for (const auto& v : verts) mesh.vertices.push_back(v * radius);
  mesh.faces = std::move(faces);
  return mesh;
}

TriMesh make_open_cylinder(int radial, int rows, double radius, double y0, double y1) {
  TriMesh mesh;
  mesh.name = "cylinder";
  for (int j = 0; j < rows; ++j) {
    const double y = y0 + (y1 - y0) * j / (rows - 1);
    for (int k = 0; k < radial; ++k) {
      const double a = 2.0 * M_PI * k / radial;
      mesh.vertices.emplace_back(radius * std::cos(a), y, radius * std::sin(a));
    }
  }
  auto idx = [&](int j, int k) { return j * radial + (k % radial); };
  for (int j = 0; j + 1 < rows; ++j)
    for (int k = 0; k < radial; ++k) {
      // Outward orientation: +y up, vertices wind counterclockwise seen from outside.
      mesh.faces.push_back({idx(j, k), idx(j + 1, k), idx(j + 1, k + 1)});
      mesh.faces.push_back({idx(j, k), idx(j + 1, k + 1), idx(j, k + 1)});
    }
  return mesh;
}

TriMesh make_cube(bool with_uvs) {
  TriMesh mesh;
  mesh.name = "cube";
  for (int i = 0; i < 8; ++i)
    mesh.vertices.emplace_back((i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5,
                               (i & 4) ? 0.5 : -0.5);
  // Quad per axis-aligned face, outward counterclockwise winding.
  const std::array<std::array<int, 4>, 6> quads = {{
      {1, 3, 7, 5},  // +x
      {2, 0, 4, 6},  // -x
      {2, 6, 7, 3},  // +y
      {0, 1, 5, 4},  // -y
      {4, 5, 7, 6},  // +z
      {1, 0, 2, 3},  // -z
  }};
  for (int q = 0; q < 6; ++q) {
    const auto& v = quads[q];
    mesh.faces.push_back({v[0], v[1], v[2]});
    mesh.faces.push_back({v[0], v[2], v[3]});
    if (with_uvs) {
      // One chart per cube face in a 3x2 layout, inset to keep charts disjoint.
      const double u0 = (q % 3) / 3.0 + 0.02, v0 = (q / 3) / 2.0 + 0.02;
      const double u1 = (q % 3 + 1) / 3.0 - 0.02, v1 = (q / 3 + 1) / 2.0 - 0.02;
      const int base = static_cast<int>(mesh.uvs.size());
      mesh.uvs.emplace_back(u0, v0);
      mesh.uvs.emplace_back(u1, v0);
      mesh.uvs.emplace_back(u1, v1);
      mesh.uvs.emplace_back(u0, v1);
      mesh.uv_faces.push_back({base, base + 1, base + 2});
      mesh.uv_faces.push_back({base, base + 2, base + 3});
    }
  }
  return mesh;
}

TriMesh make_uv_sphere(int az, int el, double radius) {
  TriMesh mesh;
  mesh.name = "uv_sphere";
  // Interior rings i = 1..el-1, duplicated-seam UV grid with az+1 columns.
  auto ring_vertex = [&](int i, int k) { return (i - 1) * az + (k % az); };
  for (int i = 1; i < el; ++i) {
    const double theta = M_PI * i / el;
    for (int k = 0; k < az; ++k) {
      const double phi = 2.0 * M_PI * k / az;
      mesh.vertices.emplace_back(radius * std::sin(theta) * std::cos(phi),
                                 radius * std::cos(theta),
                                 radius * std::sin(theta) * std::sin(phi));
    }
  }
  const int top = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0, radius, 0);
  const int bottom = top + 1;
  mesh.vertices.emplace_back(0, -radius, 0);

  auto grid_uv = [&](int i, int k) {  // i in [0, el], k in [0, az]
    const int id = static_cast<int>(mesh.uvs.size());
    mesh.uvs.emplace_back(double(k) / az, 1.0 - double(i) / el);
    return id;
  };
  std::vector<std::vector<int>> uv_grid(el + 1, std::vector<int>(az + 1, -1));
  auto uv_at = [&](int i, int k) {
    if (uv_grid[i][k] < 0) uv_grid[i][k] = grid_uv(i, k);
    return uv_grid[i][k];
  };
  auto pole_uv = [&](int i, int k) {  // centered over the band below/above
    const int id = static_cast<int>(mesh.uvs.size());
    mesh.uvs.emplace_back((k + 0.5) / az, 1.0 - double(i) / el);
    return id;
  };

  for (int k = 0; k < az; ++k) {
    mesh.faces.push_back({top, ring_vertex(1, k + 1), ring_vertex(1, k)});
    mesh.uv_faces.push_back({pole_uv(0, k), uv_at(1, k + 1), uv_at(1, k)});
    mesh.faces.push_back({bottom, ring_vertex(el - 1, k), ring_vertex(el - 1, k + 1)});
    mesh.uv_faces.push_back({pole_uv(el, k), uv_at(el - 1, k), uv_at(el - 1, k + 1)});
  }
  for (int i = 1; i + 1 < el; ++i)
    for (int k = 0; k < az; ++k) {
      mesh.faces.push_back({ring_vertex(i, k), ring_vertex(i, k + 1), ring_vertex(i + 1, k + 1)});
      mesh.uv_faces.push_back({uv_at(i, k), uv_at(i, k + 1), uv_at(i + 1, k + 1)});
      mesh.faces.push_back({ring_vertex(i, k), ring_vertex(i + 1, k + 1), ring_vertex(i + 1, k)});
      mesh.uv_faces.push_back({uv_at(i, k), uv_at(i + 1, k + 1), uv_at(i + 1, k)});
    }
  return mesh;
}

namespace {

// Drops vertices not referenced by any face and remaps face indices.
void compact_vertices(TriMesh& mesh) {
  std::vector<int> remap(mesh.vertices.size(), -1);
  std::vector<Vec3> kept;
  for (auto& f : mesh.faces)
    for (int& v : f) {
      if (remap[v] < 0) {
        remap[v] = static_cast<int>(kept.size());
        kept.push_back(mesh.vertices[v]);
      }
      v = remap[v];
    }
  mesh.vertices = std::move(kept);
}

}  // namespace

TriMesh make_shirt(int level, double radius) {
  TriMesh mesh = make_icosphere(level, radius);
  mesh.name = "shirt";
  struct Cone {
    Vec3 dir;
    double cos_half;
  };
  const Cone holes[] = {
      {Vec3(0, 1, 0), std::cos(25.0 * M_PI / 180.0)},    // neck
      {Vec3(0, -1, 0), std::cos(30.0 * M_PI / 180.0)},   // waist
      {Vec3(1, 0, 0), std::cos(20.0 * M_PI / 180.0)},    // right arm
      {Vec3(-1, 0, 0), std::cos(20.0 * M_PI / 180.0)},   // left arm
  };
  auto inside_hole = [&](const Vec3& v) {
    const Vec3 d = v.normalized();
    for (const auto& c : holes)
      if (d.dot(c.dir) > c.cos_half) return true;
    return false;
  };
  std::vector<std::array<int, 3>> kept;
  for (const auto& f : mesh.faces) {
    const bool removed = inside_hole(mesh.vertices[f[0]]) &&
                         inside_hole(mesh.vertices[f[1]]) &&
                         inside_hole(mesh.vertices[f[2]]);
    if (!removed) kept.push_back(f);
  }
  mesh.faces = std::move(kept);
  compact_vertices(mesh);
  return mesh;
}

void similarity_transform(TriMesh& mesh, const Vec3& center, double scale,
                          const Mat3& rotation) {
  for (auto& v : mesh.vertices) v = center + scale * (rotation * (v - center));
}

Mat3 yaw_matrix(double degrees) {
  return Eigen::AngleAxisd(degrees * M_PI / 180.0, Vec3::UnitY()).toRotationMatrix();
}

Vec3 closest_point_on_triangle_ref(const Vec3& p, const Vec3& a, const Vec3& b,
                                   const Vec3& c) {
  // Dense sampling in barycentric space; an intentionally dumb reference.
  const int n = 400;
  Vec3 best = a;
  double best_d2 = (p - a).squaredNorm();
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n - i; ++j) {
      const double u = double(i) / n, v = double(j) / n;
      const Vec3 q = a + u * (b - a) + v * (c - a);
      const double d2 = (p - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = q;
      }
    }
  return best;
}

double closest_dist2_ref(const TriMesh& mesh, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : mesh.faces) {
    const Vec3 q = closest_point_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                          mesh.vertices[f[2]]);
    best = std::min(best, (p - q).squaredNorm());
  }
  return best;
}

}  // namespace garment::testfx
