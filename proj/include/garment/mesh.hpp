#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "garment/geometry.hpp"

namespace garment {

// Indexed triangle mesh. Connectivity is fixed after construction; deformation
// only ever replaces vertex positions.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec2> uvs;                      // optional, [0,1]^2
  std::vector<std::array<int, 3>> uv_faces;   // per-corner uv indices, parallel to faces
  std::string name;

  bool has_uvs() const { return !uvs.empty() && uv_faces.size() == faces.size(); }

  Vec3 centroid() const;
  double bounding_radius() const;  // max vertex distance from centroid
  Aabb bounds() const;

  // Throws TopologyError on out-of-range indices or near-zero-area faces.
  void validate() const;
};

struct BoundaryLoops {
  std::vector<std::vector<int>> loops;  // closed vertex cycles, one per hole

  size_t total_edge_count() const {
    size_t n = 0;
    for (const auto& l : loops) n += l.size();
    return n;
  }
};

struct MeshQualityReport {
  double min_triangle_area = 0.0;    // m^2
  double min_interior_angle = 0.0;   // degrees
  double max_aspect_ratio = 0.0;     // 1 for equilateral
  double edge_length_mean = 0.0;     // m
  double edge_length_std = 0.0;      // m
  int boundary_loop_count = 0;
  int self_intersection_count = 0;   // intersecting non-adjacent face pairs
  int degenerate_face_count = 0;
};

// ASCII OBJ with v / vt / f records; polygons are fan-triangulated. 1-based
// indices only, negative (relative) indices rejected.
TriMesh load_obj(const std::string& path);
TriMesh parse_obj(const std::string& text, const std::string& origin = "<memory>");
void save_obj(const TriMesh& mesh, const std::string& path);
std::string write_obj_string(const TriMesh& mesh);

// All boundary cycles (edges with exactly one incident face). Throws
// TopologyError if any edge has more than two incident faces.
BoundaryLoops boundary_loops(const TriMesh& mesh);

// Edges with exactly one incident face, as sorted vertex pairs.
std::vector<std::pair<int, int>> boundary_edges(const TriMesh& mesh);

MeshQualityReport quality_report(const TriMesh& mesh);

// Center at the vertex centroid and scale so the bounding-sphere radius is 1.
// normalized = scale * (v + translation). Throws on zero extent.
TriMesh normalize_to_unit(const TriMesh& mesh, double* scale, Vec3* translation);

// Undirected one-ring adjacency (from face edges, deduplicated).
std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh);

// Unique undirected edges as (lo, hi) vertex pairs, lexicographic order.
std::vector<std::pair<int, int>> mesh_edges(const TriMesh& mesh);

// Number of vertex-connectivity components over faces (isolated vertices ignored).
int connected_component_count(const TriMesh& mesh);

// Area-weighted smooth vertex normals (normalized; zero for isolated vertices).
std::vector<Vec3> vertex_normals(const TriMesh& mesh);

std::vector<double> face_areas(const TriMesh& mesh);

}  // namespace garment
