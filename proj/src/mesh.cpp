#include "garment/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "garment/bvh.hpp"
#include "garment/errors.hpp"
#include "garment/parallel.hpp"

namespace garment {

namespace {
constexpr double kMinFaceArea = 1e-12;

struct EdgeKey {
  int a, b;  // a < b
  bool operator==(const EdgeKey& o) const { return a == o.a && b == o.b; }
};

struct EdgeKeyHash {
  size_t operator()(const EdgeKey& e) const {
    return std::hash<uint64_t>()((uint64_t(uint32_t(e.a)) << 32) | uint32_t(e.b));
  }
};

EdgeKey make_edge(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

}  // namespace

Vec3 TriMesh::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& v : vertices) c += v;
  return vertices.empty() ? c : Vec3(c / double(vertices.size()));
}

double TriMesh::bounding_radius() const {
  const Vec3 c = centroid();
  double r2 = 0.0;
  for (const auto& v : vertices) r2 = std::max(r2, (v - c).squaredNorm());
  return std::sqrt(r2);
}

Aabb TriMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.expand(v);
  return box;
}

void TriMesh::validate() const {
  const int nv = int(vertices.size());
  const int nuv = int(uvs.size());
  std::string degenerate;
  int degenerate_count = 0;
  for (size_t f = 0; f < faces.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int vi = faces[f][c];
      if (vi < 0 || vi >= nv)
        throw TopologyError("face " + std::to_string(f) + " references vertex " +
                            std::to_string(vi) + " out of range [0," + std::to_string(nv) + ")");
    }
    if (!uv_faces.empty()) {
      for (int c = 0; c < 3; ++c) {
        const int ti = uv_faces[f][c];
        if (ti < 0 || ti >= nuv)
          throw TopologyError("face " + std::to_string(f) + " references uv " + std::to_string(ti) +
                              " out of range [0," + std::to_string(nuv) + ")");
      }
    }
    const double area =
        triangle_area(vertices[faces[f][0]], vertices[faces[f][1]], vertices[faces[f][2]]);
    if (area <= kMinFaceArea) {
      if (++degenerate_count <= 8) degenerate += " " + std::to_string(f);
    }
  }
  if (degenerate_count > 0)
    throw TopologyError("mesh has " + std::to_string(degenerate_count) +
                        " face(s) with area <= 1e-12:" + degenerate);
}

namespace {

// One OBJ face corner: "v", "v/vt", "v//vn" or "v/vt/vn".
struct Corner {
  int v = 0;
  int vt = 0;  // 0 = absent
};

Corner parse_corner(const std::string& token, const std::string& file, int line) {
  Corner c;
  int field = 0;
  size_t pos = 0;
  while (pos <= token.size() && field < 3) {
    size_t next = token.find('/', pos);
    if (next == std::string::npos) next = token.size();
    const std::string part = token.substr(pos, next - pos);
    if (!part.empty()) {
      int value = 0;
      const auto res = std::from_chars(part.data(), part.data() + part.size(), value);
      if (res.ec != std::errc() || res.ptr != part.data() + part.size())
        throw ParseError(file, line, "bad face index '" + part + "'");
      if (field == 0) c.v = value;
      if (field == 1) c.vt = value;
    } else if (field == 0) {
      throw ParseError(file, line, "missing vertex index in face corner '" + token + "'");
    }
    ++field;
    pos = next + 1;
  }
  return c;
}

int resolve_index(int idx, int count, const char* what, const std::string& file, int line) {
  if (idx < 0) throw ParseError(file, line, std::string("negative ") + what + " index not supported");
  if (idx == 0 || idx > count)
    throw ParseError(file, line, std::string(what) + " index " + std::to_string(idx) +
                                     " out of range (have " + std::to_string(count) + ")");
  return idx - 1;
}

}  // namespace

TriMesh parse_obj(const std::string& text, const std::string& origin) {
  TriMesh mesh;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw ParseError(origin, lineno, "bad vertex record");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "vt") {
      double u, v;
      if (!(ls >> u >> v)) throw ParseError(origin, lineno, "bad texture coordinate record");
      mesh.uvs.emplace_back(u, v);
    } else if (tag == "f") {
      std::vector<Corner> corners;
      std::string token;
      while (ls >> token) corners.push_back(parse_corner(token, origin, lineno));
      if (corners.size() < 3) throw ParseError(origin, lineno, "face with fewer than 3 corners");
      const bool any_uv = std::any_of(corners.begin(), corners.end(),
                                      [](const Corner& c) { return c.vt != 0; });
      for (size_t k = 1; k + 1 < corners.size(); ++k) {
        const Corner tri[3] = {corners[0], corners[k], corners[k + 1]};
        std::array<int, 3> vf, tf{-1, -1, -1};
        for (int c = 0; c < 3; ++c) {
          vf[c] = resolve_index(tri[c].v, int(mesh.vertices.size()), "vertex", origin, lineno);
          if (any_uv) {
            if (tri[c].vt == 0)
              throw ParseError(origin, lineno, "face mixes corners with and without uv indices");
            tf[c] = resolve_index(tri[c].vt, int(mesh.uvs.size()), "uv", origin, lineno);
          }
        }
        mesh.faces.push_back(vf);
        if (any_uv) mesh.uv_faces.push_back(tf);
      }
      if (!mesh.uv_faces.empty() && mesh.uv_faces.size() != mesh.faces.size())
        throw ParseError(origin, lineno, "some faces have uv indices and some do not");
    } else if (tag == "o" || tag == "g") {
      std::string n;
      if (ls >> n && mesh.name.empty()) mesh.name = n;
    }
    // vn, s, usemtl, mtllib: ignored.
  }
  mesh.validate();
  return mesh;
}

TriMesh load_obj(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open OBJ file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  TriMesh mesh = parse_obj(buf.str(), path);
  if (mesh.name.empty()) {
    const size_t slash = path.find_last_of('/');
    mesh.name = slash == std::string::npos ? path : path.substr(slash + 1);
  }
  return mesh;
}

std::string write_obj_string(const TriMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.faces.size() * 24);
  char buf[160];
  if (!mesh.name.empty()) {
    out += "o ";
    out += mesh.name;
    out += "\n";
  }
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& t : mesh.uvs) {
    std::snprintf(buf, sizeof(buf), "vt %.17g %.17g\n", t.x(), t.y());
    out += buf;
  }
  const bool with_uv = mesh.has_uvs();
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& vf = mesh.faces[f];
    if (with_uv) {
      const auto& tf = mesh.uv_faces[f];
      std::snprintf(buf, sizeof(buf), "f %d/%d %d/%d %d/%d\n", vf[0] + 1, tf[0] + 1, vf[1] + 1,
                    tf[1] + 1, vf[2] + 1, tf[2] + 1);
    } else {
      std::snprintf(buf, sizeof(buf), "f %d %d %d\n", vf[0] + 1, vf[1] + 1, vf[2] + 1);
    }
    out += buf;
  }
  return out;
}

void save_obj(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write OBJ file: " + path);
  out << write_obj_string(mesh);
  if (!out) throw IoError("failed writing OBJ file: " + path);
}

std::vector<std::pair<int, int>> boundary_edges(const TriMesh& mesh) {
  std::unordered_map<EdgeKey, int, EdgeKeyHash> incidence;
  incidence.reserve(mesh.faces.size() * 2);
  for (const auto& f : mesh.faces)
    for (int c = 0; c < 3; ++c) ++incidence[make_edge(f[c], f[(c + 1) % 3])];

  std::vector<std::pair<int, int>> result;
  std::string bad;
  int bad_count = 0;
  for (const auto& [e, count] : incidence) {
    if (count == 1) result.emplace_back(e.a, e.b);
    if (count > 2) {
      if (++bad_count <= 8)
        bad += " (" + std::to_string(e.a) + "," + std::to_string(e.b) + ")x" + std::to_string(count);
    }
  }
  if (bad_count > 0)
    throw TopologyError("non-manifold: " + std::to_string(bad_count) +
                        " edge(s) shared by more than two faces:" + bad);
  std::sort(result.begin(), result.end());
  return result;
}

BoundaryLoops boundary_loops(const TriMesh& mesh) {
  const auto edges = boundary_edges(mesh);

  // Walk cycles over the boundary-edge graph. Each boundary vertex of a
  // manifold-edge mesh touches an even number of boundary edges (2 normally;
  // more at pinch vertices, which are tolerated).
  std::multimap<int, int> adj;
  for (const auto& [a, b] : edges) {
    adj.emplace(a, b);
    adj.emplace(b, a);
  }
  std::unordered_map<EdgeKey, bool, EdgeKeyHash> used;
  for (const auto& [a, b] : edges) used[make_edge(a, b)] = false;

  BoundaryLoops result;
  for (const auto& [a0, b0] : edges) {
    if (used[make_edge(a0, b0)]) continue;
    std::vector<int> loop;
    int prev = a0, cur = b0;
    used[make_edge(a0, b0)] = true;
    loop.push_back(a0);
    while (cur != a0) {
      loop.push_back(cur);
      auto [lo, hi] = adj.equal_range(cur);
      int next = -1;
      for (auto it = lo; it != hi; ++it) {
        if (it->second == prev) continue;
        if (!used[make_edge(cur, it->second)]) {
          next = it->second;
          break;
        }
      }
      if (next < 0) throw TopologyError("boundary walk stuck at vertex " + std::to_string(cur));
      used[make_edge(cur, next)] = true;
      prev = cur;
      cur = next;
    }
    result.loops.push_back(std::move(loop));
  }
  return result;
}

std::vector<double> face_areas(const TriMesh& mesh) {
  std::vector<double> areas(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    areas[f] = triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  }
  return areas;
}

MeshQualityReport quality_report(const TriMesh& mesh) {
  MeshQualityReport rep;
  rep.min_triangle_area = std::numeric_limits<double>::infinity();
  rep.min_interior_angle = std::numeric_limits<double>::infinity();
  rep.max_aspect_ratio = 0.0;

  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double area = triangle_area(a, b, c);
    rep.min_triangle_area = std::min(rep.min_triangle_area, area);
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    if (area <= kMinFaceArea || la == 0 || lb == 0 || lc == 0) {
      ++rep.degenerate_face_count;
      rep.min_interior_angle = 0.0;
      rep.max_aspect_ratio = std::numeric_limits<double>::infinity();
      continue;
    }
    const Vec3 e0 = (b - a).normalized(), e1 = (c - b).normalized(), e2 = (a - c).normalized();
    const double angles[3] = {std::acos(std::clamp(e0.dot(-e2), -1.0, 1.0)),
                              std::acos(std::clamp(e1.dot(-e0), -1.0, 1.0)),
                              std::acos(std::clamp(e2.dot(-e1), -1.0, 1.0))};
    for (double ang : angles)
      rep.min_interior_angle = std::min(rep.min_interior_angle, ang * 180.0 / M_PI);
    // Normalized so an equilateral triangle scores 1.
    const double s = 0.5 * (la + lb + lc);
    const double inradius = area / s;
    const double longest = std::max({la, lb, lc});
    rep.max_aspect_ratio = std::max(rep.max_aspect_ratio, longest / (2.0 * std::sqrt(3.0) * inradius));
  }
  if (mesh.faces.empty()) {
    rep.min_triangle_area = 0.0;
    rep.min_interior_angle = 0.0;
  }

  const auto edges = mesh_edges(mesh);
  if (!edges.empty()) {
    double sum = 0.0, sum2 = 0.0;
    for (const auto& [a, b] : edges) {
      const double l = (mesh.vertices[a] - mesh.vertices[b]).norm();
      sum += l;
      sum2 += l * l;
    }
    rep.edge_length_mean = sum / double(edges.size());
    const double var = std::max(0.0, sum2 / double(edges.size()) - rep.edge_length_mean * rep.edge_length_mean);
    rep.edge_length_std = std::sqrt(var);
  }

  rep.boundary_loop_count = int(boundary_loops(mesh).loops.size());
  rep.self_intersection_count = count_self_intersections(mesh);
  return rep;
}

TriMesh normalize_to_unit(const TriMesh& mesh, double* scale, Vec3* translation) {
  if (mesh.vertices.empty()) throw TopologyError("cannot normalize an empty mesh");
  const Vec3 c = mesh.centroid();
  const double r = mesh.bounding_radius();
  if (r <= 0.0) throw TopologyError("cannot normalize a zero-extent mesh");
  TriMesh out = mesh;
  const double s = 1.0 / r;
  for (auto& v : out.vertices) v = s * (v - c);
  if (scale) *scale = s;
  if (translation) *translation = -c;
  return out;
}

std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.vertices.size());
  for (const auto& [a, b] : mesh_edges(mesh)) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

std::vector<std::pair<int, int>> mesh_edges(const TriMesh& mesh) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces)
    for (int c = 0; c < 3; ++c) {
      const int a = f[c], b = f[(c + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

int connected_component_count(const TriMesh& mesh) {
  std::vector<int> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<bool> touched(mesh.vertices.size(), false);
  for (const auto& f : mesh.faces)
    for (int c = 0; c < 3; ++c) {
      touched[f[c]] = true;
      const int ra = find(f[c]), rb = find(f[(c + 1) % 3]);
      if (ra != rb) parent[ra] = rb;
    }
  int count = 0;
  for (size_t v = 0; v < parent.size(); ++v)
    if (touched[v] && find(int(v)) == int(v)) ++count;
  return count;
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
  std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
  for (const auto& f : mesh.faces) {
    const Vec3 cr = triangle_cross(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    for (int c = 0; c < 3; ++c) normals[f[c]] += cr;  // |cr| = 2A, area weighting
  }
  for (auto& n : normals) {
    const double len = n.norm();
    if (len > 0.0) n /= len;
  }
  return normals;
}

}  // namespace garment
