#include "garment/bvh.hpp"

#include <algorithm>
#include <numeric>

#include "garment/mesh.hpp"
#include "garment/parallel.hpp"

namespace garment {

namespace {
constexpr int kLeafSize = 8;
}

MeshBvh::MeshBvh(const TriMesh& mesh) {
  const size_t n = mesh.faces.size();
  if (n == 0) return;
  tris_.resize(n);
  std::vector<Aabb> boxes(n);
  std::vector<Vec3> centers(n);
  for (size_t f = 0; f < n; ++f) {
    const auto& t = mesh.faces[f];
    tris_[f] = {mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]};
    for (const auto& v : tris_[f]) boxes[f].expand(v);
    centers[f] = boxes[f].center();
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * n / kLeafSize + 2);
  root_ = build(0, int(n), boxes, centers);
}

int MeshBvh::build(int begin, int end, std::vector<Aabb>& boxes, std::vector<Vec3>& centers) {
  Node node;
  for (int i = begin; i < end; ++i) node.box.expand(boxes[order_[i]]);
  const int idx = int(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) {
    nodes_[idx].begin = begin;
    nodes_[idx].end = end;
    return idx;
  }
  const Vec3 extent = node.box.hi - node.box.lo;
  int axis = 0;
  extent.maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return centers[a][axis] < centers[b][axis]; });
  const int l = build(begin, mid, boxes, centers);
  const int r = build(mid, end, boxes, centers);
  nodes_[idx].left = l;
  nodes_[idx].right = r;
  return idx;
}

MeshBvh::Hit MeshBvh::closest_point(const Vec3& p) const {
  Hit best;
  best.dist2 = std::numeric_limits<double>::infinity();
  if (root_ >= 0) search(root_, p, best);
  return best;
}

void MeshBvh::search(int node, const Vec3& p, Hit& best) const {
  const Node& n = nodes_[node];
  if (n.box.dist2(p) >= best.dist2) return;
  if (n.left < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const int f = order_[i];
      Vec3 bary;
      const Vec3 q = closest_point_triangle(p, tris_[f][0], tris_[f][1], tris_[f][2], &bary);
      const double d2 = (p - q).squaredNorm();
      if (d2 < best.dist2) {
        best.dist2 = d2;
        best.face = f;
        best.point = q;
        best.bary = bary;
      }
    }
    return;
  }
  const double dl = nodes_[n.left].box.dist2(p);
  const double dr = nodes_[n.right].box.dist2(p);
  if (dl < dr) {
    search(n.left, p, best);
    search(n.right, p, best);
  } else {
    search(n.right, p, best);
    search(n.left, p, best);
  }
}

int count_self_intersections(const TriMesh& mesh) {
  const size_t n = mesh.faces.size();
  if (n < 2) return 0;
  std::vector<Aabb> boxes(n);
  for (size_t f = 0; f < n; ++f) {
    for (int c = 0; c < 3; ++c) boxes[f].expand(mesh.vertices[mesh.faces[f][c]]);
  }

  // Sweep over x-sorted boxes; garment meshes are thin so this prunes well.
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return boxes[a].lo.x() < boxes[b].lo.x(); });

  auto shares_vertex = [&](int a, int b) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (mesh.faces[a][i] == mesh.faces[b][j]) return true;
    return false;
  };

  std::vector<int> counts(n, 0);
  parallel_for(0, n, [&](size_t lo, size_t hi) {
    for (size_t ii = lo; ii < hi; ++ii) {
      const int a = idx[ii];
      int local = 0;
      for (size_t jj = ii + 1; jj < n; ++jj) {
        const int b = idx[jj];
        if (boxes[b].lo.x() > boxes[a].hi.x()) break;
        if (!boxes[a].overlaps(boxes[b])) continue;
        if (shares_vertex(a, b)) continue;
        const auto& fa = mesh.faces[a];
        const auto& fb = mesh.faces[b];
        if (triangles_intersect(mesh.vertices[fa[0]], mesh.vertices[fa[1]], mesh.vertices[fa[2]],
                                mesh.vertices[fb[0]], mesh.vertices[fb[1]], mesh.vertices[fb[2]]))
          ++local;
      }
      counts[ii] = local;
    }
  });
  int total = 0;
  for (int c : counts) total += c;
  return total;
}

PointKdTree::PointKdTree(const std::vector<Vec3>& points) : points_(points) {
  const size_t n = points_.size();
  if (n == 0) return;
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * n / kLeafSize + 2);
  root_ = build(0, int(n));
}

int PointKdTree::build(int begin, int end) {
  Node node;
  for (int i = begin; i < end; ++i) node.box.expand(points_[order_[i]]);
  const int idx = int(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) {
    nodes_[idx].begin = begin;
    nodes_[idx].end = end;
    return idx;
  }
  const Vec3 extent = node.box.hi - node.box.lo;
  int axis = 0;
  extent.maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
  const int l = build(begin, mid);
  const int r = build(mid, end);
  nodes_[idx].left = l;
  nodes_[idx].right = r;
  return idx;
}

int PointKdTree::nearest(const Vec3& query, double* dist2) const {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  if (root_ >= 0) search(root_, query, best, best_d2);
  if (dist2) *dist2 = best_d2;
  return best;
}

void PointKdTree::search(int node, const Vec3& q, int& best, double& best_d2) const {
  const Node& n = nodes_[node];
  if (n.box.dist2(q) >= best_d2) return;
  if (n.left < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const int pi = order_[i];
      const double d2 = (points_[pi] - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = pi;
      }
    }
    return;
  }
  const double dl = nodes_[n.left].box.dist2(q);
  const double dr = nodes_[n.right].box.dist2(q);
  if (dl < dr) {
    search(n.left, q, best, best_d2);
    search(n.right, q, best, best_d2);
  } else {
    search(n.right, q, best, best_d2);
    search(n.left, q, best, best_d2);
  }
}

}  // namespace garment
