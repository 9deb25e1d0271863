#pragma once

#include <vector>

#include "garment/geometry.hpp"

namespace garment {

struct TriMesh;

// Static AABB tree over mesh triangles for exact closest-point queries.
class MeshBvh {
 public:
  struct Hit {
    int face = -1;
    Vec3 point = Vec3::Zero();
    Vec3 bary = Vec3::Zero();
    double dist2 = 0.0;
  };

  MeshBvh() = default;
  explicit MeshBvh(const TriMesh& mesh);

  Hit closest_point(const Vec3& p) const;
  bool empty() const { return nodes_.empty(); }

 private:
  struct Node {
    Aabb box;
    int left = -1;   // internal: child indices; leaf: left = -1
    int right = -1;
    int begin = 0;   // leaf triangle range in order_
    int end = 0;
  };

  int build(int begin, int end, std::vector<Aabb>& boxes, std::vector<Vec3>& centers);
  void search(int node, const Vec3& p, Hit& best) const;

  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<std::array<Vec3, 3>> tris_;
  int root_ = -1;
};

// Count of intersecting non-adjacent triangle pairs (AABB broad phase + exact
// triangle-triangle test; pairs sharing a vertex index are skipped).
int count_self_intersections(const TriMesh& mesh);

// Exact nearest-neighbor search over a fixed point set.
class PointKdTree {
 public:
  PointKdTree() = default;
  explicit PointKdTree(const std::vector<Vec3>& points);

  // Index of the exact nearest point and its squared distance.
  int nearest(const Vec3& query, double* dist2 = nullptr) const;
  size_t size() const { return points_.size(); }

 private:
  struct Node {
    Aabb box;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range in order_
  };

  int build(int begin, int end);
  void search(int node, const Vec3& q, int& best, double& best_d2) const;

  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Vec3> points_;
  int root_ = -1;
};

}  // namespace garment
