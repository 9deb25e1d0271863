#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace garment {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void expand(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool overlaps(const Aabb& b) const {
    return (lo.array() <= b.hi.array()).all() && (b.lo.array() <= hi.array()).all();
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double dist2(const Vec3& p) const {
    const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    return d.squaredNorm();
  }
};

inline Vec3 triangle_cross(const Vec3& a, const Vec3& b, const Vec3& c) {
  return (b - a).cross(c - a);
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * triangle_cross(a, b, c).norm();
}

inline Vec3 triangle_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = triangle_cross(a, b, c);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

// Closest point on triangle (a,b,c) to p, with barycentric coordinates.
// Ericson, Real-Time Collision Detection, 5.1.5.
inline Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                                   Vec3* bary = nullptr) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  auto out = [&](const Vec3& q, double u, double v, double w) {
    if (bary) *bary = Vec3(u, v, w);
    return q;
  };
  if (d1 <= 0.0 && d2 <= 0.0) return out(a, 1, 0, 0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return out(b, 0, 1, 0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return out(a + v * ab, 1 - v, v, 0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return out(c, 0, 0, 1);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return out(a + w * ac, 1 - w, 0, w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return out(b + w * (c - b), 0, 1 - w, w);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return out(a + ab * v + ac * w, 1 - v - w, v, w);
}

namespace tritri_detail {

inline bool edge_edge_test(const Vec3& v0, const Vec3& v1, const Vec3& u0, const Vec3& u1,
                           int i0, int i1) {
  const double ax = v1[i0] - v0[i0];
  const double ay = v1[i1] - v0[i1];
  const double bx = u0[i0] - u1[i0];
  const double by = u0[i1] - u1[i1];
  const double cx = v0[i0] - u0[i0];
  const double cy = v0[i1] - u0[i1];
  const double f = ay * bx - ax * by;
  const double d = by * cx - bx * cy;
  if ((f > 0 && d >= 0 && d <= f) || (f < 0 && d <= 0 && d >= f)) {
    const double e = ax * cy - ay * cx;
    if (f > 0) {
      if (e >= 0 && e <= f) return true;
    } else {
      if (e <= 0 && e >= f) return true;
    }
  }
  return false;
}

inline bool edge_against_tri(const Vec3& v0, const Vec3& v1, const Vec3& u0, const Vec3& u1,
                             const Vec3& u2, int i0, int i1) {
  return edge_edge_test(v0, v1, u0, u1, i0, i1) || edge_edge_test(v0, v1, u1, u2, i0, i1) ||
         edge_edge_test(v0, v1, u2, u0, i0, i1);
}

inline bool point_in_tri(const Vec3& p, const Vec3& u0, const Vec3& u1, const Vec3& u2, int i0,
                         int i1) {
  double a = u1[i1] - u0[i1];
  double b = -(u1[i0] - u0[i0]);
  double c = -a * u0[i0] - b * u0[i1];
  const double d0 = a * p[i0] + b * p[i1] + c;

  a = u2[i1] - u1[i1];
  b = -(u2[i0] - u1[i0]);
  c = -a * u1[i0] - b * u1[i1];
  const double d1 = a * p[i0] + b * p[i1] + c;

  a = u0[i1] - u2[i1];
  b = -(u0[i0] - u2[i0]);
  c = -a * u2[i0] - b * u2[i1];
  const double d2 = a * p[i0] + b * p[i1] + c;

  return (d0 * d1 > 0.0) && (d0 * d2 > 0.0);
}

inline bool coplanar_tri_tri(const Vec3& n, const Vec3& v0, const Vec3& v1, const Vec3& v2,
                             const Vec3& u0, const Vec3& u1, const Vec3& u2) {
  // Project onto the dominant axis plane.
  const Vec3 a = n.cwiseAbs();
  int i0, i1;
  if (a[0] > a[1]) {
    if (a[0] > a[2]) {
      i0 = 1;
      i1 = 2;
    } else {
      i0 = 0;
      i1 = 1;
    }
  } else {
    if (a[2] > a[1]) {
      i0 = 0;
      i1 = 1;
    } else {
      i0 = 0;
      i1 = 2;
    }
  }
  if (edge_against_tri(v0, v1, u0, u1, u2, i0, i1)) return true;
  if (edge_against_tri(v1, v2, u0, u1, u2, i0, i1)) return true;
  if (edge_against_tri(v2, v0, u0, u1, u2, i0, i1)) return true;
  if (point_in_tri(v0, u0, u1, u2, i0, i1)) return true;
  if (point_in_tri(u0, v0, v1, v2, i0, i1)) return true;
  return false;
}

}  // namespace tritri_detail

// Moller 1997 triangle-triangle overlap test, with the coplanar branch.
inline bool triangles_intersect(const Vec3& v0, const Vec3& v1, const Vec3& v2, const Vec3& u0,
                                const Vec3& u1, const Vec3& u2) {
  using namespace tritri_detail;
  constexpr double eps = 1e-12;

  const Vec3 n1 = (v1 - v0).cross(v2 - v0);
  const double d1 = -n1.dot(v0);
  double du0 = n1.dot(u0) + d1;
  double du1 = n1.dot(u1) + d1;
  double du2 = n1.dot(u2) + d1;
  if (std::abs(du0) < eps) du0 = 0.0;
  if (std::abs(du1) < eps) du1 = 0.0;
  if (std::abs(du2) < eps) du2 = 0.0;
  const double du0du1 = du0 * du1, du0du2 = du0 * du2;
  if (du0du1 > 0.0 && du0du2 > 0.0) return false;

  const Vec3 n2 = (u1 - u0).cross(u2 - u0);
  const double d2 = -n2.dot(u0);
  double dv0 = n2.dot(v0) + d2;
  double dv1 = n2.dot(v1) + d2;
  double dv2 = n2.dot(v2) + d2;
  if (std::abs(dv0) < eps) dv0 = 0.0;
  if (std::abs(dv1) < eps) dv1 = 0.0;
  if (std::abs(dv2) < eps) dv2 = 0.0;
  const double dv0dv1 = dv0 * dv1, dv0dv2 = dv0 * dv2;
  if (dv0dv1 > 0.0 && dv0dv2 > 0.0) return false;

  const Vec3 dir = n1.cross(n2);
  int axis = 0;
  dir.cwiseAbs().maxCoeff(&axis);

  const double vp0 = v0[axis], vp1 = v1[axis], vp2 = v2[axis];
  const double up0 = u0[axis], up1 = u1[axis], up2 = u2[axis];

  double isect1[2], isect2[2];
  bool coplanar = false;

  // Interval of triangle 1 on the intersection line.
  if (dv0dv1 > 0.0) {
    isect1[0] = vp2 + (vp0 - vp2) * dv2 / (dv2 - dv0);
    isect1[1] = vp2 + (vp1 - vp2) * dv2 / (dv2 - dv1);
  } else if (dv0dv2 > 0.0) {
    isect1[0] = vp1 + (vp0 - vp1) * dv1 / (dv1 - dv0);
    isect1[1] = vp1 + (vp2 - vp1) * dv1 / (dv1 - dv2);
  } else if (dv1 * dv2 > 0.0 || dv0 != 0.0) {
    isect1[0] = vp0 + (vp1 - vp0) * dv0 / (dv0 - dv1);
    isect1[1] = vp0 + (vp2 - vp0) * dv0 / (dv0 - dv2);
  } else if (dv1 != 0.0) {
    isect1[0] = vp1 + (vp0 - vp1) * dv1 / (dv1 - dv0);
    isect1[1] = vp1 + (vp2 - vp1) * dv1 / (dv1 - dv2);
  } else if (dv2 != 0.0) {
    isect1[0] = vp2 + (vp0 - vp2) * dv2 / (dv2 - dv0);
    isect1[1] = vp2 + (vp1 - vp2) * dv2 / (dv2 - dv1);
  } else {
    coplanar = true;
  }
  if (coplanar) return coplanar_tri_tri(n1, v0, v1, v2, u0, u1, u2);

  if (du0du1 > 0.0) {
    isect2[0] = up2 + (up0 - up2) * du2 / (du2 - du0);
    isect2[1] = up2 + (up1 - up2) * du2 / (du2 - du1);
  } else if (du0du2 > 0.0) {
    isect2[0] = up1 + (up0 - up1) * du1 / (du1 - du0);
    isect2[1] = up1 + (up2 - up1) * du1 / (du1 - du2);
  } else if (du1 * du2 > 0.0 || du0 != 0.0) {
    isect2[0] = up0 + (up1 - up0) * du0 / (du0 - du1);
    isect2[1] = up0 + (up2 - up0) * du0 / (du0 - du2);
  } else if (du1 != 0.0) {
    isect2[0] = up1 + (up0 - up1) * du1 / (du1 - du0);
    isect2[1] = up1 + (up2 - up1) * du1 / (du1 - du2);
  } else {
    isect2[0] = up2 + (up0 - up2) * du2 / (du2 - du0);
    isect2[1] = up2 + (up1 - up2) * du2 / (du2 - du1);
  }

  if (isect1[0] > isect1[1]) std::swap(isect1[0], isect1[1]);
  if (isect2[0] > isect2[1]) std::swap(isect2[0], isect2[1]);
  return !(isect1[1] < isect2[0] || isect2[1] < isect1[0]);
}

}  // namespace garment
