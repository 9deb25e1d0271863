#include "garment/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "garment/errors.hpp"
#include "garment/parallel.hpp"
#include "json.hpp"

namespace garment {

void RenderBuffers::resize(int w, int h) {
  width = w;
  height = h;
  silhouette.assign(pixel_count(), 0.0);
  normals.assign(pixel_count() * 3, 0.0);
  depth.assign(pixel_count(), kEmptyDepth);
}

void BufferGrad::resize_zero(int w, int h) {
  width = w;
  height = h;
  const size_t n = size_t(w) * size_t(h);
  silhouette.assign(n, 0.0);
  normals.assign(n * 3, 0.0);
  depth.assign(n, 0.0);
}

namespace {

inline double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

inline double smoothstep01(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * (3.0 - 2.0 * t);
}

// Distance from p to segment [a,b] plus the data needed for its gradient.
struct SegmentHit {
  double dist = 0.0;
  double t = 0.0;  // closest point = a + t (b - a)
  Vec2 dir = Vec2::Zero();  // (p - closest) / dist, zero when dist == 0
};

SegmentHit point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  SegmentHit hit;
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  hit.t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  const Vec2 closest = a + hit.t * ab;
  const Vec2 d = p - closest;
  hit.dist = d.norm();
  if (hit.dist > 0.0) hit.dir = d / hit.dist;
  return hit;
}

// Signed distance from pixel p to the projected triangle: positive inside,
// negative outside, zero on the boundary. `seg` reports the realizing edge.
double signed_triangle_distance(const Vec2& p, const Vec2& qa, const Vec2& qb, const Vec2& qc,
                                int* edge, SegmentHit* seg) {
  const SegmentHit hits[3] = {point_segment(p, qa, qb), point_segment(p, qb, qc),
                              point_segment(p, qc, qa)};
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (hits[k].dist < hits[best].dist) best = k;
  const double D = cross2(qb - qa, qc - qa);
  const double ea = cross2(qb - qa, p - qa);
  const double eb = cross2(qc - qb, p - qb);
  const double ec = cross2(qa - qc, p - qc);
  bool inside = false;
  if (D > 0.0)
    inside = ea >= 0.0 && eb >= 0.0 && ec >= 0.0;
  else if (D < 0.0)
    inside = ea <= 0.0 && eb <= 0.0 && ec <= 0.0;
  if (edge) *edge = best;
  if (seg) *seg = hits[best];
  return inside ? hits[best].dist : -hits[best].dist;
}

struct ProjectedMesh {
  std::vector<Vec3> cam;     // camera-space positions
  std::vector<Vec2> pix;     // pixel positions
  std::vector<double> depth; // -z, positive in front
  std::vector<char> front;   // depth > near plane
  CameraFrame frame;
  double tan_half = 0.0;
  double aspect = 1.0;
};

ProjectedMesh project_mesh(const TriMesh& mesh, const Camera& camera) {
  ProjectedMesh pm;
  pm.frame = camera_frame(camera);
  pm.tan_half = std::tan(0.5 * camera.vertical_fov * 3.14159265358979323846 / 180.0);
  pm.aspect = double(camera.width) / double(camera.height);
  const size_t n = mesh.vertices.size();
  pm.cam.resize(n);
  pm.pix.resize(n);
  pm.depth.resize(n);
  pm.front.resize(n);
  for (size_t i = 0; i < n; ++i) {
    pm.cam[i] = pm.frame.to_camera(mesh.vertices[i]);
    const PixelPoint pp = project_to_pixel(camera, pm.cam[i]);
    pm.pix[i] = pp.pixel;
    pm.depth[i] = pp.depth;
    pm.front[i] = pp.in_front ? 1 : 0;
  }
  return pm;
}

struct FaceBounds {
  int x0, x1, y0, y1;  // inclusive pixel ranges, empty when x0 > x1
  bool usable;         // all three vertices in front of the near plane
};

std::vector<FaceBounds> face_bounds(const TriMesh& mesh, const ProjectedMesh& pm, int width,
                                    int height, double pad) {
  std::vector<FaceBounds> out(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    FaceBounds b{0, -1, 0, -1, false};
    if (pm.front[t[0]] && pm.front[t[1]] && pm.front[t[2]]) {
      b.usable = true;
      double lox = pm.pix[t[0]].x(), hix = lox, loy = pm.pix[t[0]].y(), hiy = loy;
      for (int k = 1; k < 3; ++k) {
        lox = std::min(lox, pm.pix[t[k]].x());
        hix = std::max(hix, pm.pix[t[k]].x());
        loy = std::min(loy, pm.pix[t[k]].y());
        hiy = std::max(hiy, pm.pix[t[k]].y());
      }
      // Pixel (x, y) has center (x + 0.5, y + 0.5).
      b.x0 = std::max(0, int(std::floor(lox - pad - 0.5)));
      b.x1 = std::min(width - 1, int(std::ceil(hix + pad - 0.5)));
      b.y0 = std::max(0, int(std::floor(loy - pad - 0.5)));
      b.y1 = std::min(height - 1, int(std::ceil(hiy + pad - 0.5)));
    }
    out[f] = b;
  }
  return out;
}

// Faces touching each pixel row, ascending face order within a row.
std::vector<std::vector<int>> bin_rows(const std::vector<FaceBounds>& bounds, int height) {
  std::vector<std::vector<int>> rows(height);
  for (size_t f = 0; f < bounds.size(); ++f) {
    const FaceBounds& b = bounds[f];
    if (!b.usable || b.x0 > b.x1) continue;
    for (int y = b.y0; y <= b.y1; ++y) rows[y].push_back(int(f));
  }
  return rows;
}

// Affine barycentric coordinates of pixel p in the projected triangle.
bool affine_bary(const Vec2& p, const Vec2& qa, const Vec2& qb, const Vec2& qc, Vec3* bary) {
  const double D = cross2(qb - qa, qc - qa);
  if (D == 0.0) return false;
  (*bary)[0] = cross2(qb - p, qc - p) / D;
  (*bary)[1] = cross2(qc - p, qa - p) / D;
  (*bary)[2] = cross2(qa - p, qb - p) / D;
  return (*bary)[0] >= 0.0 && (*bary)[1] >= 0.0 && (*bary)[2] >= 0.0;
}

// Shared rasterization state used by forward, backward, and textured passes.
struct Raster {
  int width = 0, height = 0;
  std::vector<int> hard_face;   // -1 where empty
  std::vector<Vec3> hard_bary;  // affine (screen-space) barycentrics
  std::vector<double> hard_depth;
  std::vector<double> coverage;   // soft silhouette
  std::vector<int> soft_face;     // argmax face of the coverage, -1 when 0
};

Raster rasterize(const TriMesh& mesh, const Camera& camera, const ProjectedMesh& pm,
                 double softness) {
  Raster r;
  r.width = camera.width;
  r.height = camera.height;
  const size_t np = size_t(r.width) * size_t(r.height);
  r.hard_face.assign(np, -1);
  r.hard_bary.assign(np, Vec3::Zero());
  r.hard_depth.assign(np, RenderBuffers::kEmptyDepth);
  r.coverage.assign(np, 0.0);
  r.soft_face.assign(np, -1);

  const double pad = 0.5 * softness + 1.0;
  const auto bounds = face_bounds(mesh, pm, r.width, r.height, pad);
  const auto rows = bin_rows(bounds, r.height);

  parallel_for(0, size_t(r.height), [&](size_t ylo, size_t yhi) {
    for (size_t y = ylo; y < yhi; ++y) {
      for (int f : rows[y]) {
        const auto& t = mesh.faces[f];
        const Vec2 qa = pm.pix[t[0]], qb = pm.pix[t[1]], qc = pm.pix[t[2]];
        const FaceBounds& b = bounds[f];
        for (int x = b.x0; x <= b.x1; ++x) {
          const Vec2 p(x + 0.5, y + 0.5);
          const size_t px = y * r.width + x;
          Vec3 bary;
          if (affine_bary(p, qa, qb, qc, &bary)) {
            const double S = bary[0] / pm.depth[t[0]] + bary[1] / pm.depth[t[1]] +
                             bary[2] / pm.depth[t[2]];
            const double d = 1.0 / S;
            if (d < r.hard_depth[px]) {
              r.hard_depth[px] = d;
              r.hard_face[px] = f;
              r.hard_bary[px] = bary;
            }
          }
          const double s = signed_triangle_distance(p, qa, qb, qc, nullptr, nullptr);
          double c;
          if (softness <= 0.0)
            c = s >= 0.0 ? 1.0 : 0.0;
          else
            c = smoothstep01(s / softness + 0.5);
          if (c > r.coverage[px]) {
            r.coverage[px] = c;
            r.soft_face[px] = f;
          }
        }
      }
    }
  });
  return r;
}

}  // namespace

RenderBuffers render(const TriMesh& mesh, const Camera& camera, double softness) {
  if (softness < 0.0) throw Error("softness must be >= 0");
  camera.validate();
  RenderBuffers out;
  out.resize(camera.width, camera.height);
  if (mesh.vertices.empty() || mesh.faces.empty()) return out;

  const ProjectedMesh pm = project_mesh(mesh, camera);
  const Raster r = rasterize(mesh, camera, pm, softness);

  const std::vector<Vec3> nrm_world = vertex_normals(mesh);
  std::vector<Vec3> nrm_cam(nrm_world.size());
  for (size_t i = 0; i < nrm_world.size(); ++i) nrm_cam[i] = pm.frame.R * nrm_world[i];

  parallel_for(0, out.pixel_count(), [&](size_t lo, size_t hi) {
    for (size_t px = lo; px < hi; ++px) {
      out.silhouette[px] = r.coverage[px];
      const int f = r.hard_face[px];
      if (f < 0) continue;
      out.depth[px] = r.hard_depth[px];
      const auto& t = mesh.faces[f];
      const Vec3& l = r.hard_bary[px];
      const double S = l[0] / pm.depth[t[0]] + l[1] / pm.depth[t[1]] + l[2] / pm.depth[t[2]];
      Vec3 m = Vec3::Zero();
      for (int k = 0; k < 3; ++k) {
        const double mu = (l[k] / pm.depth[t[k]]) / S;
        m += mu * nrm_cam[t[k]];
      }
      const double len = m.norm();
      if (len > 1e-12) {
        m /= len;
        out.normals[3 * px + 0] = m.x();
        out.normals[3 * px + 1] = m.y();
        out.normals[3 * px + 2] = m.z();
      }
    }
  });
  return out;
}

std::vector<Vec3> render_backward(const TriMesh& mesh, const Camera& camera, double softness,
                                  const BufferGrad& dL) {
  if (dL.width != camera.width || dL.height != camera.height)
    throw Error("gradient buffers do not match the camera resolution");
  camera.validate();
  std::vector<Vec3> dV(mesh.vertices.size(), Vec3::Zero());
  if (mesh.vertices.empty() || mesh.faces.empty()) return dV;

  const ProjectedMesh pm = project_mesh(mesh, camera);
  const Raster r = rasterize(mesh, camera, pm, softness);

  const std::vector<Vec3> nrm_world = vertex_normals(mesh);
  std::vector<Vec3> nrm_cam(nrm_world.size());
  for (size_t i = 0; i < nrm_world.size(); ++i) nrm_cam[i] = pm.frame.R * nrm_world[i];

  std::vector<Vec2> dPix(mesh.vertices.size(), Vec2::Zero());
  std::vector<double> dDepth(mesh.vertices.size(), 0.0);
  std::vector<Vec3> dNrmCam(mesh.vertices.size(), Vec3::Zero());

  const int W = camera.width, H = camera.height;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const size_t px = size_t(y) * W + x;
      const Vec2 p(x + 0.5, y + 0.5);

      // Soft-silhouette path: subgradient through the argmax face.
      const double gs = dL.silhouette[px];
      if (gs != 0.0 && softness > 0.0 && r.soft_face[px] >= 0) {
        const auto& t = mesh.faces[r.soft_face[px]];
        const Vec2 q[3] = {pm.pix[t[0]], pm.pix[t[1]], pm.pix[t[2]]};
        int edge = 0;
        SegmentHit seg;
        const double s = signed_triangle_distance(p, q[0], q[1], q[2], &edge, &seg);
        const double tt = s / softness + 0.5;
        if (tt > 0.0 && tt < 1.0 && seg.dist > 0.0) {
          const double dc_ds = (6.0 * tt - 6.0 * tt * tt) / softness;
          const double sign = s >= 0.0 ? 1.0 : -1.0;
          const double g = gs * dc_ds * sign;
          const int iu = edge, iv = (edge + 1) % 3;  // edges: (0,1), (1,2), (2,0)
          dPix[t[iu]] += g * (-(1.0 - seg.t)) * seg.dir;
          dPix[t[iv]] += g * (-seg.t) * seg.dir;
        }
      }

      const int f = r.hard_face[px];
      if (f < 0) continue;
      const auto& t = mesh.faces[f];
      const Vec2 q[3] = {pm.pix[t[0]], pm.pix[t[1]], pm.pix[t[2]]};
      const double d[3] = {pm.depth[t[0]], pm.depth[t[1]], pm.depth[t[2]]};
      const Vec3& l = r.hard_bary[px];
      const double S = l[0] / d[0] + l[1] / d[1] + l[2] / d[2];
      const double Dpx = 1.0 / S;

      double dl[3] = {0, 0, 0};  // dL/d lambda_k
      double dd[3] = {0, 0, 0};  // dL/d depth_k

      const double gd = dL.depth[px];
      if (gd != 0.0) {
        for (int k = 0; k < 3; ++k) {
          dl[k] += gd * (-Dpx * Dpx / d[k]);
          dd[k] += gd * (Dpx * Dpx * l[k] / (d[k] * d[k]));
        }
      }

      const Vec3 gn(dL.normals[3 * px + 0], dL.normals[3 * px + 1], dL.normals[3 * px + 2]);
      if (gn.squaredNorm() > 0.0) {
        double mu[3];
        Vec3 m = Vec3::Zero();
        for (int k = 0; k < 3; ++k) {
          mu[k] = (l[k] / d[k]) * Dpx;
          m += mu[k] * nrm_cam[t[k]];
        }
        const double len = m.norm();
        if (len > 1e-12) {
          const Vec3 nh = m / len;
          const Vec3 gm = (gn - nh * nh.dot(gn)) / len;
          double gmu[3];
          double gmu_dot_mu = 0.0;
          for (int k = 0; k < 3; ++k) {
            gmu[k] = gm.dot(nrm_cam[t[k]]);
            dNrmCam[t[k]] += mu[k] * gm;
            gmu_dot_mu += gmu[k] * mu[k];
          }
          for (int k = 0; k < 3; ++k) {
            dl[k] += gmu[k] / (d[k] * S) - gmu_dot_mu / (S * d[k]);
            dd[k] += -gmu[k] * mu[k] / d[k] + gmu_dot_mu * l[k] / (S * d[k] * d[k]);
          }
        }
      }

      if (dl[0] != 0.0 || dl[1] != 0.0 || dl[2] != 0.0) {
        // lambda_i = N_i / D with N_a = cross2(qb - p, qc - p) (cyclic), and
        // D the doubled signed area of the projected triangle.
        const Vec2 ra = q[0] - p, rb = q[1] - p, rc = q[2] - p;
        const double D = cross2(q[1] - q[0], q[2] - q[0]);
        const Vec2 u = q[1] - q[0], v = q[2] - q[0];
        Vec2 dN[3][3];  // dN[i][k] = dN_i / dq_k
        for (auto& row : dN)
          for (auto& e : row) e = Vec2::Zero();
        dN[0][1] = Vec2(rc.y(), -rc.x());
        dN[0][2] = Vec2(-rb.y(), rb.x());
        dN[1][2] = Vec2(ra.y(), -ra.x());
        dN[1][0] = Vec2(-rc.y(), rc.x());
        dN[2][0] = Vec2(rb.y(), -rb.x());
        dN[2][1] = Vec2(-ra.y(), ra.x());
        const Vec2 dD[3] = {Vec2(u.y() - v.y(), v.x() - u.x()), Vec2(v.y(), -v.x()),
                            Vec2(-u.y(), u.x())};
        for (int k = 0; k < 3; ++k) {
          Vec2 acc = Vec2::Zero();
          for (int i = 0; i < 3; ++i) acc += dl[i] * (dN[i][k] - l[i] * dD[k]) / D;
          dPix[t[k]] += acc;
        }
      }
      for (int k = 0; k < 3; ++k) dDepth[t[k]] += dd[k];
    }
  }

  // Pixel/depth gradients back to camera space, then to world space.
  const double tx = pm.tan_half * pm.aspect;
  const double ty = pm.tan_half;
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (!pm.front[i]) continue;
    const Vec3& c = pm.cam[i];
    const double dep = pm.depth[i];
    Vec3 dcam = Vec3::Zero();
    dcam.x() = dPix[i].x() * (W / (2.0 * dep * tx));
    dcam.y() = dPix[i].y() * (-H / (2.0 * dep * ty));
    dcam.z() = dPix[i].x() * (W * c.x() / (2.0 * tx * dep * dep)) +
               dPix[i].y() * (-H * c.y() / (2.0 * ty * dep * dep)) - dDepth[i];
    dV[i] += pm.frame.R.transpose() * dcam;
  }

  // Normal gradients: camera -> world, then through the area-weighted
  // vertex-normal construction to positions.
  std::vector<Vec3> nrm_sum(mesh.vertices.size(), Vec3::Zero());
  for (const auto& t : mesh.faces) {
    const Vec3 cr = triangle_cross(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    for (int k = 0; k < 3; ++k) nrm_sum[t[k]] += cr;
  }
  std::vector<Vec3> dSum(mesh.vertices.size(), Vec3::Zero());
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (dNrmCam[i].squaredNorm() == 0.0) continue;
    const double len = nrm_sum[i].norm();
    if (len <= 1e-12) continue;
    const Vec3 dnw = pm.frame.R.transpose() * dNrmCam[i];
    const Vec3 nh = nrm_sum[i] / len;
    dSum[i] = (dnw - nh * nh.dot(dnw)) / len;
  }
  for (const auto& t : mesh.faces) {
    const Vec3 g = dSum[t[0]] + dSum[t[1]] + dSum[t[2]];
    if (g.squaredNorm() == 0.0) continue;
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    dV[t[1]] += (c - a).cross(g);
    dV[t[2]] += g.cross(b - a);
    dV[t[0]] += -((c - a).cross(g) + g.cross(b - a));
  }
  return dV;
}

Image render_textured(const TriMesh& mesh, const Camera& camera, const Image& texture,
                      float background) {
  camera.validate();
  if (!mesh.has_uvs()) throw Error("textured rendering needs a UV atlas");
  if (texture.channels < 3) throw Error("texture must have at least 3 channels");
  Image out(camera.width, camera.height, 3, background);
  if (mesh.vertices.empty() || mesh.faces.empty()) return out;
  const ProjectedMesh pm = project_mesh(mesh, camera);
  const Raster r = rasterize(mesh, camera, pm, 0.0);
  parallel_for(0, size_t(camera.height), [&](size_t ylo, size_t yhi) {
    for (size_t y = ylo; y < yhi; ++y) {
      for (int x = 0; x < camera.width; ++x) {
        const size_t px = y * camera.width + x;
        const int f = r.hard_face[px];
        if (f < 0) continue;
        const auto& t = mesh.faces[f];
        const auto& tuv = mesh.uv_faces[f];
        const Vec3& l = r.hard_bary[px];
        const double S = l[0] / pm.depth[t[0]] + l[1] / pm.depth[t[1]] + l[2] / pm.depth[t[2]];
        Vec2 uv = Vec2::Zero();
        for (int k = 0; k < 3; ++k) uv += ((l[k] / pm.depth[t[k]]) / S) * mesh.uvs[tuv[k]];
        const double tpx = uv.x() * texture.width;
        const double tpy = (1.0 - uv.y()) * texture.height;
        for (int c = 0; c < 3; ++c)
          out.at(x, int(y), c) = texture.sample_bilinear(tpx, tpy, c);
      }
    }
  });
  return out;
}

Image buffers_to_image(const RenderBuffers& buffers) {
  Image img(buffers.width, buffers.height, 3, 0.f);
  for (size_t px = 0; px < buffers.pixel_count(); ++px) {
    const double sil = buffers.silhouette[px];
    for (int c = 0; c < 3; ++c)
      img.data[3 * px + c] = float((buffers.normals[3 * px + c] * 0.5 + 0.5) * sil);
  }
  return img;
}

BufferGrad buffers_image_backward(const RenderBuffers& buffers, const Image& dL_dImage) {
  if (dL_dImage.width != buffers.width || dL_dImage.height != buffers.height ||
      dL_dImage.channels != 3)
    throw Error("image gradient does not match buffer resolution");
  BufferGrad grad;
  grad.resize_zero(buffers.width, buffers.height);
  for (size_t px = 0; px < buffers.pixel_count(); ++px) {
    const double sil = buffers.silhouette[px];
    for (int c = 0; c < 3; ++c) {
      const double g = dL_dImage.data[3 * px + c];
      grad.normals[3 * px + c] = g * 0.5 * sil;
      grad.silhouette[px] += g * (buffers.normals[3 * px + c] * 0.5 + 0.5);
    }
  }
  return grad;
}

void save_buffers_png(const RenderBuffers& buffers, const std::string& prefix) {
  const int W = buffers.width, H = buffers.height;
  Image sil(W, H, 1), nrm(W, H, 3), dep(W, H, 1);
  double dmin = RenderBuffers::kEmptyDepth, dmax = -RenderBuffers::kEmptyDepth;
  for (size_t px = 0; px < buffers.pixel_count(); ++px) {
    const double d = buffers.depth[px];
    if (std::isfinite(d)) {
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
  }
  const bool any = dmax >= dmin;
  if (!any) dmin = dmax = 0.0;
  const double span = dmax > dmin ? dmax - dmin : 1.0;
  for (size_t px = 0; px < buffers.pixel_count(); ++px) {
    sil.data[px] = float(buffers.silhouette[px]);
    for (int c = 0; c < 3; ++c)
      nrm.data[3 * px + c] = float(buffers.normals[3 * px + c] * 0.5 + 0.5);
    const double d = buffers.depth[px];
    dep.data[px] = std::isfinite(d) ? float((d - dmin) / span) : 1.0f;
  }
  save_png(sil, prefix + "_silhouette.png");
  save_png(nrm, prefix + "_normals.png");
  save_png(dep, prefix + "_depth.png");
  nlohmann::json j{{"depth_min", dmin}, {"depth_max", dmax}, {"empty_value", 1.0}};
  std::ofstream out(prefix + "_depth.json");
  if (!out) throw IoError("cannot write " + prefix + "_depth.json");
  out << j.dump(2) << "\n";
}

}  // namespace garment
