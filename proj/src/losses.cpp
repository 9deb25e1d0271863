#include "garment/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "garment/bvh.hpp"
#include "garment/errors.hpp"
#include "garment/hash.hpp"
#include "garment/parallel.hpp"
#include "garment/rng.hpp"

namespace garment {

void LossWeights::validate() const {
  const double vals[] = {cd, lap, triag, render2d, embed};
  for (double v : vals)
    if (!(std::isfinite(v) && v >= 0.0)) throw Error("loss weights must be finite and >= 0");
}

Eigen::MatrixXd SurfaceSamples::reposition(const TriMesh& mesh) const {
  Eigen::MatrixXd out(points.rows(), 3);
  for (int i = 0; i < points.rows(); ++i) {
    const auto& t = mesh.faces[face[i]];
    out.row(i) = (bary(i, 0) * mesh.vertices[t[0]] + bary(i, 1) * mesh.vertices[t[1]] +
                  bary(i, 2) * mesh.vertices[t[2]])
                     .transpose();
  }
  return out;
}

SurfaceSamples sample_surface(const TriMesh& mesh, int count, std::uint64_t seed) {
  if (count < 1) throw Error("sample count must be >= 1");
  if (mesh.faces.empty()) throw Error("cannot sample an empty mesh");
  const std::vector<double> areas = face_areas(mesh);
  std::vector<double> cdf(areas.size());
  double acc = 0.0;
  for (size_t f = 0; f < areas.size(); ++f) {
    acc += areas[f];
    cdf[f] = acc;
  }
  if (!(acc > 0.0)) throw Error("mesh has zero total area");

  SurfaceSamples out;
  out.points.resize(count, 3);
  out.bary.resize(count, 3);
  out.face.resize(count);
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const double u = rng.uniform() * acc;
    const int f = int(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const int fi = std::min<int>(f, int(cdf.size()) - 1);
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3 b(1.0 - r1, r1 * (1.0 - r2), r1 * r2);
    const auto& t = mesh.faces[fi];
    out.face[i] = fi;
    out.bary.row(i) = b.transpose();
    out.points.row(i) =
        (b[0] * mesh.vertices[t[0]] + b[1] * mesh.vertices[t[1]] + b[2] * mesh.vertices[t[2]])
            .transpose();
  }
  return out;
}

ChamferResult chamfer_one_directional(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt) {
  if (src.rows() < 1 || tgt.rows() < 1) throw Error("Chamfer distance needs nonempty point sets");
  std::vector<Vec3> tgt_pts(tgt.rows());
  for (int i = 0; i < tgt.rows(); ++i) tgt_pts[i] = tgt.row(i).transpose();
  const PointKdTree tree(tgt_pts);

  ChamferResult out;
  out.grad_src.resize(src.rows(), 3);
  const double inv_n = 1.0 / double(src.rows());
  std::vector<double> partial(src.rows());
  parallel_for(0, size_t(src.rows()), [&](size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) {
      const Vec3 p = src.row(i).transpose();
      double d2 = 0.0;
      const int j = tree.nearest(p, &d2);
      partial[i] = d2;
      out.grad_src.row(i) = 2.0 * inv_n * (p - tgt_pts[j]).transpose();
    }
  });
  double sum = 0.0;
  for (double d : partial) sum += d;  // fixed-order reduction
  out.value = sum * inv_n;
  return out;
}

std::pair<double, Eigen::MatrixXd> laplacian_loss(const TriMesh& mesh) {
  const auto adj = vertex_adjacency(mesh);
  const int V = int(mesh.vertices.size());
  for (int v = 0; v < V; ++v)
    if (adj[v].empty())
      throw TopologyError("vertex " + std::to_string(v) + " is isolated");

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(V, 3);
  double value = 0.0;
  std::vector<Vec3> residual(V);
  for (int v = 0; v < V; ++v) {
    Vec3 mean = Vec3::Zero();
    for (int u : adj[v]) mean += mesh.vertices[u];
    mean /= double(adj[v].size());
    residual[v] = mesh.vertices[v] - mean;
    value += residual[v].squaredNorm();
  }
  value /= V;
  for (int v = 0; v < V; ++v) {
    const Vec3 g = (2.0 / V) * residual[v];
    grad.row(v) += g.transpose();
    const double share = 1.0 / double(adj[v].size());
    for (int u : adj[v]) grad.row(u) -= share * g.transpose();
  }
  return {value, grad};
}

std::pair<double, Eigen::MatrixXd> triangle_quality_loss(const TriMesh& mesh) {
  const int V = int(mesh.vertices.size());
  const int F = int(mesh.faces.size());
  const auto edges = mesh_edges(mesh);
  const int E = int(edges.size());
  if (F == 0 || E == 0) throw Error("triangle quality loss needs a non-degenerate mesh");

  std::vector<double> elen(E);
  double lbar = 0.0;
  for (int e = 0; e < E; ++e) {
    elen[e] = (mesh.vertices[edges[e].first] - mesh.vertices[edges[e].second]).norm();
    lbar += elen[e];
  }
  lbar /= E;
  if (!(lbar > 0.0)) throw Error("mesh has zero mean edge length");
  const double eps_a = std::pow(1e-3 * lbar, 4);

  std::vector<double> area(F);
  std::vector<Vec3> ga(F), gb(F), gc(F);  // dA/d(vertex)
  double area_term = 0.0;
  double d_eps = 0.0;  // d(area term)/d(eps_a)
  for (int f = 0; f < F; ++f) {
    const auto& t = mesh.faces[f];
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    const Vec3 cr = triangle_cross(a, b, c);
    const double n = cr.norm();
    area[f] = 0.5 * n;
    const double denom = area[f] * area[f] + eps_a;
    area_term += eps_a / denom;
    d_eps += area[f] * area[f] / (denom * denom);
    if (n > 1e-300) {
      const Vec3 nh = cr / n;
      gb[f] = 0.5 * (c - a).cross(nh);
      gc[f] = 0.5 * nh.cross(b - a);
      ga[f] = -(gb[f] + gc[f]);
    } else {
      ga[f] = gb[f] = gc[f] = Vec3::Zero();
    }
  }
  area_term /= F;
  d_eps /= F;

  double edge_term = 0.0;
  double d_lbar_edge = 0.0;  // d(edge term)/d(lbar), direct part
  for (int e = 0; e < E; ++e) {
    const double r = elen[e] - lbar;
    edge_term += r * r / (lbar * lbar);
    d_lbar_edge += -2.0 * r / (lbar * lbar) - 2.0 * r * r / (lbar * lbar * lbar);
  }
  edge_term /= E;
  d_lbar_edge /= E;

  const double value = area_term + edge_term;

  // Total sensitivity to lbar: the barrier eps depends on it too.
  const double d_lbar = d_lbar_edge + d_eps * (4.0 * eps_a / lbar);

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(V, 3);
  for (int f = 0; f < F; ++f) {
    const auto& t = mesh.faces[f];
    const double dA = -(2.0 / F) * eps_a * area[f] /
                      ((area[f] * area[f] + eps_a) * (area[f] * area[f] + eps_a));
    grad.row(t[0]) += dA * ga[f].transpose();
    grad.row(t[1]) += dA * gb[f].transpose();
    grad.row(t[2]) += dA * gc[f].transpose();
  }
  for (int e = 0; e < E; ++e) {
    const double dl = (2.0 / E) * (elen[e] - lbar) / (lbar * lbar) + d_lbar / E;
    if (elen[e] > 1e-300) {
      const Vec3 dir = (mesh.vertices[edges[e].first] - mesh.vertices[edges[e].second]) / elen[e];
      grad.row(edges[e].first) += dl * dir.transpose();
      grad.row(edges[e].second) -= dl * dir.transpose();
    }
  }
  return {value, grad};
}

const RenderBuffers* GuideRenderCache::find(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &it->second->second;
}

void GuideRenderCache::insert(const std::string& key, RenderBuffers buffers) {
  if (index_.count(key)) return;
  entries_.emplace_front(key, std::move(buffers));
  index_[key] = entries_.begin();
  if (entries_.size() > capacity_) {
    index_.erase(entries_.back().first);
    entries_.pop_back();
  }
}

std::string GuideRenderCache::camera_key(const Camera& cam, double softness) {
  double vals[12] = {cam.position.x(), cam.position.y(), cam.position.z(),
                     cam.look_at.x(),  cam.look_at.y(),  cam.look_at.z(),
                     cam.up.x(),       cam.up.y(),       cam.up.z(),
                     cam.vertical_fov, double(cam.width) * 1e6 + cam.height, softness};
  std::vector<uint8_t> bytes(sizeof(vals));
  std::memcpy(bytes.data(), vals, sizeof(vals));
  return sha256_hex(bytes.data(), bytes.size());
}

namespace {

// Per-camera L1 value over concatenated silhouette + normal channels, plus the
// gradient w.r.t. the def buffers.
double l1_terms(const RenderBuffers& def, const RenderBuffers& guide, double scale,
                BufferGrad* grad) {
  const size_t np = def.pixel_count();
  const double w = 1.0 / double(np * 4);
  double sum = 0.0;
  for (size_t px = 0; px < np; ++px) {
    const double ds = def.silhouette[px] - guide.silhouette[px];
    sum += std::abs(ds) * w;
    if (grad && ds != 0.0) grad->silhouette[px] += scale * w * (ds > 0 ? 1.0 : -1.0);
    for (int c = 0; c < 3; ++c) {
      const double dn = def.normals[3 * px + c] - guide.normals[3 * px + c];
      sum += std::abs(dn) * w;
      if (grad && dn != 0.0) grad->normals[3 * px + c] += scale * w * (dn > 0 ? 1.0 : -1.0);
    }
  }
  return sum;
}

const RenderBuffers& guide_render(const TriMesh& guide, const Camera& cam, double softness,
                                  GuideRenderCache* cache, RenderBuffers& scratch) {
  if (!cache) {
    scratch = render(guide, cam, softness);
    return scratch;
  }
  const std::string key = GuideRenderCache::camera_key(cam, softness);
  if (const RenderBuffers* hit = cache->find(key)) return *hit;
  cache->insert(key, render(guide, cam, softness));
  return *cache->find(key);
}

}  // namespace

std::pair<double, Eigen::MatrixXd> render_l1(const TriMesh& def_mesh, const TriMesh& guide_mesh,
                                             const std::vector<Camera>& cameras, double softness,
                                             GuideRenderCache* guide_cache) {
  if (cameras.empty()) throw Error("render loss needs at least one camera");
  const int K = int(cameras.size());
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(int(def_mesh.vertices.size()), 3);
  double value = 0.0;
  for (const Camera& cam : cameras) {
    const RenderBuffers def = render(def_mesh, cam, softness);
    RenderBuffers scratch;
    const RenderBuffers& guide = guide_render(guide_mesh, cam, softness, guide_cache, scratch);
    BufferGrad g;
    g.resize_zero(def.width, def.height);
    value += l1_terms(def, guide, 1.0 / K, &g) / K;
    const std::vector<Vec3> dv = render_backward(def_mesh, cam, softness, g);
    for (size_t i = 0; i < dv.size(); ++i) grad.row(int(i)) += dv[i].transpose();
  }
  return {value, grad};
}

double embedding_loss(const std::vector<Image>& def_renders,
                      const std::vector<Image>& guide_renders, EmbeddingProvider& provider) {
  if (def_renders.size() != guide_renders.size())
    throw Error("embedding loss needs equal-length image lists");
  if (def_renders.empty()) throw Error("embedding loss needs at least one view");
  double sum = 0.0;
  for (size_t i = 0; i < def_renders.size(); ++i) {
    try {
      const EmbeddingVector ed = provider.embed(def_renders[i]);
      const EmbeddingVector eg = provider.embed(guide_renders[i]);
      sum += 1.0 - cosine_similarity(ed, eg);
    } catch (const ProviderError& e) {
      throw ProviderError(e.kind(), "view " + std::to_string(i) + ": " + e.what());
    }
  }
  return sum / double(def_renders.size());
}

TotalLossResult total_loss(const DeformContext& ctx, const JacobianField& jacobians,
                           const LossWeights& weights, std::uint64_t iter_seed) {
  weights.validate();
  if (!ctx.base || !ctx.guide || !ctx.op || !ctx.system)
    throw Error("total loss context is incomplete");

  TotalLossResult out;
  out.positions = ctx.system->solve(*ctx.op, jacobians);
  const TriMesh def = mesh_with_positions(*ctx.base, out.positions);
  const int V = int(def.vertices.size());
  Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(V, 3);

  auto check = [](double v, const char* term) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + term + " loss");
    return v;
  };

  if (weights.cd > 0.0) {
    // Provenance (face picks, barycentrics) comes from the rest mesh, whose
    // areas never change during optimization, so the loss stays smooth in the
    // Jacobians; the points themselves live on the deformed surface.
    SurfaceSamples src = sample_surface(*ctx.base, ctx.surface_samples, mix_seed(iter_seed, 1));
    src.points = src.reposition(def);
    const SurfaceSamples tgt =
        sample_surface(*ctx.guide, ctx.surface_samples, mix_seed(iter_seed, 2));
    const ChamferResult ch = chamfer_one_directional(src.points, tgt.points);
    out.breakdown.cd = weights.cd * check(ch.value, "chamfer");
    for (int i = 0; i < src.points.rows(); ++i) {
      const auto& t = def.faces[src.face[i]];
      for (int k = 0; k < 3; ++k)
        dV.row(t[k]) += weights.cd * src.bary(i, k) * ch.grad_src.row(i);
    }
  }

  if (weights.lap > 0.0) {
    const auto [v, g] = laplacian_loss(def);
    out.breakdown.lap = weights.lap * check(v, "laplacian");
    dV += weights.lap * g;
  }

  if (weights.triag > 0.0) {
    const auto [v, g] = triangle_quality_loss(def);
    out.breakdown.triag = weights.triag * check(v, "triangle quality");
    dV += weights.triag * g;
  }

  const bool want_render = weights.render2d > 0.0;
  const bool want_embed = weights.embed > 0.0 && ctx.provider;
  if (want_render || want_embed) {
    // Cameras orbit the guide mesh so their parameters stay constant in the
    // Jacobians (the guide never moves).
    const std::vector<Camera> cams =
        sample_cameras(mix_seed(iter_seed, 3), ctx.cameras_per_iter, *ctx.guide,
                       ctx.render_resolution, ctx.vertical_fov);
    const int K = int(cams.size());
    const bool embed_grad = want_embed && ctx.provider->differentiable();
    double l1_sum = 0.0, embed_sum = 0.0;
    for (int i = 0; i < K; ++i) {
      const RenderBuffers def_rb = render(def, cams[i], ctx.softness);
      RenderBuffers scratch;
      const RenderBuffers& guide_rb =
          guide_render(*ctx.guide, cams[i], ctx.softness, &ctx.guide_cache, scratch);
      BufferGrad g;
      g.resize_zero(def_rb.width, def_rb.height);
      if (want_render) l1_sum += l1_terms(def_rb, guide_rb, weights.render2d / K, &g);
      if (want_embed) {
        const Image def_img = buffers_to_image(def_rb);
        const Image guide_img = buffers_to_image(guide_rb);
        try {
          const EmbeddingVector ed = ctx.provider->embed(def_img);
          const EmbeddingVector eg = ctx.provider->embed(guide_img);
          embed_sum += 1.0 - cosine_similarity(ed, eg);
          if (embed_grad) {
            const Eigen::VectorXd dL_dE = -(weights.embed / K) * eg.values;
            const Image img_grad = ctx.provider->embed_backward(def_img, dL_dE);
            const BufferGrad bg = buffers_image_backward(def_rb, img_grad);
            for (size_t px = 0; px < def_rb.pixel_count(); ++px) {
              g.silhouette[px] += bg.silhouette[px];
              for (int c = 0; c < 3; ++c) g.normals[3 * px + c] += bg.normals[3 * px + c];
            }
          }
        } catch (const ProviderError& e) {
          throw ProviderError(e.kind(), "view " + std::to_string(i) + ": " + e.what());
        }
      }
      const std::vector<Vec3> dv = render_backward(def, cams[i], ctx.softness, g);
      for (int vi = 0; vi < V; ++vi) dV.row(vi) += dv[vi].transpose();
    }
    if (want_render) out.breakdown.render2d = weights.render2d * check(l1_sum / K, "render");
    if (want_embed) out.breakdown.embed = weights.embed * check(embed_sum / K, "embedding");
  }

  out.breakdown.total = out.breakdown.cd + out.breakdown.lap + out.breakdown.triag +
                        out.breakdown.render2d + out.breakdown.embed;
  check(out.breakdown.total, "total");
  out.grad = ctx.system->adjoint(*ctx.op, dV);
  return out;
}

}  // namespace garment
