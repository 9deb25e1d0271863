#include "garment/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "garment/errors.hpp"
#include "garment/rng.hpp"

namespace garment {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kIterTag = 0x6f7074;  // per-iteration seed stream
// A new best must improve by this relative margin; keeps sampling noise from
// resetting the early-stop patience forever.
constexpr double kImprovementRtol = 1e-4;

double cosine_lr(const OptConfig& cfg, int iteration) {
  const int span = std::max(1, cfg.iterations - 1);
  const double t = std::min(1.0, double(iteration) / double(span));
  return cfg.lr_final + 0.5 * (cfg.learning_rate - cfg.lr_final) * (1.0 + std::cos(kPi * t));
}

}  // namespace

void OptConfig::validate() const {
  if (iterations < 1) throw Error("iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be > 0");
  if (!(lr_final >= 0.0 && lr_final <= learning_rate))
    throw Error("lr_final must lie in [0, learning_rate]");
  if (cameras_per_iter < 1) throw Error("cameras_per_iter must be >= 1");
  if (surface_samples < 1) throw Error("surface_samples must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw Error("Adam betas must lie in [0, 1)");
  weights.validate();
}

DeformResult deform(const TriMesh& base, const TriMesh& guide, const OptConfig& config,
                    EmbeddingProvider* provider, const OptState* resume) {
  config.validate();
  base.validate();
  guide.validate();
  if (guide.faces.empty()) throw Error("guide mesh has no faces");
  boundary_edges(base);  // rejects non-manifold edges up front

  auto [op, system] = build_system(base);
  const int F = op.face_count;

  DeformContext ctx;
  ctx.base = &base;
  ctx.guide = &guide;
  ctx.op = &op;
  ctx.system = system.get();
  ctx.provider = provider;
  ctx.cameras_per_iter = config.cameras_per_iter;
  ctx.surface_samples = config.surface_samples;
  ctx.render_resolution = config.render_resolution;
  ctx.softness = config.softness;
  ctx.vertical_fov = config.vertical_fov;

  OptState state;
  if (resume) {
    state = *resume;
    if (int(state.jacobians.size()) != F)
      throw Error("checkpoint face count does not match the base mesh");
  } else {
    state.jacobians = identity_jacobians(F);
    state.m.assign(F, Mat3::Zero());
    state.v.assign(F, Mat3::Zero());
  }

  std::ofstream log;
  if (!config.loss_log_path.empty()) {
    const bool fresh = state.iteration == 0;
    log.open(config.loss_log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open loss log " + config.loss_log_path);
    if (fresh) log << "iteration,cd,lap,triag,render2d,embed,total\n";
  }

  Eigen::MatrixXd best_positions;
  const double eps = 1e-8;
  for (int it = state.iteration; it < config.iterations; ++it) {
    TotalLossResult res;
    try {
      res = total_loss(ctx, state.jacobians, config.weights, mix_seed(config.seed, it, kIterTag));
    } catch (const NumericError& e) {
      throw NumericError("optimization diverged at iteration " + std::to_string(it) + ": " +
                         e.what());
    }
    state.history.push_back(res.breakdown);
    if (log) {
      char line[256];
      std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", it,
                    res.breakdown.cd, res.breakdown.lap, res.breakdown.triag,
                    res.breakdown.render2d, res.breakdown.embed, res.breakdown.total);
      log << line;
    }

    if (res.breakdown.total < state.best_loss * (1.0 - kImprovementRtol) ||
        state.best_iteration < 0) {
      state.best_loss = res.breakdown.total;
      state.best_iteration = it;
      state.best_jacobians = state.jacobians;
      best_positions = res.positions;
    }

    const double lr = cosine_lr(config, it);
    const double t = double(it + 1);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (int f = 0; f < F; ++f) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
          const double g = res.grad[f](r, c);
          double& m = state.m[f](r, c);
          double& v = state.v[f](r, c);
          m = config.beta1 * m + (1.0 - config.beta1) * g;
          v = config.beta2 * v + (1.0 - config.beta2) * g * g;
          state.jacobians[f](r, c) -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        }
    }
    state.iteration = it + 1;

    if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
        state.iteration % config.checkpoint_every == 0)
      save_checkpoint(state, config.checkpoint_path);

    if (config.early_stop_patience > 0 && state.best_iteration >= 0 &&
        it - state.best_iteration >= config.early_stop_patience)
      break;
  }

  DeformResult out;
  out.state = std::move(state);
  if (best_positions.rows() == 0) {
    // Resumed run that never improved on the checkpointed best: re-solve it.
    const JacobianField& J = out.state.best_iteration >= 0 ? out.state.best_jacobians
                                                           : out.state.jacobians;
    best_positions = system->solve(op, J);
  }
  out.mesh = mesh_with_positions(base, best_positions);
  return out;
}

TriMesh align_guide(const TriMesh& base, const TriMesh& guide, bool yaw_search) {
  if (base.vertices.empty() || guide.vertices.empty())
    throw Error("alignment needs nonempty meshes");
  const Vec3 bc = base.centroid();
  const Vec3 gc = guide.centroid();
  const double br = base.bounding_radius();
  const double gr = guide.bounding_radius();
  const double scale = gr > 0.0 ? br / gr : 1.0;

  TriMesh aligned = guide;
  for (auto& v : aligned.vertices) v = bc + scale * (v - gc);
  if (!yaw_search || base.faces.empty() || guide.faces.empty()) return aligned;

  const SurfaceSamples base_samples = sample_surface(base, 2000, mix_seed(0xA11C, 0));
  double best = std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (int k = 0; k < 4; ++k) {
    const double yaw = 0.5 * kPi * k;
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    TriMesh cand = aligned;
    for (auto& v : cand.vertices) {
      const Vec3 r = v - bc;
      v = bc + Vec3(cy * r.x() + sy * r.z(), r.y(), -sy * r.x() + cy * r.z());
    }
    const SurfaceSamples cs = sample_surface(cand, 2000, mix_seed(0xA11C, 1));
    const double d = chamfer_one_directional(cs.points, base_samples.points).value;
    if (d < best) {
      best = d;
      best_k = k;
    }
  }
  if (best_k != 0) {
    const double yaw = 0.5 * kPi * best_k;
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    for (auto& v : aligned.vertices) {
      const Vec3 r = v - bc;
      v = bc + Vec3(cy * r.x() + sy * r.z(), r.y(), -sy * r.x() + cy * r.z());
    }
  }
  return aligned;
}

namespace {

constexpr char kMagic[4] = {'G', '3', 'D', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& data;
  size_t pos = 0;
  explicit Reader(const std::string& d) : data(d) {}
  void need(size_t n) const {
    if (pos + n > data.size()) throw IoError("corrupt checkpoint: unexpected end of file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(data[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
};

void put_field(std::string& out, const JacobianField& J) {
  put_u64(out, J.size());
  for (const Mat3& m : J)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) put_f64(out, m(r, c));
}

JacobianField get_field(Reader& in) {
  const std::uint64_t n = in.u64();
  if (n > (1ull << 32)) throw IoError("corrupt checkpoint: absurd field length");
  JacobianField J(n);
  for (auto& m : J)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = in.f64();
  return J;
}

}  // namespace

void save_checkpoint(const OptState& state, const std::string& path) {
  std::string blob;
  blob.append(kMagic, 4);
  put_u32(blob, kVersion);
  put_u32(blob, std::uint32_t(state.iteration));
  put_u32(blob, std::uint32_t(state.best_iteration + 1));  // 0 = none
  put_f64(blob, state.best_loss);
  put_field(blob, state.jacobians);
  put_field(blob, state.m);
  put_field(blob, state.v);
  put_field(blob, state.best_jacobians);
  put_u64(blob, state.history.size());
  for (const LossBreakdown& b : state.history) {
    put_f64(blob, b.cd);
    put_f64(blob, b.lap);
    put_f64(blob, b.triag);
    put_f64(blob, b.render2d);
    put_f64(blob, b.embed);
    put_f64(blob, b.total);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(blob.data(), std::streamsize(blob.size()));
  if (!out) throw IoError("short write on checkpoint " + path);
}

OptState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 8 || std::memcmp(data.data(), kMagic, 4) != 0)
    throw IoError(path + " is not a checkpoint file");
  Reader r(data);
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  OptState s;
  s.iteration = int(r.u32());
  s.best_iteration = int(r.u32()) - 1;
  s.best_loss = r.f64();
  s.jacobians = get_field(r);
  s.m = get_field(r);
  s.v = get_field(r);
  s.best_jacobians = get_field(r);
  const std::uint64_t hist = r.u64();
  if (hist > (1ull << 32)) throw IoError("corrupt checkpoint: absurd history length");
  s.history.resize(hist);
  for (auto& b : s.history) {
    b.cd = r.f64();
    b.lap = r.f64();
    b.triag = r.f64();
    b.render2d = r.f64();
    b.embed = r.f64();
    b.total = r.f64();
  }
  if (r.pos != data.size()) throw IoError("corrupt checkpoint: trailing bytes");
  if (s.jacobians.size() != s.m.size() || s.m.size() != s.v.size())
    throw IoError("corrupt checkpoint: inconsistent field sizes");
  return s;
}

}  // namespace garment
