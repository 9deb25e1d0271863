#include "garment/bodyfit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "garment/bvh.hpp"
#include "garment/errors.hpp"
#include "garment/losses.hpp"
#include "garment/rng.hpp"
#include "json.hpp"

namespace garment {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// d R(aa) / d aa_i for i = 0..2 (Gallego & Yezzi 2015). Exact, including the
// aa -> 0 limit where dR_i = [e_i]x.
std::array<Mat3, 3> rotation_derivatives(const Vec3& aa, const Mat3& R) {
  std::array<Mat3, 3> d;
  const double n2 = aa.squaredNorm();
  if (n2 < 1e-16) {
    for (int i = 0; i < 3; ++i) d[i] = skew(Vec3::Unit(i));
    return d;
  }
  const Mat3 im_r = Mat3::Identity() - R;
  for (int i = 0; i < 3; ++i) {
    const Vec3 w = aa.cross(im_r.col(i));
    d[i] = (aa[i] * skew(aa) + skew(w)) * R / n2;
  }
  return d;
}

struct JointFrame {
  Mat3 linear = Mat3::Identity();   // rotation part of the global transform
  Vec3 offset = Vec3::Zero();       // translation part
  Mat3 local_rot = Mat3::Identity();
};

std::vector<JointFrame> joint_frames(const ParametricBody& body, const FitParams& params) {
  const int nj = body.joint_count();
  std::vector<JointFrame> frames(nj);
  for (int j = 0; j < nj; ++j) {
    const Joint& joint = body.joints[j];
    JointFrame f;
    f.local_rot = axis_angle_to_matrix(params.pose.row(j).transpose());
    Mat3 parent_lin = Mat3::Identity();
    Vec3 parent_off = Vec3::Zero();
    if (joint.parent >= 0) {
      parent_lin = frames[joint.parent].linear;
      parent_off = frames[joint.parent].offset;
    }
    // A_j rotates about the joint's rest position: x -> R (x - r) + r.
    f.linear = parent_lin * f.local_rot;
    f.offset = parent_lin * (joint.rest_position - f.local_rot * joint.rest_position) +
               parent_off;
    frames[j] = f;
  }
  return frames;
}

Eigen::MatrixXd shaped_vertices(const ParametricBody& body, const FitParams& params) {
  const int nv = body.vertex_count();
  Eigen::MatrixXd shaped(nv, 3);
  for (int v = 0; v < nv; ++v) shaped.row(v) = body.template_mesh.vertices[v].transpose();
  for (int s = 0; s < body.shape_count(); ++s) shaped += params.shape[s] * body.shape_basis[s];
  return shaped;
}

// ancestors[j] holds j itself plus every joint on the path to the root.
std::vector<std::vector<int>> ancestor_lists(const ParametricBody& body) {
  std::vector<std::vector<int>> anc(body.joint_count());
  for (int j = 0; j < body.joint_count(); ++j) {
    for (int k = j; k >= 0; k = body.joints[k].parent) anc[j].push_back(k);
  }
  return anc;
}

double smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const unsigned char* p = nullptr;
  size_t n = 0;
  size_t at = 0;
  void need(size_t k) const {
    if (at + k > n) throw ParseError("corrupt body file: unexpected end of data");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[at + i]) << (8 * i);
    at += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[at + i]) << (8 * i);
    at += 8;
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

constexpr char kBodyMagic[4] = {'G', 'B', 'D', 'Y'};
constexpr std::uint32_t kBodyVersion = 1;

}  // namespace

void FitParams::require_finite() const {
  bool ok = translation.allFinite() && rotation.allFinite() && std::isfinite(scale) &&
            scale > 0.0 && shape.allFinite() && pose.allFinite();
  if (!ok) throw NumericError("fit parameters contain non-finite values or non-positive scale");
}

FitParams ParametricBody::identity_params() const {
  FitParams p;
  p.shape = Eigen::VectorXd::Zero(shape_count());
  p.pose = Eigen::MatrixXd::Zero(joint_count(), 3);
  return p;
}

void ParametricBody::validate() const {
  template_mesh.validate();
  const int nv = vertex_count();
  if (joints.empty()) throw TopologyError("body has no joints");
  if (joints[0].parent != -1) throw TopologyError("body joint 0 must be the root");
  for (int j = 1; j < joint_count(); ++j) {
    if (joints[j].parent < 0 || joints[j].parent >= j)
      throw TopologyError("body joints must be topologically ordered (parent index < child)");
  }
  for (const auto& basis : shape_basis) {
    if (basis.rows() != nv || basis.cols() != 3)
      throw TopologyError("shape basis size does not match the template mesh");
    if (!basis.allFinite()) throw NumericError("shape basis contains non-finite values");
  }
  if (weights.rows() != nv || weights.cols() != joint_count())
    throw TopologyError("skinning weight matrix size does not match vertices x joints");
  for (int v = 0; v < nv; ++v) {
    double sum = 0.0;
    for (int j = 0; j < joint_count(); ++j) {
      const double w = weights(v, j);
      if (!std::isfinite(w) || w < -1e-9)
        throw TopologyError("skinning weights must be finite and non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw TopologyError("skinning weights of vertex " + std::to_string(v) +
                          " do not sum to 1");
  }
}

Mat3 axis_angle_to_matrix(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle < 1e-12) {
    // Second-order small-angle expansion keeps the result a rotation to ~1e-24.
    return Mat3::Identity() + skew(aa) + 0.5 * skew(aa) * skew(aa);
  }
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

Mat3 rotate_point_jacobian(const Vec3& aa, const Vec3& x) {
  const Mat3 R = axis_angle_to_matrix(aa);
  const auto d = rotation_derivatives(aa, R);
  Mat3 out;
  for (int i = 0; i < 3; ++i) out.col(i) = d[i] * x;
  return out;
}

Eigen::VectorXd pack_params(const ParametricBody& body, const FitParams& params) {
  if (params.shape.size() != body.shape_count() || params.pose.rows() != body.joint_count() ||
      params.pose.cols() != 3)
    throw Error("fit parameter sizes do not match the body");
  params.require_finite();
  Eigen::VectorXd x(body.param_count());
  x.segment<3>(0) = params.translation;
  x.segment<3>(3) = params.rotation;
  x[6] = std::log(params.scale);
  x.segment(7, body.shape_count()) = params.shape;
  for (int j = 0; j < body.joint_count(); ++j)
    x.segment<3>(7 + body.shape_count() + 3 * j) = params.pose.row(j).transpose();
  return x;
}

FitParams unpack_params(const ParametricBody& body, const Eigen::VectorXd& packed) {
  if (packed.size() != body.param_count())
    throw Error("packed parameter vector has wrong length");
  FitParams p;
  p.translation = packed.segment<3>(0);
  p.rotation = packed.segment<3>(3);
  p.scale = std::exp(packed[6]);
  p.shape = packed.segment(7, body.shape_count());
  p.pose.resize(body.joint_count(), 3);
  for (int j = 0; j < body.joint_count(); ++j)
    p.pose.row(j) = packed.segment<3>(7 + body.shape_count() + 3 * j).transpose();
  return p;
}

TriMesh pose_body(const ParametricBody& body, const FitParams& params) {
  params.require_finite();
  if (params.shape.size() != body.shape_count() || params.pose.rows() != body.joint_count())
    throw Error("fit parameter sizes do not match the body");
  const Eigen::MatrixXd shaped = shaped_vertices(body, params);
  const auto frames = joint_frames(body, params);
  const Mat3 rg = axis_angle_to_matrix(params.rotation);
  TriMesh out = body.template_mesh;
  for (int v = 0; v < body.vertex_count(); ++v) {
    const Vec3 sv = shaped.row(v).transpose();
    Vec3 skinned = Vec3::Zero();
    for (int j = 0; j < body.joint_count(); ++j) {
      const double w = body.weights(v, j);
      if (w == 0.0) continue;
      skinned += w * (frames[j].linear * sv + frames[j].offset);
    }
    out.vertices[v] = params.scale * (rg * skinned) + params.translation;
  }
  return out;
}

PosedBody pose_body_with_jacobian(const ParametricBody& body, const FitParams& params) {
  params.require_finite();
  if (params.shape.size() != body.shape_count() || params.pose.rows() != body.joint_count())
    throw Error("fit parameter sizes do not match the body");
  const int nv = body.vertex_count();
  const int ns = body.shape_count();
  const int nj = body.joint_count();
  const int np = body.param_count();

  const Eigen::MatrixXd shaped = shaped_vertices(body, params);
  const auto frames = joint_frames(body, params);
  const auto anc = ancestor_lists(body);
  const Mat3 rg = axis_angle_to_matrix(params.rotation);
  const auto drg = rotation_derivatives(params.rotation, rg);
  std::vector<std::array<Mat3, 3>> djoint(nj);
  for (int j = 0; j < nj; ++j)
    djoint[j] = rotation_derivatives(params.pose.row(j).transpose(), frames[j].local_rot);

  PosedBody out;
  out.mesh = body.template_mesh;
  out.jacobian.assign(nv, Eigen::MatrixXd::Zero(3, np));

  std::vector<Vec3> posed_joint(nj);  // per-vertex scratch, reused
  for (int v = 0; v < nv; ++v) {
    const Vec3 sv = shaped.row(v).transpose();
    Vec3 skinned = Vec3::Zero();
    Mat3 blend_lin = Mat3::Zero();
    for (int j = 0; j < nj; ++j) {
      const double w = body.weights(v, j);
      if (w == 0.0) {
        posed_joint[j] = Vec3::Zero();
        continue;
      }
      posed_joint[j] = frames[j].linear * sv + frames[j].offset;
      skinned += w * posed_joint[j];
      blend_lin += w * frames[j].linear;
    }
    out.mesh.vertices[v] = params.scale * (rg * skinned) + params.translation;

    Eigen::MatrixXd& jac = out.jacobian[v];
    jac.block<3, 3>(0, 0) = Mat3::Identity();
    for (int c = 0; c < 3; ++c) jac.col(3 + c) = params.scale * (drg[c] * skinned);
    jac.col(6) = params.scale * (rg * skinned);  // scale enters as exp(log_scale)
    const Mat3 srw = params.scale * rg * blend_lin;
    for (int s = 0; s < ns; ++s)
      jac.col(7 + s) = srw * body.shape_basis[s].row(v).transpose();

    const Mat3 sr = params.scale * rg;
    for (int j = 0; j < nj; ++j) {
      const double w = body.weights(v, j);
      if (w == 0.0) continue;
      // pose_k moves this vertex through joint j iff k lies on j's chain.
      for (int k : anc[j]) {
        Mat3 parent_lin = Mat3::Identity();
        if (body.joints[k].parent >= 0) parent_lin = frames[body.joints[k].parent].linear;
        // Point expressed in k's pre-rotation frame, relative to the pivot.
        const Vec3 local =
            frames[k].linear.transpose() * (posed_joint[j] - frames[k].offset) -
            body.joints[k].rest_position;
        for (int c = 0; c < 3; ++c) {
          jac.col(7 + ns + 3 * k + c) += w * (sr * (parent_lin * (djoint[k][c] * local)));
        }
      }
    }
  }
  return out;
}

std::pair<double, Eigen::MatrixXd> collision_penalty(const TriMesh& body_mesh,
                                                     const TriMesh& garment, double margin) {
  MeshBvh bvh(body_mesh);
  const int nv = int(body_mesh.vertices.size());
  const int ng = int(garment.vertices.size());
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(nv, 3);
  if (ng == 0) return {0.0, grad};
  double value = 0.0;
  for (int g = 0; g < ng; ++g) {
    const auto hit = bvh.closest_point(garment.vertices[g]);
    const auto& f = body_mesh.faces[size_t(hit.face)];
    const Vec3 a = body_mesh.vertices[size_t(f[0])];
    const Vec3 b = body_mesh.vertices[size_t(f[1])];
    const Vec3 c = body_mesh.vertices[size_t(f[2])];
    const Vec3 n = (b - a).cross(c - a).normalized();
    const double depth = margin - (garment.vertices[g] - hit.point).dot(n);
    if (depth <= 0.0) continue;
    value += depth * depth;
    // Normal and barycentrics are held fixed; only the witness point moves.
    const Vec3 dp = (2.0 / ng) * depth * n;
    for (int k = 0; k < 3; ++k) grad.row(f[size_t(k)]) += hit.bary[size_t(k)] * dp.transpose();
  }
  return {value / ng, grad};
}

double penetration_fraction(const TriMesh& body_mesh, const TriMesh& garment) {
  MeshBvh bvh(body_mesh);
  int inside = 0;
  for (const Vec3& g : garment.vertices) {
    const auto hit = bvh.closest_point(g);
    const auto& f = body_mesh.faces[size_t(hit.face)];
    const Vec3 a = body_mesh.vertices[size_t(f[0])];
    const Vec3 b = body_mesh.vertices[size_t(f[1])];
    const Vec3 c = body_mesh.vertices[size_t(f[2])];
    const Vec3 n = (b - a).cross(c - a);
    if ((g - hit.point).dot(n) < 0.0) ++inside;
  }
  return garment.vertices.empty() ? 0.0 : double(inside) / double(garment.vertices.size());
}

void FitConfig::validate() const {
  for (const FitStageConfig* s : {&rigid, &articulated, &collision}) {
    if (s->iterations < 0) throw Error("fit stage iteration count must be >= 0");
    if (!(s->learning_rate > 0.0)) throw Error("fit stage learning rate must be positive");
  }
  if (garment_samples < 1) throw Error("garment sample count must be >= 1");
  if (collision_margin < 0.0) throw Error("collision margin must be >= 0");
  if (collision_weight < 0.0) throw Error("collision weight must be >= 0");
}

FitResult fit_body_to_garment(const ParametricBody& body, const TriMesh& garment,
                              const FitConfig& config, const FitParams* initial) {
  config.validate();
  body.validate();
  garment.validate();

  const SurfaceSamples samples =
      sample_surface(garment, config.garment_samples, mix_seed(config.seed, 0xB0D1));
  const int np = body.param_count();
  Eigen::VectorXd x = pack_params(body, initial ? *initial : body.identity_params());

  FitResult result;
  result.stage_history.resize(3);
  const FitStageConfig* stages[3] = {&config.rigid, &config.articulated, &config.collision};
  for (int stage = 0; stage < 3; ++stage) {
    const FitStageConfig& sc = *stages[stage];
    const bool with_collision = stage == 2;
    // Stage 1 is rigid: translation, rotation, log-scale only.
    const int active = stage == 0 ? 7 : np;

    Eigen::VectorXd m = Eigen::VectorXd::Zero(np), v = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd best_x = x;
    double best_loss = std::numeric_limits<double>::infinity();
    const double lr0 = sc.learning_rate, lr1 = 0.1 * sc.learning_rate;
    const int span = std::max(1, sc.iterations - 1);

    for (int it = 0; it < sc.iterations; ++it) {
      const FitParams params = unpack_params(body, x);
      const PosedBody posed = pose_body_with_jacobian(body, params);
      MeshBvh bvh(posed.mesh);

      Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(body.vertex_count(), 3);
      double loss = 0.0;
      const int n = int(samples.points.rows());
      for (int i = 0; i < n; ++i) {
        const Vec3 q = samples.points.row(i).transpose();
        const auto hit = bvh.closest_point(q);
        const Vec3 diff = q - hit.point;
        loss += diff.squaredNorm();
        const auto& f = posed.mesh.faces[size_t(hit.face)];
        for (int k = 0; k < 3; ++k)
          dv.row(f[size_t(k)]) -= (2.0 / n) * hit.bary[size_t(k)] * diff.transpose();
      }
      loss /= n;
      if (with_collision) {
        auto [cval, cgrad] = collision_penalty(posed.mesh, garment, config.collision_margin);
        loss += config.collision_weight * cval;
        dv += config.collision_weight * cgrad;
      }
      if (!std::isfinite(loss)) throw NumericError("body fit diverged at stage " +
                                                   std::to_string(stage + 1));
      result.stage_history[size_t(stage)].push_back(loss);
      if (loss < best_loss) {
        best_loss = loss;
        best_x = x;
      }

      Eigen::VectorXd g = Eigen::VectorXd::Zero(np);
      for (int vi = 0; vi < body.vertex_count(); ++vi)
        g += posed.jacobian[size_t(vi)].transpose() * dv.row(vi).transpose();
      g.tail(np - active).setZero();

      const double lr = lr1 + (lr0 - lr1) * 0.5 *
                                  (1.0 + std::cos(std::numbers::pi * double(it) / span));
      const double t = it + 1;
      for (int i = 0; i < active; ++i) {
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
        const double mh = m[i] / (1.0 - std::pow(0.9, t));
        const double vh = v[i] / (1.0 - std::pow(0.999, t));
        x[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
      }
      if (!x.allFinite()) throw NumericError("body fit diverged at stage " +
                                             std::to_string(stage + 1));
    }
    if (sc.iterations > 0) x = best_x;
  }

  result.params = unpack_params(body, x);
  const TriMesh posed = pose_body(body, result.params);
  result.penetration = penetration_fraction(posed, garment);
  return result;
}

void save_body(const ParametricBody& body, const std::string& path) {
  body.validate();
  nlohmann::json header;
  header["vertex_count"] = body.vertex_count();
  header["face_count"] = int(body.template_mesh.faces.size());
  header["uv_count"] = int(body.template_mesh.uvs.size());
  header["shape_count"] = body.shape_count();
  header["joint_count"] = body.joint_count();
  auto parents = nlohmann::json::array();
  auto names = nlohmann::json::array();
  for (const Joint& j : body.joints) {
    parents.push_back(j.parent);
    names.push_back(j.name);
  }
  header["joint_parents"] = parents;
  header["joint_names"] = names;
  const std::string header_text = header.dump();

  std::string out;
  out.append(kBodyMagic, 4);
  put_u32(out, kBodyVersion);
  put_u64(out, header_text.size());
  out += header_text;
  for (const Vec3& v : body.template_mesh.vertices)
    for (int i = 0; i < 3; ++i) put_f64(out, v[i]);
  for (const auto& f : body.template_mesh.faces)
    for (int i = 0; i < 3; ++i) put_u32(out, std::uint32_t(f[size_t(i)]));
  for (const Vec2& uv : body.template_mesh.uvs)
    for (int i = 0; i < 2; ++i) put_f64(out, uv[i]);
  if (!body.template_mesh.uvs.empty())
    for (const auto& f : body.template_mesh.uv_faces)
      for (int i = 0; i < 3; ++i) put_u32(out, std::uint32_t(f[size_t(i)]));
  for (const auto& basis : body.shape_basis)
    for (int v = 0; v < basis.rows(); ++v)
      for (int i = 0; i < 3; ++i) put_f64(out, basis(v, i));
  for (const Joint& j : body.joints)
    for (int i = 0; i < 3; ++i) put_f64(out, j.rest_position[i]);
  for (int v = 0; v < body.weights.rows(); ++v)
    for (int j = 0; j < body.weights.cols(); ++j) put_f64(out, body.weights(v, j));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open body file for writing: " + path);
  file.write(out.data(), std::streamsize(out.size()));
  if (!file) throw IoError("failed writing body file: " + path);
}

ParametricBody load_body(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open body file: " + path);
  std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  Reader r{reinterpret_cast<const unsigned char*>(data.data()), data.size(), 0};
  r.need(4);
  if (std::memcmp(data.data(), kBodyMagic, 4) != 0)
    throw ParseError(path + ": not a body file (bad magic)");
  r.at = 4;
  const std::uint32_t version = r.u32();
  if (version != kBodyVersion)
    throw ParseError(path + ": unsupported body file version " + std::to_string(version));
  const std::uint64_t header_len = r.u64();
  if (header_len > data.size()) throw ParseError(path + ": corrupt header length");
  r.need(header_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(data.substr(r.at, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad header JSON: " + e.what());
  }
  r.at += header_len;

  ParametricBody body;
  try {
    const int nv = header.at("vertex_count").get<int>();
    const int nf = header.at("face_count").get<int>();
    const int nuv = header.at("uv_count").get<int>();
    const int ns = header.at("shape_count").get<int>();
    const int nj = header.at("joint_count").get<int>();
    if (nv < 3 || nf < 1 || nuv < 0 || ns < 0 || nj < 1)
      throw ParseError(path + ": implausible header counts");
    body.template_mesh.name = "body";
    body.template_mesh.vertices.resize(size_t(nv));
    for (auto& v : body.template_mesh.vertices)
      for (int i = 0; i < 3; ++i) v[i] = r.f64();
    body.template_mesh.faces.resize(size_t(nf));
    for (auto& f : body.template_mesh.faces)
      for (int i = 0; i < 3; ++i) f[size_t(i)] = int(r.u32());
    body.template_mesh.uvs.resize(size_t(nuv));
    for (auto& uv : body.template_mesh.uvs)
      for (int i = 0; i < 2; ++i) uv[i] = r.f64();
    if (nuv > 0) {
      body.template_mesh.uv_faces.resize(size_t(nf));
      for (auto& f : body.template_mesh.uv_faces)
        for (int i = 0; i < 3; ++i) f[size_t(i)] = int(r.u32());
    }
    body.shape_basis.assign(size_t(ns), Eigen::MatrixXd(nv, 3));
    for (auto& basis : body.shape_basis)
      for (int v = 0; v < nv; ++v)
        for (int i = 0; i < 3; ++i) basis(v, i) = r.f64();
    body.joints.resize(size_t(nj));
    const auto& parents = header.at("joint_parents");
    const auto& names = header.at("joint_names");
    if (int(parents.size()) != nj || int(names.size()) != nj)
      throw ParseError(path + ": joint array lengths do not match joint_count");
    for (int j = 0; j < nj; ++j) {
      body.joints[size_t(j)].parent = parents[size_t(j)].get<int>();
      body.joints[size_t(j)].name = names[size_t(j)].get<std::string>();
      for (int i = 0; i < 3; ++i) body.joints[size_t(j)].rest_position[i] = r.f64();
    }
    body.weights.resize(nv, nj);
    for (int v = 0; v < nv; ++v)
      for (int j = 0; j < nj; ++j) body.weights(v, j) = r.f64();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad header JSON: " + e.what());
  }
  if (r.at != r.n) throw ParseError(path + ": trailing bytes after body payload");
  body.validate();
  return body;
}

ParametricBody make_test_body(int radial_segments, int height_segments) {
  if (radial_segments < 3 || height_segments < 1)
    throw Error("test body needs at least 3 radial and 1 height segments");
  const double radius = 0.15;
  const double height = 1.6;
  ParametricBody body;
  TriMesh& mesh = body.template_mesh;
  mesh.name = "test_body";

  for (int row = 0; row <= height_segments; ++row) {
    const double y = height * double(row) / height_segments;
    for (int k = 0; k < radial_segments; ++k) {
      const double theta = 2.0 * std::numbers::pi * double(k) / radial_segments;
      mesh.vertices.emplace_back(radius * std::cos(theta), y, radius * std::sin(theta));
    }
  }
  const int bottom_center = int(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 0.0, 0.0);
  const int top_center = int(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, height, 0.0);

  auto ring = [&](int row, int k) { return row * radial_segments + (k % radial_segments); };
  for (int row = 0; row < height_segments; ++row) {
    for (int k = 0; k < radial_segments; ++k) {
      mesh.faces.push_back({ring(row, k), ring(row + 1, k), ring(row + 1, k + 1)});
      mesh.faces.push_back({ring(row, k), ring(row + 1, k + 1), ring(row, k + 1)});
    }
  }
  for (int k = 0; k < radial_segments; ++k) {
    mesh.faces.push_back({bottom_center, ring(0, k), ring(0, k + 1)});
    mesh.faces.push_back({top_center, ring(height_segments, k + 1), ring(height_segments, k)});
  }

  body.joints.resize(2);
  body.joints[0] = {-1, Vec3(0, 0, 0), "root"};
  body.joints[1] = {0, Vec3(0, 0.8, 0), "mid"};

  const int nv = body.vertex_count();
  body.weights.resize(nv, 2);
  for (int v = 0; v < nv; ++v) {
    const double y = mesh.vertices[size_t(v)].y();
    const double w_mid = smoothstep01((y - 0.7) / 0.2);
    body.weights(v, 0) = 1.0 - w_mid;
    body.weights(v, 1) = w_mid;
  }

  // Shape 0 inflates radially in XZ; shape 1 stretches upward.
  Eigen::MatrixXd radial = Eigen::MatrixXd::Zero(nv, 3);
  Eigen::MatrixXd stretch = Eigen::MatrixXd::Zero(nv, 3);
  for (int v = 0; v < nv; ++v) {
    const Vec3& p = mesh.vertices[size_t(v)];
    const double r = std::hypot(p.x(), p.z());
    if (r > 1e-12) {
      radial(v, 0) = 0.03 * p.x() / r;
      radial(v, 2) = 0.03 * p.z() / r;
    }
    stretch(v, 1) = 0.05 * p.y() / height;
  }
  body.shape_basis = {radial, stretch};
  body.validate();
  return body;
}

void save_fit_params_json(const ParametricBody& body, const FitParams& params,
                          const std::string& path) {
  nlohmann::json j;
  j["translation"] = {params.translation.x(), params.translation.y(), params.translation.z()};
  j["rotation_axis_angle"] = {params.rotation.x(), params.rotation.y(), params.rotation.z()};
  j["scale"] = params.scale;
  auto shape = nlohmann::json::array();
  for (int s = 0; s < params.shape.size(); ++s) shape.push_back(params.shape[s]);
  j["shape"] = shape;
  auto pose = nlohmann::json::array();
  for (int k = 0; k < params.pose.rows(); ++k) {
    pose.push_back({{"joint", body.joints[size_t(k)].name},
                    {"axis_angle", {params.pose(k, 0), params.pose(k, 1), params.pose(k, 2)}}});
  }
  j["pose"] = pose;
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot open fit parameter file for writing: " + path);
  file << j.dump(2) << "\n";
  if (!file) throw IoError("failed writing fit parameter file: " + path);
}

}  // namespace garment
