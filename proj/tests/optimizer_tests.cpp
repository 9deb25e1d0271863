#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "garment/optimizer.hpp"
#include "garment/rng.hpp"
#include "support/fixtures.hpp"

using namespace garment;
using namespace garment::testfx;

namespace {

// Icosphere stretched along +x so no yaw leaves it invariant.
TriMesh make_lopsided_blob() {
  TriMesh m = make_icosphere(2);
  for (auto& v : m.vertices)
    if (v.x() > 0.0) v.x() *= 1.0 + 0.35 * v.x();
  return m;
}

OptConfig fast_config(int iterations, std::uint64_t seed = 7) {
  OptConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.surface_samples = 200;
  cfg.cameras_per_iter = 1;
  cfg.weights.render2d = 0.0;  // geometry-only: keeps unit runs fast
  cfg.weights.embed = 0.0;
  cfg.early_stop_patience = 0;
  return cfg;
}

double max_vertex_gap(const TriMesh& a, const TriMesh& b) {
  REQUIRE(a.vertices.size() == b.vertices.size());
  double worst = 0.0;
  for (size_t i = 0; i < a.vertices.size(); ++i)
    worst = std::max(worst, (a.vertices[i] - b.vertices[i]).norm());
  return worst;
}

JacobianField random_field(int n, uint32_t seed) {
  JacobianField J(static_cast<size_t>(n));
  uint32_t state = seed;
  for (auto& m : J)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        state = state * 1664525u + 1013904223u;
        m(r, c) = double(state >> 8) / double(1u << 24) - 0.5;
      }
  return J;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("align_guide matches centroid and bounding radius") {
  const TriMesh base = make_lopsided_blob();
  TriMesh guide = base;
  similarity_transform(guide, guide.centroid(), 2.0, Mat3::Identity());
  for (auto& v : guide.vertices) v += Vec3(5.0, 1.0, -2.0);

  const TriMesh aligned = align_guide(base, guide);
  CHECK((aligned.centroid() - base.centroid()).norm() < 1e-9);
  CHECK(aligned.bounding_radius() == doctest::Approx(base.bounding_radius()).epsilon(1e-9));
  // No rotation was applied, so the similarity inverts exactly.
  CHECK(max_vertex_gap(aligned, base) < 1e-9);
}

TEST_CASE("align_guide recovers a 180-degree yaw") {
  const TriMesh base = make_lopsided_blob();
  TriMesh guide = base;
  similarity_transform(guide, guide.centroid(), 1.7, yaw_matrix(180.0));
  for (auto& v : guide.vertices) v += Vec3(-3.0, 0.5, 4.0);

  const TriMesh off = align_guide(base, guide, /*yaw_search=*/false);
  CHECK(max_vertex_gap(off, base) > 0.2);  // still facing the wrong way

  const TriMesh aligned = align_guide(base, guide, /*yaw_search=*/true);
  CHECK(max_vertex_gap(aligned, base) < 1e-9);
}

TEST_CASE("align_guide rejects empty meshes") {
  CHECK_THROWS_AS(align_guide(TriMesh{}, make_triangle()), Error);
}

TEST_CASE("config validation rejects nonsense") {
  OptConfig cfg;
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = OptConfig{};
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = OptConfig{};
  cfg.lr_final = cfg.learning_rate * 2.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = OptConfig{};
  cfg.beta2 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = OptConfig{};
  cfg.weights.cd = -0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  TempDir dir;
  OptState state;
  state.iteration = 7;
  state.best_iteration = 3;
  state.best_loss = 0.25;
  state.jacobians = random_field(5, 11);
  state.m = random_field(5, 22);
  state.v = random_field(5, 33);
  state.best_jacobians = random_field(5, 44);
  state.history.resize(3);
  for (size_t i = 0; i < state.history.size(); ++i) {
    auto& b = state.history[i];
    b.cd = 0.1 * double(i + 1);
    b.lap = 0.01 * double(i + 1);
    b.triag = 1e-3 * double(i + 1);
    b.render2d = 0.2 * double(i + 1);
    b.embed = 0.3 * double(i + 1);
    b.total = b.cd + b.lap + b.triag + b.render2d + b.embed;
  }

  const std::string path = dir.file("state.ckpt");
  save_checkpoint(state, path);
  const OptState back = load_checkpoint(path);

  CHECK(back.iteration == state.iteration);
  CHECK(back.best_iteration == state.best_iteration);
  CHECK(back.best_loss == state.best_loss);
  REQUIRE(back.jacobians.size() == state.jacobians.size());
  for (size_t f = 0; f < state.jacobians.size(); ++f) {
    CHECK((back.jacobians[f] - state.jacobians[f]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.m[f] - state.m[f]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.v[f] - state.v[f]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.best_jacobians[f] - state.best_jacobians[f]).cwiseAbs().maxCoeff() == 0.0);
  }
  REQUIRE(back.history.size() == state.history.size());
  for (size_t i = 0; i < state.history.size(); ++i) {
    CHECK(back.history[i].total == state.history[i].total);
    CHECK(back.history[i].embed == state.history[i].embed);
  }
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir;
  OptState state;
  state.jacobians = random_field(3, 1);
  state.m = random_field(3, 2);
  state.v = random_field(3, 3);
  state.best_jacobians = random_field(3, 4);
  const std::string path = dir.file("state.ckpt");
  save_checkpoint(state, path);
  const std::string blob = slurp(path);

  auto write_variant = [&](const std::string& bytes) {
    const std::string p = dir.file("variant.ckpt");
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.close();
    return p;
  };

  CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt")), IoError);
  CHECK_THROWS_AS(load_checkpoint(write_variant(blob.substr(0, blob.size() / 2))), IoError);
  CHECK_THROWS_AS(load_checkpoint(write_variant("XXXX" + blob.substr(4))), IoError);
  CHECK_THROWS_AS(load_checkpoint(write_variant(blob + "z")), IoError);

  std::string wrong_version = blob;
  wrong_version[4] = 2;  // version field follows the magic
  try {
    load_checkpoint(write_variant(wrong_version));
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("deform improves on the initial loss and preserves connectivity") {
  const TriMesh base = make_grid(3, 3);
  TriMesh guide = base;
  similarity_transform(guide, Vec3::Zero(), 1.4, Mat3::Identity());

  const DeformResult res = deform(base, guide, fast_config(60));
  REQUIRE(int(res.state.history.size()) == 60);
  CHECK(res.state.best_loss < res.state.history.front().total);
  CHECK(res.state.best_loss == res.state.history[size_t(res.state.best_iteration)].total);
  double floor = res.state.history.front().total;
  for (const LossBreakdown& b : res.state.history) floor = std::min(floor, b.total);
  CHECK(res.state.best_loss <= floor * (1.0 + 2e-4));

  CHECK(res.mesh.faces == base.faces);
  CHECK(res.mesh.vertices.size() == base.vertices.size());
}

TEST_CASE("deform is deterministic per seed") {
  const TriMesh base = make_grid(3, 3);
  TriMesh guide = base;
  similarity_transform(guide, Vec3::Zero(), 1.3, yaw_matrix(10.0));

  const DeformResult a = deform(base, guide, fast_config(20, 99));
  const DeformResult b = deform(base, guide, fast_config(20, 99));
  CHECK(max_vertex_gap(a.mesh, b.mesh) == 0.0);
  REQUIRE(a.state.history.size() == b.state.history.size());
  for (size_t i = 0; i < a.state.history.size(); ++i)
    CHECK(a.state.history[i].total == b.state.history[i].total);
  for (size_t f = 0; f < a.state.jacobians.size(); ++f)
    CHECK((a.state.jacobians[f] - b.state.jacobians[f]).cwiseAbs().maxCoeff() == 0.0);

  const DeformResult c = deform(base, guide, fast_config(20, 100));
  bool any_differ = false;
  for (size_t i = 0; i < a.state.history.size(); ++i)
    any_differ = any_differ || a.state.history[i].total != c.state.history[i].total;
  CHECK(any_differ);
}

TEST_CASE("checkpoint resume reproduces the uninterrupted trajectory") {
  const TriMesh base = make_grid(3, 3);
  TriMesh guide = base;
  similarity_transform(guide, Vec3::Zero(), 1.25, yaw_matrix(20.0));
  TempDir dir;

  // The lr schedule spans the configured run, so a mid-run snapshot must come
  // from the run it interrupts: checkpoint_every=13 fires exactly once in 24
  // iterations, leaving the iteration-13 state on disk.
  OptConfig straight = fast_config(24, 5);
  straight.loss_log_path = dir.file("straight.csv");
  straight.checkpoint_every = 13;
  straight.checkpoint_path = dir.file("mid.ckpt");
  const DeformResult whole = deform(base, guide, straight);

  const OptState mid = load_checkpoint(dir.file("mid.ckpt"));
  CHECK(mid.iteration == 13);
  REQUIRE(mid.history.size() == 13);

  // A crashed run leaves the log's pre-interruption prefix behind; the resumed
  // run must append the remainder, reassembling the identical file.
  const std::string full_log = slurp(dir.file("straight.csv"));
  size_t prefix_end = 0;
  for (int line = 0; line < 14; ++line)  // header + iterations 0..12
    prefix_end = full_log.find('\n', prefix_end) + 1;
  {
    std::ofstream prefix(dir.file("resumed.csv"), std::ios::binary);
    prefix << full_log.substr(0, prefix_end);
  }

  OptConfig rest = fast_config(24, 5);
  rest.loss_log_path = dir.file("resumed.csv");
  const DeformResult resumed = deform(base, guide, rest, nullptr, &mid);

  REQUIRE(resumed.state.history.size() == whole.state.history.size());
  for (size_t i = 0; i < whole.state.history.size(); ++i)
    CHECK(resumed.state.history[i].total == whole.state.history[i].total);
  CHECK(resumed.state.best_loss == whole.state.best_loss);
  CHECK(resumed.state.best_iteration == whole.state.best_iteration);
  for (size_t f = 0; f < whole.state.jacobians.size(); ++f) {
    CHECK((resumed.state.jacobians[f] - whole.state.jacobians[f]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((resumed.state.m[f] - whole.state.m[f]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((resumed.state.v[f] - whole.state.v[f]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(max_vertex_gap(resumed.mesh, whole.mesh) == 0.0);

  CHECK(slurp(dir.file("resumed.csv")) == full_log);
}

TEST_CASE("checkpoint with the wrong face count is rejected") {
  const TriMesh base = make_grid(3, 3);
  TriMesh guide = base;
  similarity_transform(guide, Vec3::Zero(), 1.2, Mat3::Identity());
  OptState wrong;
  wrong.iteration = 1;
  wrong.jacobians = random_field(3, 8);  // base has 8 faces, not 3
  wrong.m = random_field(3, 9);
  wrong.v = random_field(3, 10);
  CHECK_THROWS_AS(deform(base, guide, fast_config(2), nullptr, &wrong), Error);
}

TEST_CASE("early stopping halts a flat run after the patience window") {
  const TriMesh base = make_grid(3, 3);
  OptConfig cfg = fast_config(50);
  cfg.weights = LossWeights{0.0, 0.0, 0.0, 0.0, 0.0};  // total is identically zero
  cfg.early_stop_patience = 1;
  const DeformResult res = deform(base, base, cfg);
  CHECK(res.state.history.size() == 2);  // iteration 0 sets the best; 1 trips patience
  CHECK(res.state.best_iteration == 0);

  cfg.early_stop_patience = 0;  // disabled: runs to the horizon
  const DeformResult full = deform(base, base, cfg);
  CHECK(full.state.history.size() == 50);
}

TEST_CASE("loss log is a parseable csv in sync with the history") {
  const TriMesh base = make_grid(3, 3);
  TriMesh guide = base;
  similarity_transform(guide, Vec3::Zero(), 1.5, Mat3::Identity());
  TempDir dir;
  OptConfig cfg = fast_config(8);
  cfg.loss_log_path = dir.file("loss.csv");
  const DeformResult res = deform(base, guide, cfg);

  std::ifstream in(cfg.loss_log_path);
  REQUIRE(bool(in));
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "iteration,cd,lap,triag,render2d,embed,total");
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 7);
    CHECK(std::stoi(cells[0]) == rows);
    CHECK(std::stod(cells[6]) == res.state.history[size_t(rows)].total);  // %.17g round-trips
    ++rows;
  }
  CHECK(rows == 8);
}
