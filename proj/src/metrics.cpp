#include "garment/metrics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "garment/bvh.hpp"
#include "garment/camera.hpp"
#include "garment/errors.hpp"
#include "garment/losses.hpp"
#include "garment/render.hpp"
#include "garment/rng.hpp"
#include "json.hpp"

namespace garment {

namespace {

constexpr int kChamferSamples = 10000;
constexpr std::uint64_t kChamferSeed = 0xE7A1;

double binary_iou(const RenderBuffers& a, const RenderBuffers& b) {
  int inter = 0, uni = 0;
  for (size_t i = 0; i < a.silhouette.size(); ++i) {
    const bool pa = a.silhouette[i] > 0.5;
    const bool pb = b.silhouette[i] > 0.5;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : double(inter) / uni;
}

}  // namespace

EvalReport evaluate(const TriMesh& deformed, const TriMesh& guide, const Image& guidance,
                    EmbeddingProvider& provider, int resolution, int view_count,
                    const std::string& dump_dir) {
  deformed.validate();
  guide.validate();
  if (view_count < 1) throw Error("evaluation needs at least one view");
  if (guidance.width < 1 || guidance.height < 1)
    throw Error("evaluation needs a non-empty guidance image");
  if (!dump_dir.empty()) std::filesystem::create_directories(dump_dir);

  EvalReport report;
  report.quality = quality_report(deformed);

  // The view ring is anchored to the guide so both meshes are judged from the
  // same cameras regardless of how the deformation moved the garment.
  const std::vector<Camera> cameras = stratified_cameras(guide, view_count, resolution);
  const EmbeddingVector target = provider.embed(guidance);

  double iou_sum = 0.0, sim_sum = 0.0;
  for (int i = 0; i < view_count; ++i) {
    const RenderBuffers def_pass = render(deformed, cameras[size_t(i)], 0.0);
    const RenderBuffers guide_pass = render(guide, cameras[size_t(i)], 0.0);

    ViewMetric vm;
    vm.index = i;
    vm.azimuth_deg = 360.0 * double(i) / view_count;
    vm.iou = binary_iou(def_pass, guide_pass);
    const Image render_image = buffers_to_image(def_pass);
    vm.cos_sim = cosine_similarity(provider.embed(render_image), target);
    iou_sum += vm.iou;
    sim_sum += vm.cos_sim;
    report.views.push_back(vm);

    if (!dump_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "view_%03d.png", i);
      save_png(render_image, (std::filesystem::path(dump_dir) / name).string());
    }
  }
  report.silhouette_iou = iou_sum / view_count;
  report.clip_sim = sim_sum / view_count;

  const SurfaceSamples samples = sample_surface(deformed, kChamferSamples, kChamferSeed);
  const MeshBvh guide_bvh(guide);
  double chamfer = 0.0;
  for (int i = 0; i < int(samples.points.rows()); ++i) {
    const Vec3 p = samples.points.row(i).transpose();
    chamfer += guide_bvh.closest_point(p).dist2;
  }
  report.chamfer_to_guide = chamfer / double(samples.points.rows());
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["clip_sim"] = report.clip_sim;
  j["silhouette_iou"] = report.silhouette_iou;
  j["chamfer_to_guide"] = report.chamfer_to_guide;
  j["quality"] = {
      {"min_triangle_area", report.quality.min_triangle_area},
      {"min_interior_angle_deg", report.quality.min_interior_angle},
      {"max_aspect_ratio", report.quality.max_aspect_ratio},
      {"edge_length_mean", report.quality.edge_length_mean},
      {"edge_length_std", report.quality.edge_length_std},
      {"boundary_loop_count", report.quality.boundary_loop_count},
      {"self_intersection_count", report.quality.self_intersection_count},
      {"degenerate_face_count", report.quality.degenerate_face_count},
  };
  auto views = nlohmann::json::array();
  for (const ViewMetric& vm : report.views) {
    views.push_back({{"index", vm.index},
                     {"azimuth_deg", vm.azimuth_deg},
                     {"iou", vm.iou},
                     {"cos_sim", vm.cos_sim}});
  }
  j["views"] = views;
  return j.dump(2);
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot open report file for writing: " + path);
  file << report_to_json(report) << "\n";
  if (!file) throw IoError("failed writing report file: " + path);
}

}  // namespace garment
