#pragma once

#include <string>
#include <vector>

#include "garment/embed.hpp"
#include "garment/image.hpp"
#include "garment/mesh.hpp"

namespace garment {

struct ViewMetric {
  int index = 0;
  double azimuth_deg = 0.0;
  double iou = 1.0;      // binary silhouette IoU vs the guide, this view
  double cos_sim = 0.0;  // embedding similarity of the render to the guidance image
};

struct EvalReport {
  double clip_sim = 0.0;         // mean of per-view cos_sim
  double silhouette_iou = 0.0;   // mean of per-view iou
  double chamfer_to_guide = 0.0; // mean squared sample-to-surface distance
  MeshQualityReport quality;
  std::vector<ViewMetric> views;
};

// Renders both meshes from an evenly spaced equatorial view ring, compares
// hard silhouettes, embeds each deformed-mesh render, and measures the
// sampled Chamfer distance onto the guide surface. When dump_dir is set the
// per-view renders are written there as PNGs.
EvalReport evaluate(const TriMesh& deformed, const TriMesh& guide, const Image& guidance,
                    EmbeddingProvider& provider, int resolution = 512, int view_count = 36,
                    const std::string& dump_dir = "");

std::string report_to_json(const EvalReport& report);
void save_report(const EvalReport& report, const std::string& path);

}  // namespace garment
