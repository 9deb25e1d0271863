// Command-line front end: pipeline orchestration plus standalone stage
// commands. Exit codes: 0 success, 2 bad input/config, 3 stage failure,
// 4 embedding-provider failure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "garment/bodyfit.hpp"
#include "garment/camera.hpp"
#include "garment/errors.hpp"
#include "garment/image.hpp"
#include "garment/metrics.hpp"
#include "garment/optimizer.hpp"
#include "garment/pipeline.hpp"
#include "garment/texture.hpp"
#include "json.hpp"

namespace {

struct ProviderFlags {
  std::string kind = "stub";
  std::string endpoint;
  double timeout = 10.0;
  int retries = 3;
  std::string cache_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--provider", kind, "Embedding provider: stub or remote")
        ->check(CLI::IsMember({"stub", "remote"}));
    cmd->add_option("--endpoint", endpoint, "Remote provider URL (host:port)");
    cmd->add_option("--provider-timeout", timeout, "Remote request timeout, seconds");
    cmd->add_option("--provider-retries", retries, "Remote request attempts");
    cmd->add_option("--provider-cache", cache_dir, "Remote response cache directory");
  }

  garment::ProviderConfig config() const {
    garment::ProviderConfig c;
    c.kind = kind;
    c.endpoint = endpoint;
    if (const char* env = std::getenv("GARMENT_EMBED_ENDPOINT"); env && *env && endpoint.empty())
      c.endpoint = env;
    c.timeout_seconds = timeout;
    c.retries = retries;
    c.cache_dir = cache_dir;
    return c;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"garment mesh deformation, texturing, and body-fit pipeline"};
  app.require_subcommand(1);

  // ---- pipeline ----
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run the staged pipeline from a config");
  std::string config_path, only_stage, pipeline_provider, pipeline_endpoint, output_dir;
  std::uint64_t pipeline_seed = 0;
  bool seed_given = false;
  pipeline_cmd->add_option("--config", config_path, "Pipeline config JSON")->required();
  pipeline_cmd->add_option("--stage", only_stage,
                           "Run exactly one stage: align|deform|evaluate|texture|fit");
  pipeline_cmd->add_option("--seed", pipeline_seed, "Override the config seed")
      ->each([&](const std::string&) { seed_given = true; });
  pipeline_cmd->add_option("--provider", pipeline_provider, "Override provider kind")
      ->check(CLI::IsMember({"stub", "remote"}));
  pipeline_cmd->add_option("--endpoint", pipeline_endpoint, "Override provider endpoint");
  pipeline_cmd->add_option("--output-dir", output_dir, "Override the output directory");
  pipeline_cmd->callback([&] {
    garment::PipelineConfig config = garment::load_pipeline_config(config_path);
    if (seed_given) config.seed = pipeline_seed;
    if (!pipeline_provider.empty()) config.provider.kind = pipeline_provider;
    if (!pipeline_endpoint.empty()) config.provider.endpoint = pipeline_endpoint;
    if (!output_dir.empty()) config.output_dir = output_dir;
    const garment::Manifest manifest = garment::run_pipeline(config, only_stage);
    for (const garment::StageRecord& rec : manifest.stages)
      std::cout << "[" << rec.name << "] "
                << (rec.skipped ? "skipped" : "done, " + std::to_string(rec.wall_time_s) + "s")
                << "\n";
    std::cout << "manifest: " << config.output_dir << "/manifest.json\n";
  });

  // ---- align ----
  auto* align_cmd = app.add_subcommand("align", "Normalize the base and align the guide to it");
  std::string align_base, align_guide_path, align_out_base, align_out_guide;
  bool no_yaw = false;
  align_cmd->add_option("--base", align_base, "Base garment OBJ")->required();
  align_cmd->add_option("--guide", align_guide_path, "Guide mesh OBJ")->required();
  align_cmd->add_option("--out-base", align_out_base, "Normalized base output")->required();
  align_cmd->add_option("--out-guide", align_out_guide, "Aligned guide output")->required();
  align_cmd->add_flag("--no-yaw-search", no_yaw, "Skip the 90-degree yaw search");
  align_cmd->callback([&] {
    garment::TriMesh base = garment::load_obj(align_base);
    base.validate();
    double scale = 1.0;
    garment::Vec3 translation = garment::Vec3::Zero();
    const garment::TriMesh base_n = garment::normalize_to_unit(base, &scale, &translation);
    garment::TriMesh guide = garment::load_obj(align_guide_path);
    guide.validate();
    garment::save_obj(base_n, align_out_base);
    garment::save_obj(garment::align_guide(base_n, guide, !no_yaw), align_out_guide);
    std::cout << "wrote " << align_out_base << " and " << align_out_guide << "\n";
  });

  // ---- deform ----
  auto* deform_cmd = app.add_subcommand("deform", "Optimize the base mesh toward a guide");
  std::string deform_base, deform_guide, deform_out, deform_log, deform_ckpt, deform_resume;
  garment::OptConfig opt;
  ProviderFlags deform_provider;
  deform_cmd->add_option("--base", deform_base, "Base garment OBJ")->required();
  deform_cmd->add_option("--guide", deform_guide, "Guide mesh OBJ (pre-aligned)")->required();
  deform_cmd->add_option("--out", deform_out, "Deformed mesh output OBJ")->required();
  deform_cmd->add_option("--iterations", opt.iterations, "Optimization iterations");
  deform_cmd->add_option("--seed", opt.seed, "Random seed");
  deform_cmd->add_option("--learning-rate", opt.learning_rate, "Adam learning rate");
  deform_cmd->add_option("--cameras", opt.cameras_per_iter, "Random views per iteration");
  deform_cmd->add_option("--samples", opt.surface_samples, "Surface samples per iteration");
  deform_cmd->add_option("--resolution", opt.render_resolution, "Render resolution");
  deform_cmd->add_option("--softness", opt.softness, "Silhouette softness, pixels");
  deform_cmd->add_option("--patience", opt.early_stop_patience,
                         "Early-stop patience, iterations (0 = off)");
  deform_cmd->add_option("--w-chamfer", opt.weights.cd, "Chamfer weight");
  deform_cmd->add_option("--w-laplacian", opt.weights.lap, "Laplacian weight");
  deform_cmd->add_option("--w-quality", opt.weights.triag, "Triangle-quality weight");
  deform_cmd->add_option("--w-render", opt.weights.render2d, "Render L1 weight");
  deform_cmd->add_option("--w-embed", opt.weights.embed, "Embedding weight");
  deform_cmd->add_option("--log", deform_log, "Per-iteration loss CSV");
  deform_cmd->add_option("--checkpoint", deform_ckpt, "Checkpoint file");
  deform_cmd->add_option("--checkpoint-every", opt.checkpoint_every,
                         "Iterations between checkpoints (0 = off)");
  deform_cmd->add_option("--resume", deform_resume, "Resume from a checkpoint file");
  deform_provider.attach(deform_cmd);
  deform_cmd->callback([&] {
    const garment::TriMesh base = garment::load_obj(deform_base);
    const garment::TriMesh guide = garment::load_obj(deform_guide);
    opt.loss_log_path = deform_log;
    opt.checkpoint_path = deform_ckpt;
    std::unique_ptr<garment::EmbeddingProvider> provider;
    if (opt.weights.embed > 0.0) provider = garment::make_provider(deform_provider.config());
    garment::OptState resume_state;
    const garment::OptState* resume = nullptr;
    if (!deform_resume.empty()) {
      resume_state = garment::load_checkpoint(deform_resume);
      resume = &resume_state;
    }
    const garment::DeformResult result =
        garment::deform(base, guide, opt, provider.get(), resume);
    garment::save_obj(result.mesh, deform_out);
    std::cout << "best loss " << result.state.best_loss << " at iteration "
              << result.state.best_iteration << "; wrote " << deform_out << "\n";
  });

  // ---- evaluate ----
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a deformed mesh against its guide");
  std::string eval_mesh, eval_guide, eval_image, eval_out, eval_dump;
  int eval_views = 36, eval_resolution = 512;
  ProviderFlags eval_provider;
  eval_cmd->add_option("--mesh", eval_mesh, "Deformed mesh OBJ")->required();
  eval_cmd->add_option("--guide", eval_guide, "Guide mesh OBJ")->required();
  eval_cmd->add_option("--image", eval_image, "Guidance image PNG")->required();
  eval_cmd->add_option("--out", eval_out, "Report JSON output")->required();
  eval_cmd->add_option("--views", eval_views, "View count");
  eval_cmd->add_option("--resolution", eval_resolution, "Render resolution");
  eval_cmd->add_option("--dump-views", eval_dump, "Directory for per-view renders");
  eval_provider.attach(eval_cmd);
  eval_cmd->callback([&] {
    const garment::TriMesh mesh = garment::load_obj(eval_mesh);
    const garment::TriMesh guide = garment::load_obj(eval_guide);
    const garment::Image guidance = garment::load_png(eval_image);
    const auto provider = garment::make_provider(eval_provider.config());
    const garment::EvalReport report = garment::evaluate(
        mesh, guide, guidance, *provider, eval_resolution, eval_views, eval_dump);
    garment::save_report(report, eval_out);
    std::cout << "clip_sim " << report.clip_sim << ", silhouette_iou "
              << report.silhouette_iou << ", chamfer " << report.chamfer_to_guide
              << "; wrote " << eval_out << "\n";
  });

  // ---- texture ----
  auto* texture_cmd = app.add_subcommand("texture", "Backproject posed views into a UV texture");
  std::string tex_mesh, tex_views, tex_out, tex_obj, tex_coverage;
  garment::BackprojectOptions tex_options;
  texture_cmd->add_option("--mesh", tex_mesh, "Mesh OBJ with UVs")->required();
  texture_cmd->add_option("--views", tex_views, "Directory with cameras.json + images")
      ->required();
  texture_cmd->add_option("--out-texture", tex_out, "Texture PNG output")->required();
  texture_cmd->add_option("--out-obj", tex_obj, "Textured OBJ output (with sibling MTL)");
  texture_cmd->add_option("--coverage-json", tex_coverage, "Coverage report JSON");
  texture_cmd->add_option("--size", tex_options.atlas_size, "Texture size, texels");
  texture_cmd->add_option("--depth-tolerance", tex_options.depth_tol_factor,
                          "Visibility depth tolerance, x bounding radius");
  texture_cmd->add_option("--min-facing", tex_options.min_facing_cos,
                          "Minimum facing cosine for a texel sample");
  texture_cmd->callback([&] {
    const garment::TriMesh mesh = garment::load_obj(tex_mesh);
    const auto views = garment::load_view_images(tex_views);
    const garment::TextureResult result =
        garment::backproject_texture(mesh, views, tex_options);
    garment::save_png(result.texture, tex_out);
    if (!tex_obj.empty()) {
      const std::string texture_name =
          std::filesystem::path(tex_out).filename().string();
      garment::save_textured_obj(mesh, tex_obj, texture_name);
    }
    if (!tex_coverage.empty()) {
      const nlohmann::json info = {{"coverage", result.coverage},
                                   {"view_order", result.view_order},
                                   {"overlap_texels", result.overlap_texels}};
      std::ofstream file(tex_coverage, std::ios::trunc);
      if (!file) throw garment::IoError("cannot open coverage file: " + tex_coverage);
      file << info.dump(2) << "\n";
    }
    std::cout << "coverage " << result.coverage << "; wrote " << tex_out << "\n";
  });

  // ---- fit ----
  auto* fit_cmd = app.add_subcommand("fit", "Fit a parametric body into a garment");
  std::string fit_body, fit_garment, fit_out_params, fit_out_body;
  garment::FitConfig fit_config;
  fit_cmd->add_option("--body", fit_body, "Body file (.gbdy)")->required();
  fit_cmd->add_option("--garment", fit_garment, "Garment mesh OBJ")->required();
  fit_cmd->add_option("--out-params", fit_out_params, "Fit parameter JSON output")->required();
  fit_cmd->add_option("--out-body", fit_out_body, "Fitted body OBJ output");
  fit_cmd->add_option("--seed", fit_config.seed, "Random seed");
  fit_cmd->add_option("--samples", fit_config.garment_samples, "Garment surface samples");
  fit_cmd->add_option("--margin", fit_config.collision_margin, "Collision margin, meters");
  fit_cmd->callback([&] {
    const garment::ParametricBody body = garment::load_body(fit_body);
    const garment::TriMesh garment_mesh = garment::load_obj(fit_garment);
    const garment::FitResult result =
        garment::fit_body_to_garment(body, garment_mesh, fit_config);
    garment::save_fit_params_json(body, result.params, fit_out_params);
    if (!fit_out_body.empty())
      garment::save_obj(garment::pose_body(body, result.params), fit_out_body);
    std::cout << "penetration fraction " << result.penetration << "; wrote "
              << fit_out_params << "\n";
  });

  // ---- body-template ----
  auto* body_cmd = app.add_subcommand("body-template", "Write the built-in parametric body");
  std::string body_out;
  int body_radial = 16, body_rows = 16;
  body_cmd->add_option("--out", body_out, "Body file output (.gbdy)")->required();
  body_cmd->add_option("--radial", body_radial, "Radial segments");
  body_cmd->add_option("--rows", body_rows, "Height segments");
  body_cmd->callback([&] {
    garment::save_body(garment::make_test_body(body_radial, body_rows), body_out);
    std::cout << "wrote " << body_out << "\n";
  });

  // ---- fixtures ----
  auto* fixtures_cmd = app.add_subcommand("fixtures", "Write a runnable demo input set");
  std::string fixtures_out;
  fixtures_cmd->add_option("--out", fixtures_out, "Directory for the demo files")->required();
  fixtures_cmd->callback([&] {
    garment::write_demo_fixtures(fixtures_out);
    std::cout << "wrote demo inputs under " << fixtures_out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const garment::ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return 4;
  } catch (const garment::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const garment::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const garment::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
