#include "garment/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>

#include "garment/camera.hpp"
#include "garment/hash.hpp"
#include "garment/image.hpp"
#include "garment/metrics.hpp"
#include "garment/render.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace garment {

namespace {

const char* kStageNames[5] = {"align", "deform", "evaluate", "texture", "fit"};

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* key : allowed) ok = ok || item.key() == key;
    if (!ok) throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
  }
}

Vec3 vec3_from(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.size() != 3)
    throw ConfigError(where + " must be an array of 3 numbers");
  return Vec3(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
}

json weights_to_json(const LossWeights& w) {
  return {{"chamfer", w.cd},
          {"laplacian", w.lap},
          {"triangle_quality", w.triag},
          {"render", w.render2d},
          {"embedding", w.embed}};
}

LossWeights weights_from_json(const json& obj) {
  check_keys(obj, {"chamfer", "laplacian", "triangle_quality", "render", "embedding"},
             "optimization.weights");
  LossWeights w;
  w.cd = obj.value("chamfer", w.cd);
  w.lap = obj.value("laplacian", w.lap);
  w.triag = obj.value("triangle_quality", w.triag);
  w.render2d = obj.value("render", w.render2d);
  w.embed = obj.value("embedding", w.embed);
  return w;
}

json stage_fingerprint_json(const PipelineConfig& c, const std::string& stage) {
  if (stage == "align") return {{"seed", c.seed}, {"yaw_search", c.yaw_search}};
  if (stage == "deform") {
    const OptConfig& o = c.optimization;
    return {{"seed", c.seed},
            {"optimization",
             {{"iterations", o.iterations},
              {"learning_rate", o.learning_rate},
              {"lr_final", o.lr_final},
              {"beta1", o.beta1},
              {"beta2", o.beta2},
              {"cameras_per_iter", o.cameras_per_iter},
              {"surface_samples", o.surface_samples},
              {"checkpoint_every", o.checkpoint_every},
              {"early_stop_patience", o.early_stop_patience},
              {"render_resolution", o.render_resolution},
              {"softness", o.softness},
              {"vertical_fov", o.vertical_fov},
              {"weights", weights_to_json(o.weights)}}},
            {"provider", {{"kind", c.provider.kind}, {"endpoint", c.provider.endpoint}}}};
  }
  if (stage == "evaluate")
    return {{"views", c.eval_views},
            {"resolution", c.eval_resolution},
            {"provider", {{"kind", c.provider.kind}, {"endpoint", c.provider.endpoint}}}};
  if (stage == "texture")
    return {{"atlas_size", c.texture.atlas_size},
            {"depth_tol_factor", c.texture.depth_tol_factor},
            {"min_facing_cos", c.texture.min_facing_cos}};
  if (stage == "fit")
    return {{"seed", c.seed},
            {"rigid", {{"iterations", c.fit.rigid.iterations},
                       {"learning_rate", c.fit.rigid.learning_rate}}},
            {"articulated", {{"iterations", c.fit.articulated.iterations},
                             {"learning_rate", c.fit.articulated.learning_rate}}},
            {"collision", {{"iterations", c.fit.collision.iterations},
                           {"learning_rate", c.fit.collision.learning_rate}}},
            {"garment_samples", c.fit.garment_samples},
            {"collision_margin", c.fit.collision_margin},
            {"collision_weight", c.fit.collision_weight}};
  throw Error("unknown stage name: " + stage);
}

std::string stage_fingerprint(const PipelineConfig& c, const std::string& stage) {
  return sha256_hex(stage_fingerprint_json(c, stage).dump());
}

std::string file_hash(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw ConfigError(what + " does not exist: " + path);
  return sha256_file_hex(path);
}

bool outputs_intact(const StageRecord& rec, const fs::path& outdir) {
  if (rec.outputs.empty()) return false;
  for (const auto& [name, hash] : rec.outputs) {
    const fs::path p = outdir / name;
    if (!fs::exists(p) || sha256_file_hex(p.string()) != hash) return false;
  }
  return true;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::trunc | std::ios::binary);
  if (!file) throw IoError("cannot open file for writing: " + path.string());
  file << text;
  if (!file) throw IoError("failed writing file: " + path.string());
}

struct StageTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

}  // namespace

void PipelineConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (base_mesh.empty() || !fs::exists(base_mesh))
    throw ConfigError("base_mesh does not exist: " + base_mesh);
  if (guide_mesh.empty() || !fs::exists(guide_mesh))
    throw ConfigError("guide_mesh does not exist: " + guide_mesh);
  if (guidance_image.empty() || !fs::exists(guidance_image))
    throw ConfigError("guidance_image does not exist: " + guidance_image);
  if (!body_file.empty() && !fs::exists(body_file))
    throw ConfigError("body_file does not exist: " + body_file);
  if (!views_dir.empty() && !fs::is_directory(views_dir))
    throw ConfigError("views_dir is not a directory: " + views_dir);
  if (eval_views < 1) throw ConfigError("evaluate.views must be >= 1");
  if (eval_resolution < 16) throw ConfigError("evaluate.resolution must be >= 16");
  if (texture.atlas_size < 1) throw ConfigError("texture.atlas_size must be >= 1");
  if (texture.depth_tol_factor <= 0.0) throw ConfigError("texture.depth_tol_factor must be > 0");
  if (provider.kind != "stub" && provider.kind != "remote")
    throw ConfigError("provider.kind must be \"stub\" or \"remote\"");
  if (provider.kind == "remote" && provider.endpoint.empty())
    throw ConfigError("remote provider needs an endpoint");
  if (provider.timeout_seconds <= 0.0) throw ConfigError("provider.timeout_seconds must be > 0");
  if (provider.retries < 1) throw ConfigError("provider.retries must be >= 1");
  try {
    optimization.validate();
    fit.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(file);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  PipelineConfig c;
  try {
    check_keys(j,
               {"base_mesh", "guide_mesh", "guidance_image", "body_file", "views_dir",
                "output_dir", "seed", "align", "optimization", "texture", "fit", "evaluate",
                "provider"},
               "config");
    c.base_mesh = j.value("base_mesh", "");
    c.guide_mesh = j.value("guide_mesh", "");
    c.guidance_image = j.value("guidance_image", "");
    c.body_file = j.value("body_file", "");
    c.views_dir = j.value("views_dir", "");
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", std::uint64_t(0));

    if (j.contains("align")) {
      check_keys(j["align"], {"yaw_search"}, "align");
      c.yaw_search = j["align"].value("yaw_search", true);
    }
    if (j.contains("optimization")) {
      const json& o = j["optimization"];
      check_keys(o,
                 {"iterations", "learning_rate", "lr_final", "beta1", "beta2",
                  "cameras_per_iter", "surface_samples", "checkpoint_every",
                  "early_stop_patience", "render_resolution", "softness", "vertical_fov",
                  "weights"},
                 "optimization");
      OptConfig& oc = c.optimization;
      oc.iterations = o.value("iterations", oc.iterations);
      oc.learning_rate = o.value("learning_rate", oc.learning_rate);
      oc.lr_final = o.value("lr_final", oc.lr_final);
      oc.beta1 = o.value("beta1", oc.beta1);
      oc.beta2 = o.value("beta2", oc.beta2);
      oc.cameras_per_iter = o.value("cameras_per_iter", oc.cameras_per_iter);
      oc.surface_samples = o.value("surface_samples", oc.surface_samples);
      oc.checkpoint_every = o.value("checkpoint_every", oc.checkpoint_every);
      oc.early_stop_patience = o.value("early_stop_patience", oc.early_stop_patience);
      oc.render_resolution = o.value("render_resolution", oc.render_resolution);
      oc.softness = o.value("softness", oc.softness);
      oc.vertical_fov = o.value("vertical_fov", oc.vertical_fov);
      if (o.contains("weights")) oc.weights = weights_from_json(o["weights"]);
    }
    if (j.contains("texture")) {
      const json& t = j["texture"];
      check_keys(t, {"atlas_size", "depth_tol_factor", "min_facing_cos"}, "texture");
      c.texture.atlas_size = t.value("atlas_size", c.texture.atlas_size);
      c.texture.depth_tol_factor = t.value("depth_tol_factor", c.texture.depth_tol_factor);
      c.texture.min_facing_cos = t.value("min_facing_cos", c.texture.min_facing_cos);
    }
    if (j.contains("fit")) {
      const json& f = j["fit"];
      check_keys(f,
                 {"rigid_iterations", "rigid_learning_rate", "articulated_iterations",
                  "articulated_learning_rate", "collision_iterations",
                  "collision_learning_rate", "garment_samples", "collision_margin",
                  "collision_weight"},
                 "fit");
      c.fit.rigid.iterations = f.value("rigid_iterations", c.fit.rigid.iterations);
      c.fit.rigid.learning_rate = f.value("rigid_learning_rate", c.fit.rigid.learning_rate);
      c.fit.articulated.iterations =
          f.value("articulated_iterations", c.fit.articulated.iterations);
      c.fit.articulated.learning_rate =
          f.value("articulated_learning_rate", c.fit.articulated.learning_rate);
      c.fit.collision.iterations = f.value("collision_iterations", c.fit.collision.iterations);
      c.fit.collision.learning_rate =
          f.value("collision_learning_rate", c.fit.collision.learning_rate);
      c.fit.garment_samples = f.value("garment_samples", c.fit.garment_samples);
      c.fit.collision_margin = f.value("collision_margin", c.fit.collision_margin);
      c.fit.collision_weight = f.value("collision_weight", c.fit.collision_weight);
    }
    if (j.contains("evaluate")) {
      const json& e = j["evaluate"];
      check_keys(e, {"views", "resolution"}, "evaluate");
      c.eval_views = e.value("views", c.eval_views);
      c.eval_resolution = e.value("resolution", c.eval_resolution);
    }
    if (j.contains("provider")) {
      const json& p = j["provider"];
      check_keys(p, {"kind", "endpoint", "timeout_seconds", "retries", "cache_dir"},
                 "provider");
      c.provider.kind = p.value("kind", c.provider.kind);
      c.provider.endpoint = p.value("endpoint", c.provider.endpoint);
      c.provider.timeout_seconds = p.value("timeout_seconds", c.provider.timeout_seconds);
      c.provider.retries = p.value("retries", c.provider.retries);
      c.provider.cache_dir = p.value("cache_dir", c.provider.cache_dir);
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  // Paths in the config resolve relative to the config file's directory.
  const fs::path root = fs::path(path).parent_path();
  auto rebase = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (root / p).lexically_normal().string();
  };
  rebase(c.base_mesh);
  rebase(c.guide_mesh);
  rebase(c.guidance_image);
  rebase(c.body_file);
  rebase(c.views_dir);
  rebase(c.output_dir);

  if (const char* env = std::getenv("GARMENT_EMBED_ENDPOINT"); env && *env)
    c.provider.endpoint = env;
  return c;
}

std::string manifest_to_json(const Manifest& manifest) {
  json stages = json::array();
  for (const StageRecord& rec : manifest.stages) {
    json inputs = json::object(), outputs = json::object();
    for (const auto& [k, v] : rec.inputs) inputs[k] = v;
    for (const auto& [k, v] : rec.outputs) outputs[k] = v;
    stages.push_back({{"name", rec.name},
                      {"inputs", inputs},
                      {"outputs", outputs},
                      {"wall_time_s", rec.wall_time_s},
                      {"skipped", rec.skipped},
                      {"error", rec.error}});
  }
  return json{{"config_fingerprint", manifest.config_fingerprint}, {"stages", stages}}.dump(2);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open manifest: " + path);
  Manifest m;
  try {
    const json j = json::parse(file);
    m.config_fingerprint = j.value("config_fingerprint", "");
    // value() returns by value; keep each copy alive past the loop header.
    const json stages = j.value("stages", json::array());
    for (const json& s : stages) {
      StageRecord rec;
      rec.name = s.value("name", "");
      const json inputs = s.value("inputs", json::object());
      for (const auto& item : inputs.items())
        rec.inputs[item.key()] = item.value().get<std::string>();
      const json outputs = s.value("outputs", json::object());
      for (const auto& item : outputs.items())
        rec.outputs[item.key()] = item.value().get<std::string>();
      rec.wall_time_s = s.value("wall_time_s", 0.0);
      rec.skipped = s.value("skipped", false);
      rec.error = s.value("error", "");
      m.stages.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return m;
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  if (config.kind == "stub") return std::make_unique<StubProvider>();
  if (config.kind == "remote")
    return std::make_unique<RemoteProvider>(config.endpoint, config.timeout_seconds,
                                            config.retries, config.cache_dir);
  throw ConfigError("provider.kind must be \"stub\" or \"remote\"");
}

std::vector<ViewImage> load_view_images(const std::string& views_dir) {
  const fs::path dir(views_dir);
  const fs::path list = dir / "cameras.json";
  std::ifstream file(list);
  if (!file) throw IoError("cannot open view list: " + list.string());
  json j;
  try {
    j = json::parse(file);
  } catch (const json::exception& e) {
    throw ParseError(list.string() + ": " + e.what());
  }

  std::vector<ViewImage> views;
  try {
    check_keys(j, {"views"}, "cameras.json");
    for (const json& v : j.at("views")) {
      check_keys(v, {"image", "tag", "camera"}, "view entry");
      ViewImage view;
      view.tag = v.value("tag", "");
      const std::string image = v.at("image").get<std::string>();
      view.rgb = load_png((dir / image).string());

      const json& cam = v.at("camera");
      check_keys(cam,
                 {"position", "look_at", "up", "vertical_fov", "width", "height",
                  "near_plane", "far_plane"},
                 "camera");
      view.camera.position = vec3_from(cam.at("position"), "camera.position");
      view.camera.look_at = vec3_from(cam.at("look_at"), "camera.look_at");
      if (cam.contains("up")) view.camera.up = vec3_from(cam["up"], "camera.up");
      view.camera.vertical_fov = cam.value("vertical_fov", 75.0);
      view.camera.width = cam.value("width", 512);
      view.camera.height = cam.value("height", 512);
      view.camera.near_plane = cam.value("near_plane", view.camera.near_plane);
      view.camera.far_plane = cam.value("far_plane", view.camera.far_plane);
      view.camera.validate();
      views.push_back(std::move(view));
    }
  } catch (const json::exception& e) {
    throw ParseError(list.string() + ": " + e.what());
  }
  if (views.empty()) throw ParseError(list.string() + ": no views listed");
  return views;
}

Manifest run_pipeline(const PipelineConfig& config, const std::string& only_stage) {
  config.validate();
  if (!only_stage.empty()) {
    bool known = false;
    for (const char* name : kStageNames) known = known || only_stage == name;
    if (!known) throw ConfigError("unknown stage \"" + only_stage + "\"");
  }

  const fs::path outdir(config.output_dir);
  fs::create_directories(outdir);
  const fs::path manifest_path = outdir / "manifest.json";

  Manifest previous;
  if (fs::exists(manifest_path)) {
    try {
      previous = load_manifest(manifest_path.string());
    } catch (const Error&) {
      previous = {};  // unreadable manifest: recompute everything
    }
  }
  auto previous_record = [&](const std::string& name) -> const StageRecord* {
    for (const StageRecord& rec : previous.stages)
      if (rec.name == name) return &rec;
    return nullptr;
  };

  Manifest manifest;
  {
    json all = json::object();
    for (const char* name : kStageNames) all[name] = stage_fingerprint_json(config, name);
    manifest.config_fingerprint = sha256_hex(all.dump());
  }

  const std::string base_norm = (outdir / "base_normalized.obj").string();
  const std::string guide_aligned_path = (outdir / "guide_aligned.obj").string();
  const std::string deformed_path = (outdir / "deformed.obj").string();

  // Stage bodies fill rec.outputs with filenames (relative to outdir); hashes
  // are computed afterwards.
  auto run_align = [&](StageRecord& rec) {
    TriMesh base = load_obj(config.base_mesh);
    base.validate();
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();
    const TriMesh base_n = normalize_to_unit(base, &scale, &translation);
    TriMesh guide = load_obj(config.guide_mesh);
    guide.validate();
    const TriMesh guide_a = align_guide(base_n, guide, config.yaw_search);
    save_obj(base_n, base_norm);
    save_obj(guide_a, guide_aligned_path);
    const json info = {{"base_scale", scale},
                       {"base_translation", {translation.x(), translation.y(), translation.z()}},
                       {"yaw_search", config.yaw_search}};
    write_text_file(outdir / "align.json", info.dump(2) + "\n");
    rec.outputs = {{"base_normalized.obj", ""}, {"guide_aligned.obj", ""}, {"align.json", ""}};
  };

  auto run_deform = [&](StageRecord& rec) {
    const TriMesh base = load_obj(base_norm);
    const TriMesh guide = load_obj(guide_aligned_path);
    OptConfig oc = config.optimization;
    oc.seed = config.seed;
    oc.loss_log_path = (outdir / "loss_log.csv").string();
    if (oc.checkpoint_every > 0) oc.checkpoint_path = (outdir / "checkpoint.bin").string();
    std::unique_ptr<EmbeddingProvider> provider;
    if (oc.weights.embed > 0.0) provider = make_provider(config.provider);
    const DeformResult result = deform(base, guide, oc, provider.get());
    save_obj(result.mesh, deformed_path);
    rec.outputs = {{"deformed.obj", ""}, {"loss_log.csv", ""}};
  };

  auto run_evaluate = [&](StageRecord& rec) {
    const TriMesh deformed = load_obj(deformed_path);
    const TriMesh guide = load_obj(guide_aligned_path);
    const Image guidance = load_png(config.guidance_image);
    const auto provider = make_provider(config.provider);
    const EvalReport report = evaluate(deformed, guide, guidance, *provider,
                                       config.eval_resolution, config.eval_views);
    save_report(report, (outdir / "eval_report.json").string());
    rec.outputs = {{"eval_report.json", ""}};
  };

  auto run_texture = [&](StageRecord& rec) {
    const TriMesh deformed = load_obj(deformed_path);
    if (!deformed.has_uvs())
      throw TopologyError("texture stage needs a base mesh with UVs");
    const std::vector<ViewImage> views = load_view_images(config.views_dir);
    BackprojectOptions options;
    options.atlas_size = config.texture.atlas_size;
    options.depth_tol_factor = config.texture.depth_tol_factor;
    options.min_facing_cos = config.texture.min_facing_cos;
    const TextureResult result = backproject_texture(deformed, views, options);
    save_png(result.texture, (outdir / "texture.png").string());
    save_textured_obj(deformed, (outdir / "textured.obj").string(), "texture.png");
    const json info = {{"coverage", result.coverage},
                       {"view_order", result.view_order},
                       {"overlap_texels", result.overlap_texels}};
    write_text_file(outdir / "texture_coverage.json", info.dump(2) + "\n");
    rec.outputs = {{"texture.png", ""},
                   {"textured.obj", ""},
                   {"textured.mtl", ""},
                   {"texture_coverage.json", ""}};
  };

  auto run_fit = [&](StageRecord& rec) {
    const ParametricBody body = load_body(config.body_file);
    const TriMesh garment = load_obj(deformed_path);
    FitConfig fc = config.fit;
    fc.seed = config.seed;
    const FitResult result = fit_body_to_garment(body, garment, fc);
    json params;
    params["translation"] = {result.params.translation.x(), result.params.translation.y(),
                             result.params.translation.z()};
    params["rotation_axis_angle"] = {result.params.rotation.x(), result.params.rotation.y(),
                                     result.params.rotation.z()};
    params["scale"] = result.params.scale;
    auto shape = json::array();
    for (int s = 0; s < result.params.shape.size(); ++s) shape.push_back(result.params.shape[s]);
    params["shape"] = shape;
    auto pose = json::array();
    for (int k = 0; k < result.params.pose.rows(); ++k)
      pose.push_back({{"joint", body.joints[size_t(k)].name},
                      {"axis_angle",
                       {result.params.pose(k, 0), result.params.pose(k, 1),
                        result.params.pose(k, 2)}}});
    params["pose"] = pose;
    auto finals = json::array();
    for (const auto& history : result.stage_history)
      finals.push_back(history.empty() ? json() : json(history.back()));
    const json info = {{"params", params},
                       {"penetration_fraction", result.penetration},
                       {"stage_final_losses", finals}};
    write_text_file(outdir / "fit_params.json", info.dump(2) + "\n");
    save_obj(pose_body(body, result.params), (outdir / "body_fitted.obj").string());
    rec.outputs = {{"fit_params.json", ""}, {"body_fitted.obj", ""}};
  };

  // Input hash sets. Intermediates must exist by the time these run; in
  // --stage mode that is a hard requirement on the caller.
  auto align_inputs = [&] {
    return std::map<std::string, std::string>{
        {"config", stage_fingerprint(config, "align")},
        {"base_mesh", file_hash(config.base_mesh, "base_mesh")},
        {"guide_mesh", file_hash(config.guide_mesh, "guide_mesh")}};
  };
  auto deform_inputs = [&] {
    return std::map<std::string, std::string>{
        {"config", stage_fingerprint(config, "deform")},
        {"base_normalized.obj", file_hash(base_norm, "align output (run align first)")},
        {"guide_aligned.obj",
         file_hash(guide_aligned_path, "align output (run align first)")}};
  };
  auto evaluate_inputs = [&] {
    return std::map<std::string, std::string>{
        {"config", stage_fingerprint(config, "evaluate")},
        {"deformed.obj", file_hash(deformed_path, "deform output (run deform first)")},
        {"guide_aligned.obj",
         file_hash(guide_aligned_path, "align output (run align first)")},
        {"guidance_image", file_hash(config.guidance_image, "guidance_image")}};
  };
  auto texture_inputs = [&] {
    std::map<std::string, std::string> inputs{
        {"config", stage_fingerprint(config, "texture")},
        {"deformed.obj", file_hash(deformed_path, "deform output (run deform first)")}};
    const fs::path cams = fs::path(config.views_dir) / "cameras.json";
    inputs["cameras.json"] = file_hash(cams.string(), "view list");
    std::ifstream file(cams);
    json j;
    try {
      j = json::parse(file);
      const json view_list = j.value("views", json::array());
      for (const json& v : view_list) {
        const std::string image = v.value("image", "");
        if (!image.empty())
          inputs["view:" + image] =
              file_hash((fs::path(config.views_dir) / image).string(), "view image");
      }
    } catch (const json::exception&) {
      // Malformed list: hash of cameras.json alone still gates the stage; the
      // stage body will fail with a precise parse error.
    }
    return inputs;
  };
  auto fit_inputs = [&] {
    return std::map<std::string, std::string>{
        {"config", stage_fingerprint(config, "fit")},
        {"deformed.obj", file_hash(deformed_path, "deform output (run deform first)")},
        {"body_file", file_hash(config.body_file, "body_file")}};
  };

  struct Stage {
    std::string name;
    bool configured;
    std::function<std::map<std::string, std::string>()> inputs;
    std::function<void(StageRecord&)> body;
  };
  const Stage stages[5] = {
      {"align", true, align_inputs, run_align},
      {"deform", true, deform_inputs, run_deform},
      {"evaluate", true, evaluate_inputs, run_evaluate},
      {"texture", !config.views_dir.empty(), texture_inputs, run_texture},
      {"fit", !config.body_file.empty(), fit_inputs, run_fit},
  };

  auto finish = [&] { write_text_file(manifest_path, manifest_to_json(manifest) + "\n"); };

  for (const Stage& stage : stages) {
    if (!only_stage.empty() && stage.name != only_stage) {
      if (const StageRecord* prev = previous_record(stage.name))
        manifest.stages.push_back(*prev);
      continue;
    }
    StageRecord rec;
    rec.name = stage.name;
    if (!stage.configured) {
      if (!only_stage.empty())
        throw ConfigError("stage \"" + stage.name + "\" is not configured");
      rec.skipped = true;
      rec.inputs["configured"] = "false";
      manifest.stages.push_back(rec);
      continue;
    }
    try {
      rec.inputs = stage.inputs();
      const StageRecord* prev = previous_record(stage.name);
      const bool can_skip = only_stage.empty() && prev && prev->error.empty() &&
                            !prev->inputs.empty() && prev->inputs == rec.inputs &&
                            outputs_intact(*prev, outdir);
      if (can_skip) {
        rec.outputs = prev->outputs;
        rec.skipped = true;
        manifest.stages.push_back(rec);
        continue;
      }
      StageTimer timer;
      stage.body(rec);
      rec.wall_time_s = timer.seconds();
      for (auto& [name, hash] : rec.outputs)
        hash = sha256_file_hex((outdir / name).string());
      manifest.stages.push_back(rec);
    } catch (const std::exception& e) {
      rec.error = e.what();
      manifest.stages.push_back(rec);
      finish();
      throw;
    }
  }
  finish();
  return manifest;
}

namespace {

// Open tube with a cylindrical UV unwrap; the demo garment. The UV seam
// duplicates chart vertices, the 3D ring is closed.
TriMesh make_demo_tube(int radial, int rows, double radius, double y0, double y1,
                       const std::function<double(double)>& radius_at) {
  TriMesh mesh;
  mesh.name = "tube";
  for (int row = 0; row <= rows; ++row) {
    const double y = y0 + (y1 - y0) * double(row) / rows;
    const double r = radius * radius_at(y);
    for (int k = 0; k < radial; ++k) {
      const double theta = 2.0 * std::numbers::pi * double(k) / radial;
      mesh.vertices.emplace_back(r * std::sin(theta), y, r * std::cos(theta));
    }
    for (int k = 0; k <= radial; ++k)
      mesh.uvs.emplace_back(double(k) / radial, double(row) / rows);
  }
  auto vid = [&](int row, int k) { return row * radial + (k % radial); };
  auto tid = [&](int row, int k) { return row * (radial + 1) + k; };
  for (int row = 0; row < rows; ++row) {
    for (int k = 0; k < radial; ++k) {
      mesh.faces.push_back({vid(row, k), vid(row, k + 1), vid(row + 1, k + 1)});
      mesh.uv_faces.push_back({tid(row, k), tid(row, k + 1), tid(row + 1, k + 1)});
      mesh.faces.push_back({vid(row, k), vid(row + 1, k + 1), vid(row + 1, k)});
      mesh.uv_faces.push_back({tid(row, k), tid(row + 1, k + 1), tid(row + 1, k)});
    }
  }
  return mesh;
}

}  // namespace

void write_demo_fixtures(const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "views");

  const TriMesh base =
      make_demo_tube(24, 12, 0.3, -0.4, 0.4, [](double) { return 1.0; });
  const TriMesh guide = make_demo_tube(24, 12, 0.3, -0.4, 0.4, [](double y) {
    return 1.0 + 0.25 * std::cos(std::numbers::pi * y / 0.8);
  });
  save_obj(base, (root / "base.obj").string());
  save_obj(guide, (root / "guide.obj").string());
  save_body(make_test_body(), (root / "body.gbdy").string());

  // Guidance image and posed views are renders of the guide; in production
  // these come from the generative stages upstream.
  std::vector<Camera> views = stratified_cameras(guide, 4, 512);
  const char* tags[4] = {"front", "right", "back", "left"};
  json view_list = json::array();
  for (int i = 0; i < 4; ++i) {
    const Image image = buffers_to_image(render(guide, views[size_t(i)], 0.0));
    const std::string name = std::string("view_") + tags[i] + ".png";
    save_png(image, (root / "views" / name).string());
    view_list.push_back(
        {{"image", name},
         {"tag", tags[i]},
         {"camera",
          {{"position",
            {views[size_t(i)].position.x(), views[size_t(i)].position.y(),
             views[size_t(i)].position.z()}},
           {"look_at",
            {views[size_t(i)].look_at.x(), views[size_t(i)].look_at.y(),
             views[size_t(i)].look_at.z()}},
           {"up", {0.0, 1.0, 0.0}},
           {"vertical_fov", views[size_t(i)].vertical_fov},
           {"width", views[size_t(i)].width},
           {"height", views[size_t(i)].height}}}});
    if (i == 0) save_png(image, (root / "guidance.png").string());
  }
  write_text_file(root / "views" / "cameras.json", json{{"views", view_list}}.dump(2) + "\n");

  const json config = {
      {"base_mesh", "base.obj"},
      {"guide_mesh", "guide.obj"},
      {"guidance_image", "guidance.png"},
      {"body_file", "body.gbdy"},
      {"views_dir", "views"},
      {"output_dir", "out"},
      {"seed", 0},
      {"optimization",
       {{"iterations", 400},
        {"cameras_per_iter", 2},
        {"surface_samples", 2000},
        {"render_resolution", 128},
        {"early_stop_patience", 150}}},
      {"evaluate", {{"views", 36}, {"resolution", 256}}},
      {"fit", {{"rigid_iterations", 150}, {"articulated_iterations", 200},
               {"collision_iterations", 100}}},
      {"provider", {{"kind", "stub"}}},
  };
  write_text_file(root / "config.json", config.dump(2) + "\n");
}

}  // namespace garment
