#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "garment/bodyfit.hpp"
#include "garment/embed.hpp"
#include "garment/errors.hpp"
#include "garment/optimizer.hpp"
#include "garment/texture.hpp"

namespace garment {

// Bad or inconsistent configuration, caught before (or instead of) running a
// stage. The CLI maps this to its validation exit code.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ProviderConfig {
  std::string kind = "stub";  // "stub" | "remote"
  std::string endpoint;
  double timeout_seconds = 10.0;
  int retries = 3;
  std::string cache_dir;  // remote response cache, empty = memory only
};

struct TextureStageOptions {
  int atlas_size = 1024;
  double depth_tol_factor = 0.01;
  double min_facing_cos = 0.2;
};

struct PipelineConfig {
  std::string base_mesh;
  std::string guide_mesh;
  std::string guidance_image;
  std::string body_file;   // optional; empty skips the fit stage
  std::string views_dir;   // optional; empty skips the texture stage
  std::string output_dir = "out";

  std::uint64_t seed = 0;
  bool yaw_search = true;
  OptConfig optimization;  // seed / log / checkpoint paths are filled per run
  TextureStageOptions texture;
  FitConfig fit;
  int eval_views = 36;
  int eval_resolution = 512;
  ProviderConfig provider;

  // Checks that referenced input files exist and numbers are sane.
  void validate() const;
};

// Reads the JSON config (schema in docs/pipeline_config.md). The
// GARMENT_EMBED_ENDPOINT environment variable, when set, overrides
// provider.endpoint.
PipelineConfig load_pipeline_config(const std::string& path);

struct StageRecord {
  std::string name;
  std::map<std::string, std::string> inputs;   // label -> sha256
  std::map<std::string, std::string> outputs;  // filename -> sha256
  double wall_time_s = 0.0;  // informational, never compared
  bool skipped = false;
  std::string error;  // set on the failing stage, then the run halts
};

struct Manifest {
  std::string config_fingerprint;
  std::vector<StageRecord> stages;
};

std::string manifest_to_json(const Manifest& manifest);
Manifest load_manifest(const std::string& path);

// Instantiates the configured embedding provider.
std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

// Runs align -> deform -> evaluate -> texture -> fit with file-based stage
// boundaries under config.output_dir. A stage is skipped when the previous
// manifest recorded the same input hashes and its outputs still match on
// disk. `only_stage` (one of the names above) forces exactly that stage to
// run, taking its inputs from the files earlier stages left behind. The
// manifest is written to <output_dir>/manifest.json even when a stage fails;
// the failing stage's record carries the error text and the exception is
// rethrown.
Manifest run_pipeline(const PipelineConfig& config, const std::string& only_stage = "");

// Loads a posed-view list from <views_dir>/cameras.json (schema in
// docs/pipeline_config.md) plus the images it references.
std::vector<ViewImage> load_view_images(const std::string& views_dir);

// Writes a self-contained demo: base/guide meshes, test body, guidance image,
// posed views of the guide, and a pipeline config wired to them.
void write_demo_fixtures(const std::string& dir);

}  // namespace garment
