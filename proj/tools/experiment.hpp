#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapediff/classify.hpp"
#include "shapediff/geom.hpp"
#include "shapediff/metrics.hpp"
#include "shapediff/model.hpp"
#include "shapediff/train.hpp"
#include "shapediff/views.hpp"

namespace shapediff::cli {

struct DatasetSection {
  std::vector<std::string> classes{"slab", "chair", "cross"};  // shape family names
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  std::size_t points = 2048;
  std::string dir;  // empty: <output_dir>/data
};

struct ModelSection {
  std::size_t latent_dim = 32;
  std::size_t encoder_hidden = 64;
  std::size_t denoiser_hidden = 128;
  std::size_t embed_dim = 16;
  std::size_t time_dim = 16;
  bool complement = true;
};

struct ScheduleSection {
  int steps = kDefaultSteps;
  double beta_min = kDefaultBetaMin;
  double beta_max = kDefaultBetaMax;
};

struct TrainSection {
  std::size_t steps = 3000;
  std::size_t batch_size = 64;
  AdamConfig adam;
  std::size_t log_every = 50;
  bool joint_encoder = false;
  double complement_fraction = 0.5;
};

struct ClassifySection {
  std::size_t n_trials = 64;
  std::vector<Stage> stages;            // empty: plain paired scoring
  std::vector<std::string> candidates;  // empty: every class
  std::string mode = "multiclass";      // or "binary" (class vs its complement)
  std::string sampling = "paired";      // or "independent"
};

// Multi-view pathway. Image models are trained with the knobs here, not with
// the train section.
struct ViewsSection {
  std::size_t n_views = 36;
  bool frontal_only = true;
  std::size_t image_size = 32;
  double elevation = kDefaultElevationDeg;
  double point_radius = 0.0;  // 0: default_point_radius(S)
  std::size_t n_trials = 16;
  std::size_t hidden = 128;
  std::size_t train_steps = 2000;
  std::size_t batch_size = 32;
  std::size_t train_per_class = 40;  // 0: whole train split
  std::size_t test_per_class = 20;   // 0: whole test split
  std::vector<std::size_t> sizes{16, 32, 64};
  std::vector<std::size_t> view_counts{1, 6};
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DatasetSection dataset;
  ModelSection model;
  ScheduleSection schedule;
  TrainSection train;
  ClassifySection classify;
  ViewsSection views;
  std::string output_dir = "run";

  // Throws ValidationError on any inconsistent value.
  void validate() const;
  std::filesystem::path dataset_dir() const;
};

// Strict parse: unknown keys and wrong types are ValidationErrors.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
// "section.key=value" on a raw config document. The value is read as JSON
// when it parses, as a plain string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);
// Reads the file (if any), applies overrides in order, parses and validates.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides);
// fnv1a64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

// Seeds derived from the top-level seed, one per component.
struct Seeds {
  std::uint64_t dataset, model_init, train, classify, mesh_sample;
};
Seeds seeds_of(const ExperimentConfig& c);
std::uint64_t object_seed(const ExperimentConfig& c, const std::string& split, int family, std::size_t index);
std::uint64_t image_model_seed(const ExperimentConfig& c, std::size_t image_size);
std::uint64_t image_train_seed(const ExperimentConfig& c, std::size_t image_size);

// ---------------------------------------------------------------------------

struct DatasetItem {
  std::string object_id;
  std::filesystem::path file;
  int label = 0;  // index into config classes
  PointCloud cloud;
};

std::vector<DatasetItem> load_split(const ExperimentConfig& c, const std::string& split);

// Label names: classes, then "not-<class>" for complement labels.
std::string label_name(const ExperimentConfig& c, int label);
std::vector<int> candidate_ids(const ExperimentConfig& c);

ModelConfig point_model_config(const ExperimentConfig& c);
ModelConfig image_model_config(const ExperimentConfig& c, std::size_t image_size);
// Throws ValidationError when a loaded model does not fit the experiment.
void check_model(const ExperimentConfig& c, const ModelParameters& m);
bool is_image_model(const ModelParameters& m);
std::size_t image_size_of(const ModelParameters& m);

std::vector<Camera> view_cameras(const ExperimentConfig& c);
std::vector<DepthImage> render_views(const ExperimentConfig& c, const PointCloud& pc, std::size_t image_size,
                                     std::size_t n_views);

// First `per_class` items of every class, all of them when per_class is 0.
std::vector<DatasetItem> first_per_class(const std::vector<DatasetItem>& items, std::size_t per_class);

// Trains an image model on rendered views of `items` using the views section.
// Continues from `resume` when given.
ModelParameters train_image_model(const ExperimentConfig& c, std::size_t image_size,
                                  const std::vector<DatasetItem>& items, TrainTrace* trace = nullptr,
                                  const ModelParameters* resume = nullptr);

// One classified object as emitted in JSON / JSONL.
struct ObjectResult {
  std::string object_id;
  std::optional<int> label;
  ClassificationResult result;
  std::optional<VoteRecord> votes;
  double seconds = 0.0;
};
nlohmann::json object_json(const ExperimentConfig& c, const ObjectResult& r);

// Classifies one object. Point models score the encoded latent; image models
// render `n_views` views (0: all configured cameras) and vote. With
// `positive`, the run is binary: candidates are {positive, not-positive}.
ObjectResult classify_object(const ExperimentConfig& c, const ModelParameters& model, const PointCloud& pc,
                             std::string object_id, std::optional<int> positive, std::size_t n_views = 0);

// Scores pre-computed latents against any model; used by eval and tests.
// Binary mode classifies each object against its own label's complement.
struct Evaluation {
  EvalReport report;
  std::vector<int> predictions;  // binary mode: the label if accepted, -1 otherwise
  std::vector<ObjectResult> objects;
};
Evaluation evaluate_latents(const ExperimentConfig& c, const EpsModel& model, const NoiseSchedule& sched,
                            std::span<const Latent> latents, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Subcommands. Each writes its outputs and a run manifest under output_dir
// and returns the manifest.

nlohmann::json cmd_gen_data(const ExperimentConfig& c);

struct TrainOptions {
  std::optional<std::filesystem::path> resume;
  std::size_t image_size = 0;  // > 0: train an image model of this size
};
nlohmann::json cmd_train(const ExperimentConfig& c, const TrainOptions& opt);

// With `positive` (a class name) every input is classified as that class or
// its complement; otherwise against the configured candidates.
nlohmann::json cmd_classify(const ExperimentConfig& c, const std::filesystem::path& checkpoint,
                            const std::vector<std::filesystem::path>& inputs,
                            const std::optional<std::string>& positive = std::nullopt);

nlohmann::json cmd_eval(const ExperimentConfig& c, const std::filesystem::path& checkpoint,
                        const std::string& split);

nlohmann::json cmd_render(const ExperimentConfig& c, const std::vector<std::filesystem::path>& inputs);

struct AblationRow {
  std::size_t size;
  std::size_t n_views;
  double accuracy;
  double wall_seconds;
};
std::string ablation_csv(const std::vector<AblationRow>& rows);
// Models for sizes without a matching checkpoint are trained and saved.
nlohmann::json cmd_ablate_views(const ExperimentConfig& c, const std::vector<std::filesystem::path>& checkpoints2d,
                                std::vector<AblationRow>* rows = nullptr);

}  // namespace shapediff::cli
