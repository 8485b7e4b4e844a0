#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shapediff/error.hpp"
#include "shapediff/model.hpp"

namespace shapediff {

// First-order adaptive-moment optimizer with bias correction and decoupled
// weight decay. Parameters are rounded to float32 after every update.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  explicit Adam(AdamConfig config);

  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);
  std::uint64_t iterations() const { return t_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t log_every = 50;
  bool joint_encoder = false;  // end-to-end through the encoder
  // Probability that an example is relabeled with a complement label
  // "not class k" for a k drawn uniformly among the other classes.
  double complement_fraction = 0.5;

  void validate() const;
};

struct LossRow {
  std::uint64_t step;  // 1-based, continues across resumes
  double loss;         // mean batch loss over the row's logging window
};

struct TrainTrace {
  std::vector<LossRow> rows;
  double first_loss = 0.0;
  double last_loss = 0.0;
};

// Trains on ready-made latent vectors (frozen encoder, or image vectors).
TrainTrace train_latents(ModelParameters& model, const TrainConfig& config,
                         std::span<const Latent> latents, std::span<const int> labels);

// Trains on point clouds. With a frozen encoder the latents are computed
// once; a fresh model (step == 0) first fits the latent standardization to
// the training set. With joint_encoder the encoder is trained end to end.
TrainTrace train(ModelParameters& model, const TrainConfig& config,
                 std::span<const PointCloud> clouds, std::span<const int> labels);

std::string loss_trace_csv(const TrainTrace& trace);

// Checkpoint layout (all integers and floats little-endian):
//   char[6]  magic "DC3DO\0"
//   u16      format version (kCheckpointVersion)
//   u32 x 8  latent_dim, encoder_hidden (0 = none), denoiser_hidden,
//            num_labels, num_classes, embed_dim, time_dim, steps
//   u8       complement flag
//   f64 x 2  beta_min, beta_max
//   u64 x 2  init_seed, optimizer step
//   u32      tensor count, then per tensor:
//            u16 name length, name bytes, u32 rows, u32 cols, rows*cols f32
// Tensor order: encoder l1..l3 weight/bias, shift, scale (if present), then
// denoiser embedding, l1..l3 weight/bias, gate weight/bias.
inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public RuntimeError {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kDimensionMismatch };

  CheckpointError(Kind kind, const std::string& what) : RuntimeError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

std::string serialize_checkpoint(const ModelParameters& model);
ModelParameters deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const ModelParameters& model, const std::filesystem::path& path);
ModelParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace shapediff
