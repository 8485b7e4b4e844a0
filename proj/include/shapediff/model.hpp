#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "shapediff/nets.hpp"
#include "shapediff/schedule.hpp"

namespace shapediff {

struct ModelConfig {
  std::size_t num_classes = 3;
  bool complement = true;        // adds one "not class c" label per class
  std::size_t latent_dim = 32;
  std::size_t encoder_hidden = 64;  // 0: no encoder, inputs are vectors already
  std::size_t denoiser_hidden = 128;
  std::size_t embed_dim = 16;
  std::size_t time_dim = 16;
  int steps = kDefaultSteps;
  double beta_min = kDefaultBetaMin;
  double beta_max = kDefaultBetaMax;

  std::size_t num_labels() const { return complement ? 2 * num_classes : num_classes; }
};

// Everything a checkpoint holds. Labels 0..num_classes-1 are the classes;
// with complement enabled, label num_classes + c means "not class c".
struct ModelParameters {
  std::optional<EncoderParams> encoder;
  DenoiserParams denoiser;
  std::size_t num_classes = 0;
  bool complement = false;
  double beta_min = kDefaultBetaMin;
  double beta_max = kDefaultBetaMax;
  std::uint64_t init_seed = 0;
  std::uint64_t step = 0;  // optimizer steps taken so far

  int steps() const { return denoiser.steps; }
  NoiseSchedule schedule() const { return NoiseSchedule(denoiser.steps, beta_min, beta_max); }
  int complement_label(int c) const;
  ModelConfig config() const;

  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

ModelParameters make_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace shapediff
