#include "shapediff/model.hpp"

#include <string>

#include "shapediff/error.hpp"

namespace shapediff {

int ModelParameters::complement_label(int c) const {
  if (!complement) throw ValidationError("model has no complement labels");
  if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
    throw ValidationError("complement_label: unknown class " + std::to_string(c));
  }
  return static_cast<int>(num_classes) + c;
}

ModelConfig ModelParameters::config() const {
  ModelConfig c;
  c.num_classes = num_classes;
  c.complement = complement;
  c.latent_dim = denoiser.latent_dim();
  c.encoder_hidden = encoder ? encoder->hidden() : 0;
  c.denoiser_hidden = denoiser.hidden();
  c.embed_dim = denoiser.embed_dim();
  c.time_dim = denoiser.time_dim;
  c.steps = denoiser.steps;
  c.beta_min = beta_min;
  c.beta_max = beta_max;
  return c;
}

ModelParameters make_model(const ModelConfig& config, std::uint64_t seed) {
  if (config.num_classes == 0) throw ValidationError("model: num_classes must be >= 1");
  make_schedule(config.steps, config.beta_min, config.beta_max);  // validates
  ModelParameters m;
  if (config.encoder_hidden > 0) {
    m.encoder = make_encoder({config.encoder_hidden, config.latent_dim}, seed);
  }
  m.denoiser = make_denoiser({config.latent_dim, config.denoiser_hidden, config.num_labels(),
                              config.embed_dim, config.time_dim, config.steps},
                             seed);
  m.num_classes = config.num_classes;
  m.complement = config.complement;
  m.beta_min = config.beta_min;
  m.beta_max = config.beta_max;
  m.init_seed = seed;
  return m;
}

}  // namespace shapediff
