#include "shapediff/train.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "shapediff/error.hpp"
#include "shapediff/rng.hpp"

namespace shapediff {

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config.learning_rate >= 0.0)) throw ValidationError("adam: learning rate must be >= 0");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw ValidationError("adam: moment coefficients must lie in [0, 1)");
  }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) throw ValidationError("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ValidationError("adam: parameter set changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k]->data;
    const auto& g = grads[k]->data;
    if (p.size() != g.size()) throw ValidationError("adam: shape mismatch in " + params[k]->name);
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.epsilon);
      p[i] -= lr * (update + config_.weight_decay * p[i]);
    }
  }
  round_to_storage(params);
}

void TrainConfig::validate() const {
  if (steps < 1) throw ValidationError("train: steps must be >= 1");
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (log_every < 1) throw ValidationError("train: log_every must be >= 1");
  if (!(adam.learning_rate >= 0.0)) throw ValidationError("train: learning_rate must be >= 0");
  if (!(complement_fraction >= 0.0 && complement_fraction <= 1.0)) {
    throw ValidationError("train: complement_fraction must lie in [0, 1]");
  }
}

namespace {

void check_labels(const ModelParameters& model, std::span<const int> labels, std::size_t n_data) {
  if (labels.size() != n_data) throw ValidationError("train: data/label count mismatch");
  std::vector<std::size_t> counts(model.num_classes, 0);
  for (int c : labels) {
    if (c < 0 || static_cast<std::size_t>(c) >= model.num_classes) {
      throw ValidationError("train: label " + std::to_string(c) + " outside 0.." +
                            std::to_string(model.num_classes - 1));
    }
    ++counts[static_cast<std::size_t>(c)];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw ValidationError("train: class " + std::to_string(c) + " has zero samples");
  }
}

// Draws the conditioning label for one training example.
int draw_label(const ModelParameters& model, int true_label, double complement_fraction, Rng& rng) {
  if (!model.complement || model.num_classes < 2) return true_label;
  if (rng.uniform() >= complement_fraction) return true_label;
  auto other = static_cast<int>(rng.below(model.num_classes - 1));
  if (other >= true_label) ++other;
  return model.complement_label(other);
}

// Shared step loop. `step_fn(rng, indices, labels, ts, eps)` returns the
// batch loss and applies the update.
template <typename StepFn>
TrainTrace run_steps(ModelParameters& model, const TrainConfig& config, std::span<const int> labels,
                     StepFn&& step_fn) {
  TrainTrace trace;
  const auto sched = model.schedule();
  const std::size_t dim = model.denoiser.latent_dim();
  const std::uint64_t first = model.step + 1;
  Rng rng(derive_seed(config.seed, "train", model.step));
  std::vector<std::size_t> idx(config.batch_size);
  std::vector<int> lab(config.batch_size), ts(config.batch_size);
  std::vector<Latent> eps(config.batch_size, Latent(dim));
  double window = 0.0;
  std::size_t in_window = 0;
  for (std::size_t s = 0; s < config.steps; ++s) {
    const std::uint64_t step = first + s;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      idx[b] = static_cast<std::size_t>(rng.below(labels.size()));
      lab[b] = draw_label(model, labels[idx[b]], config.complement_fraction, rng);
      ts[b] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.steps())));
      for (auto& e : eps[b]) e = rng.normal();
    }
    const double loss = step_fn(idx, lab, ts, eps, sched);
    if (!std::isfinite(loss)) {
      throw RuntimeError("train: non-finite loss at step " + std::to_string(step) +
                         " (learning rate " + std::to_string(config.adam.learning_rate) + ")");
    }
    if (s == 0) trace.first_loss = loss;
    trace.last_loss = loss;
    model.step = step;
    window += loss;
    ++in_window;
    if (step % config.log_every == 0 || s + 1 == config.steps) {
      trace.rows.push_back({step, window / static_cast<double>(in_window)});
      window = 0.0;
      in_window = 0;
    }
  }
  return trace;
}

}  // namespace

TrainTrace train_latents(ModelParameters& model, const TrainConfig& config,
                         std::span<const Latent> latents, std::span<const int> labels) {
  config.validate();
  check_labels(model, labels, latents.size());
  for (const auto& z : latents) {
    if (z.size() != model.denoiser.latent_dim()) throw ValidationError("train: latent dimension mismatch");
  }
  Adam adam(config.adam);
  std::vector<LatentExample> batch(config.batch_size);
  return run_steps(model, config, labels,
                   [&](const auto& idx, const auto& lab, const auto& ts, const auto& eps,
                       const NoiseSchedule& sched) {
                     for (std::size_t b = 0; b < batch.size(); ++b) {
                       batch[b] = {latents[idx[b]], lab[b], ts[b], eps[b]};
                     }
                     auto lg = loss_and_grad(model.denoiser, batch, sched);
                     if (std::isfinite(lg.loss)) {
                       const auto& g = lg.grad.denoiser;
                       adam.step(model.denoiser.tensors(), g.tensors());
                     }
                     return lg.loss;
                   });
}

TrainTrace train(ModelParameters& model, const TrainConfig& config, std::span<const PointCloud> clouds,
                 std::span<const int> labels) {
  config.validate();
  if (!model.encoder) throw ValidationError("train: model has no point-cloud encoder");
  check_labels(model, labels, clouds.size());
  auto& encoder = *model.encoder;

  if (!config.joint_encoder) {
    if (model.step == 0) {
      std::vector<Latent> pooled;
      pooled.reserve(clouds.size());
      for (const auto& pc : clouds) pooled.push_back(encode_pooled(encoder, pc));
      fit_standardization(encoder, pooled);
    }
    std::vector<Latent> latents;
    latents.reserve(clouds.size());
    for (const auto& pc : clouds) latents.push_back(encode(encoder, pc));
    return train_latents(model, config, latents, labels);
  }

  Adam adam(config.adam);
  std::vector<CloudExample> batch(config.batch_size);
  return run_steps(model, config, labels,
                   [&](const auto& idx, const auto& lab, const auto& ts, const auto& eps,
                       const NoiseSchedule& sched) {
                     for (std::size_t b = 0; b < batch.size(); ++b) {
                       batch[b] = {&clouds[idx[b]], lab[b], ts[b], eps[b]};
                     }
                     auto lg = loss_and_grad(model.denoiser, encoder, batch, sched);
                     if (std::isfinite(lg.loss)) {
                       std::vector<Tensor*> params = model.denoiser.tensors();
                       const auto& gd = lg.grad.denoiser;
                       std::vector<const Tensor*> grads = gd.tensors();
                       for (auto* t : encoder.trainable()) params.push_back(t);
                       auto& ge = *lg.grad.encoder;
                       for (auto* t : ge.trainable()) grads.push_back(t);
                       adam.step(params, grads);
                     }
                     return lg.loss;
                   });
}

std::string loss_trace_csv(const TrainTrace& trace) {
  std::string out = "step,loss\n";
  char buf[64];
  for (const auto& row : trace.rows) {
    std::snprintf(buf, sizeof buf, "%llu,%.9g\n", static_cast<unsigned long long>(row.step), row.loss);
    out += buf;
  }
  return out;
}

}  // namespace shapediff
