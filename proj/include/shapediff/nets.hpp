#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapediff/geom.hpp"
#include "shapediff/schedule.hpp"

namespace shapediff {

// Named row-major matrix. Vectors are stored with cols == 1.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::string n, std::size_t r, std::size_t c)
      : name(std::move(n)), rows(r), cols(c), data(r * c, 0.0) {}

  std::size_t size() const { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// y = W x + b with W of shape (out, in).
struct Dense {
  Tensor weight;
  Tensor bias;

  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out)
      : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

  std::size_t in() const { return weight.cols; }
  std::size_t out() const { return weight.rows; }
  void forward(std::span<const double> x, std::span<double> y) const;
  // Accumulates dW, db into `grad`; writes W^T dy into `dx` when non-empty.
  void backward(std::span<const double> x, std::span<const double> dy, Dense& grad,
                std::span<double> dx) const;

  friend bool operator==(const Dense&, const Dense&) = default;
};

double silu(double x);
double silu_grad(double x);

// Shared pointwise MLP (3 -> H -> H -> D_z, SiLU) followed by a
// coordinate-wise max over points and a fixed per-dimension standardization
// z = (pooled - shift) * scale. shift/scale are buffers, never trained.
struct EncoderParams {
  Dense l1, l2, l3;
  Tensor shift;
  Tensor scale;

  std::size_t hidden() const { return l1.out(); }
  std::size_t latent_dim() const { return l3.out(); }
  std::vector<Tensor*> trainable();
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

// eps_hat = MLP(z_t ++ cond) + gate(cond) * z_t, with cond = sinusoid(t / T)
// ++ E[label]. Hidden layers use SiLU. The gate is a linear map from cond to
// one gain per latent coordinate; it gives the network a full-rank path from
// z_t to the output when the hidden width is below the latent dimension.
struct DenoiserParams {
  Tensor embedding;  // (num_labels, embed_dim)
  Dense l1, l2, l3;
  Dense gate;
  std::size_t time_dim = 0;
  int steps = 0;  // T, for the t / T time embedding

  std::size_t latent_dim() const { return l3.out(); }
  std::size_t hidden() const { return l1.out(); }
  std::size_t num_labels() const { return embedding.rows; }
  std::size_t embed_dim() const { return embedding.cols; }
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;

  friend bool operator==(const DenoiserParams&, const DenoiserParams&) = default;
};

struct EncoderShape {
  std::size_t hidden = 64;
  std::size_t latent_dim = 32;
};

struct DenoiserShape {
  std::size_t latent_dim = 32;
  std::size_t hidden = 128;
  std::size_t num_labels = 3;
  std::size_t embed_dim = 16;
  std::size_t time_dim = 16;
  int steps = kDefaultSteps;
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases,
// identity standardization. Values are rounded to float32 so that a
// checkpoint round trip is exact.
EncoderParams make_encoder(const EncoderShape& shape, std::uint64_t seed);
DenoiserParams make_denoiser(const DenoiserShape& shape, std::uint64_t seed);

// Same shape, all zeros. Used as gradient accumulators.
EncoderParams zeros_like(const EncoderParams& p);
DenoiserParams zeros_like(const DenoiserParams& p);

// Rounds every tensor entry to the nearest float32.
void round_to_storage(std::vector<Tensor*> tensors);

// sin/cos pairs of (t / T) at frequencies 1000^(k / (dim / 2)), k = 0..dim/2-1.
void time_embedding(int t, int steps, std::span<double> out);

Latent encode(const EncoderParams& params, const PointCloud& pc,
              std::vector<std::size_t>* argmax = nullptr);

// Max-pooled features before standardization.
Latent encode_pooled(const EncoderParams& params, const PointCloud& pc);

// Sets shift/scale so the given pooled features have zero mean and unit
// standard deviation per dimension (dimensions with zero spread get scale 1).
void fit_standardization(EncoderParams& params, std::span<const Latent> pooled);

Latent denoise(const DenoiserParams& params, std::span<const double> z_t, int t, int label);

class DenoiserModel final : public EpsModel {
 public:
  explicit DenoiserModel(const DenoiserParams& params) : params_(&params) {}

  std::size_t dim() const override { return params_->latent_dim(); }
  std::size_t num_labels() const override { return params_->num_labels(); }
  void predict(std::span<const double> z_t, int t, int label, std::span<double> out) const override;
  void predict_batch(std::span<const double> z_t, std::span<const int> ts, int label,
                     std::span<double> out) const override;
  using EpsModel::predict;

 private:
  const DenoiserParams* params_;
};

struct Gradient {
  DenoiserParams denoiser;
  std::optional<EncoderParams> encoder;
};

struct LatentExample {
  Latent z0;
  int label = 0;
  int t = 1;
  Latent eps;
};

struct CloudExample {
  const PointCloud* cloud = nullptr;
  int label = 0;
  int t = 1;
  Latent eps;
};

struct LossAndGrad {
  double loss = 0.0;  // mean over the batch of the summed squared error
  Gradient grad;
};

LossAndGrad loss_and_grad(const DenoiserParams& denoiser, std::span<const LatentExample> batch,
                          const NoiseSchedule& sched);

// End-to-end variant: z0 = encode(cloud), gradients flow into the encoder's
// trainable layers.
LossAndGrad loss_and_grad(const DenoiserParams& denoiser, const EncoderParams& encoder,
                          std::span<const CloudExample> batch, const NoiseSchedule& sched);

}  // namespace shapediff
