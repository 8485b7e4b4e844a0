#include "shapediff/nets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Dense>

#include "shapediff/error.hpp"
#include "shapediff/rng.hpp"

namespace shapediff {

void Dense::forward(std::span<const double> x, std::span<double> y) const {
  const std::size_t n_in = in(), n_out = out();
  const double* w = weight.data.data();
  for (std::size_t o = 0; o < n_out; ++o) {
    double acc = bias.data[o];
    const double* row = w + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void Dense::backward(std::span<const double> x, std::span<const double> dy, Dense& grad,
                     std::span<double> dx) const {
  const std::size_t n_in = in(), n_out = out();
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t o = 0; o < n_out; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    grad.bias.data[o] += g;
    double* grow = grad.weight.data.data() + o * n_in;
    const double* row = weight.data.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) grow[i] += g * x[i];
    if (!dx.empty()) {
      for (std::size_t i = 0; i < n_in; ++i) dx[i] += g * row[i];
    }
  }
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

std::vector<Tensor*> EncoderParams::trainable() {
  return {&l1.weight, &l1.bias, &l2.weight, &l2.bias, &l3.weight, &l3.bias};
}

std::vector<Tensor*> EncoderParams::tensors() {
  auto t = trainable();
  t.push_back(&shift);
  t.push_back(&scale);
  return t;
}

std::vector<const Tensor*> EncoderParams::tensors() const {
  return {&l1.weight, &l1.bias, &l2.weight, &l2.bias, &l3.weight, &l3.bias, &shift, &scale};
}

std::vector<Tensor*> DenoiserParams::tensors() {
  return {&embedding, &l1.weight, &l1.bias, &l2.weight, &l2.bias,
          &l3.weight, &l3.bias, &gate.weight, &gate.bias};
}

std::vector<const Tensor*> DenoiserParams::tensors() const {
  return {&embedding, &l1.weight, &l1.bias, &l2.weight, &l2.bias,
          &l3.weight, &l3.bias, &gate.weight, &gate.bias};
}

namespace {

void glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-limit, limit);
}

void init_dense(Dense& d, Rng& rng) { glorot(d.weight, d.in(), d.out(), rng); }

}  // namespace

void round_to_storage(std::vector<Tensor*> tensors) {
  for (auto* t : tensors) {
    for (auto& v : t->data) v = static_cast<double>(static_cast<float>(v));
  }
}

EncoderParams make_encoder(const EncoderShape& shape, std::uint64_t seed) {
  if (shape.hidden == 0 || shape.latent_dim == 0) throw ValidationError("encoder: zero dimension");
  EncoderParams p;
  p.l1 = Dense("encoder.l1", 3, shape.hidden);
  p.l2 = Dense("encoder.l2", shape.hidden, shape.hidden);
  p.l3 = Dense("encoder.l3", shape.hidden, shape.latent_dim);
  p.shift = Tensor("encoder.shift", shape.latent_dim, 1);
  p.scale = Tensor("encoder.scale", shape.latent_dim, 1);
  std::fill(p.scale.data.begin(), p.scale.data.end(), 1.0);
  Rng rng(derive_seed(seed, "encoder-init"));
  init_dense(p.l1, rng);
  init_dense(p.l2, rng);
  init_dense(p.l3, rng);
  round_to_storage(p.tensors());
  return p;
}

DenoiserParams make_denoiser(const DenoiserShape& shape, std::uint64_t seed) {
  if (shape.latent_dim == 0 || shape.hidden == 0 || shape.num_labels == 0 || shape.embed_dim == 0) {
    throw ValidationError("denoiser: zero dimension");
  }
  if (shape.time_dim % 2 != 0) throw ValidationError("denoiser: time_dim must be even");
  if (shape.steps < 1) throw ValidationError("denoiser: steps must be >= 1");
  DenoiserParams p;
  p.time_dim = shape.time_dim;
  p.steps = shape.steps;
  p.embedding = Tensor("denoiser.embedding", shape.num_labels, shape.embed_dim);
  const std::size_t in = shape.latent_dim + shape.time_dim + shape.embed_dim;
  p.l1 = Dense("denoiser.l1", in, shape.hidden);
  p.l2 = Dense("denoiser.l2", shape.hidden, shape.hidden);
  p.l3 = Dense("denoiser.l3", shape.hidden, shape.latent_dim);
  p.gate = Dense("denoiser.gate", shape.time_dim + shape.embed_dim, shape.latent_dim);
  Rng rng(derive_seed(seed, "denoiser-init"));
  glorot(p.embedding, shape.num_labels, shape.embed_dim, rng);
  init_dense(p.l1, rng);
  init_dense(p.l2, rng);
  init_dense(p.l3, rng);
  init_dense(p.gate, rng);
  round_to_storage(p.tensors());
  return p;
}

namespace {

void zero(std::vector<Tensor*> ts) {
  for (auto* t : ts) std::fill(t->data.begin(), t->data.end(), 0.0);
}

}  // namespace

EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams z = p;
  zero(z.tensors());
  return z;
}

DenoiserParams zeros_like(const DenoiserParams& p) {
  DenoiserParams z = p;
  zero(z.tensors());
  return z;
}

void time_embedding(int t, int steps, std::span<double> out) {
  const std::size_t half = out.size() / 2;
  const double u = static_cast<double>(t) / static_cast<double>(steps);
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::pow(1000.0, static_cast<double>(k) / static_cast<double>(half));
    out[2 * k] = std::sin(u * freq);
    out[2 * k + 1] = std::cos(u * freq);
  }
}

// ---------------------------------------------------------------------------
// Encoder

namespace {

struct PointTape {
  double x[3];
  std::vector<double> a1, h1, a2, h2, f;
};

void encoder_point_forward(const EncoderParams& p, const Vec3& pt, PointTape& tape) {
  const std::size_t h = p.hidden();
  tape.x[0] = pt[0];
  tape.x[1] = pt[1];
  tape.x[2] = pt[2];
  tape.a1.resize(h);
  tape.h1.resize(h);
  tape.a2.resize(h);
  tape.h2.resize(h);
  tape.f.resize(p.latent_dim());
  p.l1.forward(std::span<const double>(tape.x, 3), tape.a1);
  for (std::size_t i = 0; i < h; ++i) tape.h1[i] = silu(tape.a1[i]);
  p.l2.forward(tape.h1, tape.a2);
  for (std::size_t i = 0; i < h; ++i) tape.h2[i] = silu(tape.a2[i]);
  p.l3.forward(tape.h2, tape.f);
}

Latent pooled_features(const EncoderParams& p, const PointCloud& pc, std::vector<std::size_t>* argmax) {
  if (pc.empty()) throw ValidationError("encode: empty point cloud");
  const std::size_t d = p.latent_dim();
  Latent pooled(d, -std::numeric_limits<double>::infinity());
  if (argmax) argmax->assign(d, 0);
  PointTape tape;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    encoder_point_forward(p, pc.points[i], tape);
    for (std::size_t j = 0; j < d; ++j) {
      if (tape.f[j] > pooled[j]) {
        pooled[j] = tape.f[j];
        if (argmax) (*argmax)[j] = i;
      }
    }
  }
  return pooled;
}

// Backpropagates d(loss)/d(z) through standardization and max pooling.
void encoder_backward(const EncoderParams& p, const PointCloud& pc,
                      const std::vector<std::size_t>& argmax, std::span<const double> dz,
                      EncoderParams& grad) {
  const std::size_t d = p.latent_dim();
  const std::size_t h = p.hidden();
  std::map<std::size_t, std::vector<double>> per_point;
  for (std::size_t j = 0; j < d; ++j) {
    auto& df = per_point[argmax[j]];
    if (df.empty()) df.assign(d, 0.0);
    df[j] += dz[j] * p.scale.data[j];
  }
  PointTape tape;
  std::vector<double> dh2(h), da2(h), dh1(h), da1(h);
  for (const auto& [idx, df] : per_point) {
    encoder_point_forward(p, pc.points[idx], tape);
    p.l3.backward(tape.h2, df, grad.l3, dh2);
    for (std::size_t i = 0; i < h; ++i) da2[i] = dh2[i] * silu_grad(tape.a2[i]);
    p.l2.backward(tape.h1, da2, grad.l2, dh1);
    for (std::size_t i = 0; i < h; ++i) da1[i] = dh1[i] * silu_grad(tape.a1[i]);
    p.l1.backward(std::span<const double>(tape.x, 3), da1, grad.l1, {});
  }
}

}  // namespace

Latent encode_pooled(const EncoderParams& params, const PointCloud& pc) {
  return pooled_features(params, pc, nullptr);
}

Latent encode(const EncoderParams& params, const PointCloud& pc, std::vector<std::size_t>* argmax) {
  Latent z = pooled_features(params, pc, argmax);
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = (z[j] - params.shift.data[j]) * params.scale.data[j];
  return z;
}

void fit_standardization(EncoderParams& params, std::span<const Latent> pooled) {
  if (pooled.empty()) throw ValidationError("fit_standardization: no samples");
  const std::size_t d = params.latent_dim();
  const double n = static_cast<double>(pooled.size());
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (const auto& z : pooled) mean += z[j];
    mean /= n;
    double var = 0.0;
    for (const auto& z : pooled) var += (z[j] - mean) * (z[j] - mean);
    var /= n;
    const double sd = std::sqrt(var);
    params.shift.data[j] = mean;
    params.scale.data[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  round_to_storage({&params.shift, &params.scale});
}

// ---------------------------------------------------------------------------
// Denoiser, evaluated column-batched: every matrix column is one example.

namespace {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> weight_of(const Dense& d) {
  return {d.weight.data.data(), static_cast<Eigen::Index>(d.out()), static_cast<Eigen::Index>(d.in())};
}
Eigen::Map<RowMat> weight_of(Dense& d) {
  return {d.weight.data.data(), static_cast<Eigen::Index>(d.out()), static_cast<Eigen::Index>(d.in())};
}
Eigen::Map<const Eigen::VectorXd> bias_of(const Dense& d) {
  return {d.bias.data.data(), static_cast<Eigen::Index>(d.out())};
}
Eigen::Map<Eigen::VectorXd> bias_of(Dense& d) {
  return {d.bias.data.data(), static_cast<Eigen::Index>(d.out())};
}

struct DenoiserTape {
  Mat x;  // rows: z_t, time embedding, class embedding
  Mat a1, h1, a2, h2, g;
  std::vector<int> labels;
};

void check_denoiser_inputs(const DenoiserParams& p, std::size_t z_size, int t, int label) {
  if (z_size != p.latent_dim()) {
    throw ValidationError("denoise: input dimension " + std::to_string(z_size) + ", expected " +
                          std::to_string(p.latent_dim()));
  }
  if (label < 0 || static_cast<std::size_t>(label) >= p.num_labels()) {
    throw ValidationError("denoise: unknown class id " + std::to_string(label));
  }
  if (t < 1 || t > p.steps) {
    throw ValidationError("denoise: timestep " + std::to_string(t) + " outside 1.." +
                          std::to_string(p.steps));
  }
}

// z holds batch columns of latent_dim entries each.
void denoiser_forward(const DenoiserParams& p, std::span<const double> z, std::span<const int> ts,
                      std::span<const int> labels, Mat& out, DenoiserTape& tape) {
  const auto dz = static_cast<Eigen::Index>(p.latent_dim());
  const auto dt = static_cast<Eigen::Index>(p.time_dim);
  const auto de = static_cast<Eigen::Index>(p.embed_dim());
  const auto batch = static_cast<Eigen::Index>(ts.size());
  if (z.size() != p.latent_dim() * ts.size()) {
    throw ValidationError("denoise: input dimension " + std::to_string(z.size() / std::max<std::size_t>(ts.size(), 1)) +
                          ", expected " + std::to_string(p.latent_dim()));
  }
  tape.x.resize(dz + dt + de, batch);
  tape.labels.assign(labels.begin(), labels.end());
  std::vector<double> temb(static_cast<std::size_t>(dt));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    check_denoiser_inputs(p, p.latent_dim(), ts[ub], labels[ub]);
    tape.x.col(b).head(dz) = Eigen::Map<const Eigen::VectorXd>(z.data() + ub * p.latent_dim(), dz);
    time_embedding(ts[ub], p.steps, temb);
    tape.x.col(b).segment(dz, dt) = Eigen::Map<const Eigen::VectorXd>(temb.data(), dt);
    tape.x.col(b).tail(de) = Eigen::Map<const Eigen::VectorXd>(
        p.embedding.data.data() + static_cast<std::size_t>(labels[ub]) * p.embed_dim(), de);
  }
  tape.a1.noalias() = weight_of(p.l1) * tape.x;
  tape.a1.colwise() += bias_of(p.l1);
  tape.h1 = tape.a1.unaryExpr([](double v) { return silu(v); });
  tape.a2.noalias() = weight_of(p.l2) * tape.h1;
  tape.a2.colwise() += bias_of(p.l2);
  tape.h2 = tape.a2.unaryExpr([](double v) { return silu(v); });
  tape.g.noalias() = weight_of(p.gate) * tape.x.bottomRows(dt + de);
  tape.g.colwise() += bias_of(p.gate);
  out.noalias() = weight_of(p.l3) * tape.h2;
  out.colwise() += bias_of(p.l3);
  out.array() += tape.g.array() * tape.x.topRows(dz).array();
}

// Accumulates parameter gradients for d(loss)/d(out); writes d(loss)/d(z_t)
// into dz when given.
void denoiser_backward(const DenoiserParams& p, const DenoiserTape& tape, const Mat& d_out,
                       DenoiserParams& grad, Mat* dz) {
  const auto dzn = static_cast<Eigen::Index>(p.latent_dim());
  const auto dt = static_cast<Eigen::Index>(p.time_dim);
  const auto de = static_cast<Eigen::Index>(p.embed_dim());
  const auto cond = tape.x.bottomRows(dt + de);

  const Mat dg = d_out.array() * tape.x.topRows(dzn).array();
  weight_of(grad.gate).noalias() += dg * cond.transpose();
  bias_of(grad.gate) += dg.rowwise().sum();
  const Mat dcond = weight_of(p.gate).transpose() * dg;

  weight_of(grad.l3).noalias() += d_out * tape.h2.transpose();
  bias_of(grad.l3) += d_out.rowwise().sum();
  const Mat da2 = (weight_of(p.l3).transpose() * d_out).array() *
                  tape.a2.unaryExpr([](double v) { return silu_grad(v); }).array();
  weight_of(grad.l2).noalias() += da2 * tape.h1.transpose();
  bias_of(grad.l2) += da2.rowwise().sum();
  const Mat da1 = (weight_of(p.l2).transpose() * da2).array() *
                  tape.a1.unaryExpr([](double v) { return silu_grad(v); }).array();
  weight_of(grad.l1).noalias() += da1 * tape.x.transpose();
  bias_of(grad.l1) += da1.rowwise().sum();
  const Mat dx = weight_of(p.l1).transpose() * da1;

  for (Eigen::Index b = 0; b < dx.cols(); ++b) {
    const auto row = static_cast<std::size_t>(tape.labels[static_cast<std::size_t>(b)]) * p.embed_dim();
    Eigen::Map<Eigen::VectorXd>(grad.embedding.data.data() + row, de) +=
        dx.col(b).tail(de) + dcond.col(b).tail(de);
  }
  if (dz) *dz = dx.topRows(dzn) + (d_out.array() * tape.g.array()).matrix();
}

}  // namespace

Latent denoise(const DenoiserParams& params, std::span<const double> z_t, int t, int label) {
  check_denoiser_inputs(params, z_t.size(), t, label);
  DenoiserTape tape;
  Mat out;
  denoiser_forward(params, z_t, std::span<const int>(&t, 1), std::span<const int>(&label, 1), out, tape);
  return Latent(out.data(), out.data() + out.size());
}

void DenoiserModel::predict(std::span<const double> z_t, int t, int label, std::span<double> out) const {
  check_denoiser_inputs(*params_, z_t.size(), t, label);
  predict_batch(z_t, std::span<const int>(&t, 1), label, out);
}

void DenoiserModel::predict_batch(std::span<const double> z_t, std::span<const int> ts, int label,
                                  std::span<double> out) const {
  thread_local DenoiserTape tape;
  thread_local Mat result;
  const std::vector<int> labels(ts.size(), label);
  denoiser_forward(*params_, z_t, ts, labels, result, tape);
  std::copy(result.data(), result.data() + result.size(), out.begin());
}

// ---------------------------------------------------------------------------
// Loss and gradient

namespace {

// Mean summed squared error over columns; fills d(loss)/d(out).
double batch_loss(const Mat& eps_hat, const Mat& eps, Mat& d_out) {
  const double weight = 1.0 / static_cast<double>(eps.cols());
  const Mat r = eps - eps_hat;
  d_out = (-2.0 * weight) * r;
  double loss = 0.0;
  for (Eigen::Index b = 0; b < r.cols(); ++b) loss += r.col(b).squaredNorm();
  return loss * weight;
}

}  // namespace

LossAndGrad loss_and_grad(const DenoiserParams& denoiser, std::span<const LatentExample> batch,
                          const NoiseSchedule& sched) {
  if (batch.empty()) throw ValidationError("loss_and_grad: empty batch");
  const std::size_t d = denoiser.latent_dim();
  const auto n = static_cast<Eigen::Index>(batch.size());
  std::vector<double> z(d * batch.size());
  std::vector<int> ts(batch.size()), labels(batch.size());
  Mat eps(static_cast<Eigen::Index>(d), n);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    if (ex.z0.size() != d || ex.eps.size() != d) throw ValidationError("loss_and_grad: dimension mismatch");
    const auto z_t = forward_diffuse(ex.z0, ex.t, ex.eps, sched);
    std::copy(z_t.begin(), z_t.end(), z.begin() + static_cast<std::ptrdiff_t>(b * d));
    eps.col(static_cast<Eigen::Index>(b)) = Eigen::Map<const Eigen::VectorXd>(ex.eps.data(), static_cast<Eigen::Index>(d));
    ts[b] = ex.t;
    labels[b] = ex.label;
  }
  DenoiserTape tape;
  Mat out, d_out;
  denoiser_forward(denoiser, z, ts, labels, out, tape);
  LossAndGrad result{batch_loss(out, eps, d_out), {zeros_like(denoiser), std::nullopt}};
  denoiser_backward(denoiser, tape, d_out, result.grad.denoiser, nullptr);
  return result;
}

LossAndGrad loss_and_grad(const DenoiserParams& denoiser, const EncoderParams& encoder,
                          std::span<const CloudExample> batch, const NoiseSchedule& sched) {
  if (batch.empty()) throw ValidationError("loss_and_grad: empty batch");
  if (encoder.latent_dim() != denoiser.latent_dim()) {
    throw ValidationError("loss_and_grad: encoder/denoiser latent dimension mismatch");
  }
  const std::size_t d = denoiser.latent_dim();
  const auto n = static_cast<Eigen::Index>(batch.size());
  std::vector<double> z(d * batch.size());
  std::vector<int> ts(batch.size()), labels(batch.size());
  std::vector<std::vector<std::size_t>> argmax(batch.size());
  Mat eps(static_cast<Eigen::Index>(d), n);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    if (ex.eps.size() != d) throw ValidationError("loss_and_grad: dimension mismatch");
    const auto z0 = encode(encoder, *ex.cloud, &argmax[b]);
    const auto z_t = forward_diffuse(z0, ex.t, ex.eps, sched);
    std::copy(z_t.begin(), z_t.end(), z.begin() + static_cast<std::ptrdiff_t>(b * d));
    eps.col(static_cast<Eigen::Index>(b)) = Eigen::Map<const Eigen::VectorXd>(ex.eps.data(), static_cast<Eigen::Index>(d));
    ts[b] = ex.t;
    labels[b] = ex.label;
  }
  DenoiserTape tape;
  Mat out, d_out, dz;
  denoiser_forward(denoiser, z, ts, labels, out, tape);
  LossAndGrad result{batch_loss(out, eps, d_out), {zeros_like(denoiser), zeros_like(encoder)}};
  denoiser_backward(denoiser, tape, d_out, result.grad.denoiser, &dz);
  std::vector<double> dz0(d);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double a = sched.alpha(batch[b].t);
    for (std::size_t i = 0; i < d; ++i) dz0[i] = a * dz(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
    encoder_backward(encoder, *batch[b].cloud, argmax[b], dz0, *result.grad.encoder);
  }
  return result;
}

}  // namespace shapediff
