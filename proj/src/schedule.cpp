#include "shapediff/schedule.hpp"

#include <cmath>
#include <string>

#include "shapediff/error.hpp"
#include "shapediff/rng.hpp"

namespace shapediff {

NoiseSchedule::NoiseSchedule(int steps, double beta_min, double beta_max)
    : steps_(steps), beta_min_(beta_min), beta_max_(beta_max) {
  if (steps < 1) throw ValidationError("schedule: steps must be >= 1");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
    throw ValidationError("schedule: need 0 < beta_min <= beta_max < 1, got beta_min=" +
                          std::to_string(beta_min) + " beta_max=" + std::to_string(beta_max));
  }
  const auto n = static_cast<std::size_t>(steps);
  beta_.resize(n);
  alpha_bar_.resize(n);
  alpha_.resize(n);
  sigma_.resize(n);
  double prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    beta_[i] = beta_min + (beta_max - beta_min) * frac;
    prod *= 1.0 - beta_[i];
    alpha_bar_[i] = prod;
    alpha_[i] = std::sqrt(prod);
    sigma_[i] = std::sqrt(1.0 - prod);
    if (std::abs(alpha_[i] * alpha_[i] + sigma_[i] * sigma_[i] - 1.0) > 1e-9) {
      throw RuntimeError("schedule: variance preservation violated at t=" + std::to_string(i + 1));
    }
  }
}

std::size_t NoiseSchedule::index(int t) const {
  if (t < 1 || t > steps_) {
    throw ValidationError("timestep " + std::to_string(t) + " outside 1.." + std::to_string(steps_));
  }
  return static_cast<std::size_t>(t - 1);
}

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max) {
  return NoiseSchedule(steps, beta_min, beta_max);
}

Latent forward_diffuse(std::span<const double> z0, int t, std::span<const double> eps,
                       const NoiseSchedule& sched) {
  if (z0.size() != eps.size()) {
    throw ValidationError("forward_diffuse: dimension mismatch " + std::to_string(z0.size()) +
                          " vs " + std::to_string(eps.size()));
  }
  const double a = sched.alpha(t);
  const double s = sched.sigma(t);
  Latent z(z0.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = a * z0[i] + s * eps[i];
  return z;
}

double eps_loss(const EpsModel& model, std::span<const double> z0, int label, int t,
                std::span<const double> eps, const NoiseSchedule& sched) {
  if (z0.size() != model.dim()) {
    throw ValidationError("eps_loss: latent has dimension " + std::to_string(z0.size()) +
                          ", model expects " + std::to_string(model.dim()));
  }
  const auto z_t = forward_diffuse(z0, t, eps, sched);
  const auto eps_hat = model.predict(z_t, t, label);
  double loss = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double d = eps[i] - eps_hat[i];
    loss += d * d;
  }
  return loss;
}

std::vector<int> timestep_subset(int steps, int n_steps) {
  if (n_steps < 1) throw ValidationError("timestep_subset: n_steps must be >= 1");
  if (n_steps > steps) {
    throw ValidationError("timestep_subset: n_steps " + std::to_string(n_steps) + " exceeds T=" +
                          std::to_string(steps));
  }
  std::vector<int> ts(static_cast<std::size_t>(n_steps));
  for (int i = 1; i <= n_steps; ++i) {
    ts[static_cast<std::size_t>(i - 1)] =
        static_cast<int>(static_cast<long long>(i) * steps / n_steps);
  }
  return ts;
}

Latent reverse_sample(const EpsModel& model, int label, const NoiseSchedule& sched, int n_steps,
                      std::uint64_t seed, std::vector<int>* visited) {
  if (n_steps == 0) throw ValidationError("reverse_sample: n_steps must be >= 1");
  const auto ts = timestep_subset(sched.steps(), n_steps);
  Rng rng(seed);
  const std::size_t dim = model.dim();
  Latent z(dim);
  for (auto& v : z) v = rng.normal();
  Latent eps_hat(dim);
  if (visited) visited->clear();

  for (std::size_t k = ts.size(); k-- > 0;) {
    const int t = ts[k];
    const int s = k == 0 ? 0 : ts[k - 1];
    if (visited) visited->push_back(t);
    model.predict(z, t, label, eps_hat);

    const double ab_t = sched.alpha_bar(t);
    const double ab_s = s == 0 ? 1.0 : sched.alpha_bar(s);
    const double beta = 1.0 - ab_t / ab_s;
    const double coef_x0 = std::sqrt(ab_s) * beta / (1.0 - ab_t);
    const double coef_zt = std::sqrt(1.0 - beta) * (1.0 - ab_s) / (1.0 - ab_t);
    const double var = beta * (1.0 - ab_s) / (1.0 - ab_t);
    const double a = sched.alpha(t), sg = sched.sigma(t);
    for (std::size_t i = 0; i < dim; ++i) {
      const double x0 = (z[i] - sg * eps_hat[i]) / a;
      z[i] = coef_x0 * x0 + coef_zt * z[i];
    }
    if (s > 0) {
      const double sd = std::sqrt(var);
      for (auto& v : z) v += sd * rng.normal();
    }
  }
  return z;
}

}  // namespace shapediff
