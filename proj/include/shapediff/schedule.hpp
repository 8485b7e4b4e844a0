#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace shapediff {

using Latent = std::vector<double>;

// Conditional noise predictor eps_hat(z_t, t, label), t in 1..T.
class EpsModel {
 public:
  virtual ~EpsModel() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t num_labels() const = 0;
  virtual void predict(std::span<const double> z_t, int t, int label, std::span<double> out) const = 0;

  // Batched form: `z_t` and `out` hold ts.size() vectors of dim() entries back
  // to back, column b evaluated at timestep ts[b]. Defaults to per-column calls.
  virtual void predict_batch(std::span<const double> z_t, std::span<const int> ts, int label,
                             std::span<double> out) const {
    const std::size_t d = dim();
    for (std::size_t b = 0; b < ts.size(); ++b) {
      predict(z_t.subspan(b * d, d), ts[b], label, out.subspan(b * d, d));
    }
  }

  Latent predict(std::span<const double> z_t, int t, int label) const {
    Latent out(dim());
    predict(z_t, t, label, out);
    return out;
  }
};

inline constexpr int kDefaultSteps = 1000;
inline constexpr double kDefaultBetaMin = 1e-4;
inline constexpr double kDefaultBetaMax = 0.02;

// Variance-preserving forward process with a linear beta ramp:
//   alpha_bar_t = prod_{s<=t} (1 - beta_s),  alpha_t = sqrt(alpha_bar_t),
//   sigma_t = sqrt(1 - alpha_bar_t).
// Accessors take 1-based timesteps.
class NoiseSchedule {
 public:
  NoiseSchedule(int steps, double beta_min, double beta_max);

  int steps() const { return steps_; }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }
  double beta(int t) const { return beta_[index(t)]; }
  double alpha_bar(int t) const { return alpha_bar_[index(t)]; }
  double alpha(int t) const { return alpha_[index(t)]; }
  double sigma(int t) const { return sigma_[index(t)]; }

 private:
  std::size_t index(int t) const;

  int steps_;
  double beta_min_, beta_max_;
  std::vector<double> beta_, alpha_bar_, alpha_, sigma_;
};

NoiseSchedule make_schedule(int steps = kDefaultSteps, double beta_min = kDefaultBetaMin,
                            double beta_max = kDefaultBetaMax);

// alpha_t * z0 + sigma_t * eps.
Latent forward_diffuse(std::span<const double> z0, int t, std::span<const double> eps,
                       const NoiseSchedule& sched);

// ||eps - eps_hat(z_t, t, label)||^2, summed over coordinates (not averaged).
double eps_loss(const EpsModel& model, std::span<const double> z0, int label, int t,
                std::span<const double> eps, const NoiseSchedule& sched);

// Evenly spaced timesteps floor(i * T / n) for i = 1..n, ascending; always
// ends at T and equals 1..T when n == T.
std::vector<int> timestep_subset(int steps, int n_steps);

// Ancestral sampling from z_T ~ N(0, I) over timestep_subset(T, n_steps),
// visited in decreasing order. Between consecutive visited timesteps t > s
// (alpha_bar_0 = 1) the DDPM posterior mean and variance are used with the
// effective step beta = 1 - alpha_bar_t / alpha_bar_s:
//   z0_hat = (z_t - sigma_t eps_hat) / alpha_t
//   mean   = sqrt(alpha_bar_s) beta / (1 - alpha_bar_t) z0_hat
//          + sqrt(1 - beta) (1 - alpha_bar_s) / (1 - alpha_bar_t) z_t
//   var    = beta (1 - alpha_bar_s) / (1 - alpha_bar_t)
// No noise is added on the final step. `visited`, if given, receives the
// timesteps in the order they were evaluated.
Latent reverse_sample(const EpsModel& model, int label, const NoiseSchedule& sched, int n_steps,
                      std::uint64_t seed, std::vector<int>* visited = nullptr);

}  // namespace shapediff
