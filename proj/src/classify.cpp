#include "shapediff/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "shapediff/error.hpp"
#include "shapediff/rng.hpp"

namespace shapediff {

namespace {

void check_candidates(const EpsModel& model, std::span<const int> candidates) {
  if (candidates.size() < 2) throw ValidationError("classify: at least 2 candidate classes required");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const int c = candidates[i];
    if (c < 0 || static_cast<std::size_t>(c) >= model.num_labels()) {
      throw ValidationError("classify: unknown candidate class " + std::to_string(c));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (candidates[j] == c) throw ValidationError("classify: duplicate candidate " + std::to_string(c));
    }
  }
}

// Index of the smallest mean among `alive`, ties to the lowest class id.
std::size_t best_index(const ClassificationResult& r, const std::vector<std::size_t>& alive) {
  std::size_t best = alive.front();
  for (auto i : alive) {
    const double a = r.mean_losses[i], b = r.mean_losses[best];
    if (a < b || (a == b && r.candidates[i] < r.candidates[best])) best = i;
  }
  return best;
}

// Sum of the per-trial losses for one label, evaluated as a single batch.
double trial_loss_sum(const EpsModel& model, std::span<const double> z0, int label,
                      const std::vector<Trial>& trials, const NoiseSchedule& sched) {
  const std::size_t d = model.dim();
  std::vector<double> z(d * trials.size()), out(d * trials.size());
  std::vector<int> ts(trials.size());
  for (std::size_t b = 0; b < trials.size(); ++b) {
    const auto z_t = forward_diffuse(z0, trials[b].t, trials[b].eps, sched);
    std::copy(z_t.begin(), z_t.end(), z.begin() + static_cast<std::ptrdiff_t>(b * d));
    ts[b] = trials[b].t;
  }
  model.predict_batch(z, ts, label, out);
  double sum = 0.0;
  for (std::size_t b = 0; b < trials.size(); ++b) {
    double loss = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double r = trials[b].eps[i] - out[b * d + i];
      loss += r * r;
    }
    sum += loss;
  }
  return sum;
}

}  // namespace

std::vector<Trial> draw_trials(std::size_t n, std::size_t dim, int steps, Rng& rng) {
  std::vector<Trial> trials(n);
  for (auto& tr : trials) {
    tr.t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(steps)));
    tr.eps.resize(dim);
    for (auto& e : tr.eps) e = rng.normal();
  }
  return trials;
}

ClassificationResult classify_latent(const EpsModel& model, std::span<const double> z0,
                                     std::span<const int> candidates, std::size_t n_trials,
                                     std::uint64_t seed, const NoiseSchedule& sched, Sampling sampling) {
  if (n_trials == 0) throw ValidationError("classify: n_trials must be >= 1");
  const Stage single{n_trials, 1};
  if (sampling == Sampling::kPaired) {
    // A single stage adds the trials and prunes to the argmin, which is
    // exactly plain paired scoring.
    return classify_adaptive(model, z0, candidates, std::span<const Stage>(&single, 1), seed, sched);
  }

  check_candidates(model, candidates);
  if (z0.size() != model.dim()) throw ValidationError("classify: latent dimension mismatch");
  ClassificationResult r;
  r.candidates.assign(candidates.begin(), candidates.end());
  r.mean_losses.assign(candidates.size(), 0.0);
  r.trials_used.assign(candidates.size(), n_trials);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Rng rng(derive_seed(seed, "independent-trials", static_cast<std::uint64_t>(candidates[i])));
    const auto trials = draw_trials(n_trials, model.dim(), sched.steps(), rng);
    const double sum = trial_loss_sum(model, z0, candidates[i], trials, sched);
    r.mean_losses[i] = sum / static_cast<double>(n_trials);
    r.evaluations += n_trials;
  }
  std::vector<std::size_t> all(candidates.size());
  std::iota(all.begin(), all.end(), 0);
  r.predicted = r.candidates[best_index(r, all)];
  r.posterior = posterior(r.mean_losses, uniform_prior(candidates.size()));
  return r;
}

std::vector<double> uniform_prior(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::vector<double> posterior(std::span<const double> mean_losses, std::span<const double> prior) {
  if (mean_losses.empty()) throw ValidationError("posterior: no classes");
  if (prior.size() != mean_losses.size()) throw ValidationError("posterior: prior/loss size mismatch");
  double prior_sum = 0.0;
  for (double p : prior) {
    if (!(p > 0.0) || !std::isfinite(p)) throw ValidationError("posterior: prior entries must be > 0");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) throw ValidationError("posterior: prior must sum to 1");
  double min_loss = mean_losses[0];
  for (double l : mean_losses) {
    if (!std::isfinite(l)) throw ValidationError("posterior: non-finite loss");
    min_loss = std::min(min_loss, l);
  }
  std::vector<double> p(mean_losses.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = prior[i] * std::exp(-(mean_losses[i] - min_loss));
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

void validate_stages(std::span<const Stage> stages) {
  if (stages.empty()) throw ValidationError("adaptive schedule: no stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].trials == 0) throw ValidationError("adaptive schedule: stage with zero trials");
    if (stages[i].keep == 0) throw ValidationError("adaptive schedule: stage keeps zero candidates");
    if (i > 0 && stages[i].keep >= stages[i - 1].keep) {
      throw ValidationError("adaptive schedule: keep counts must be strictly decreasing");
    }
  }
}

ClassificationResult classify_adaptive(const EpsModel& model, std::span<const double> z0,
                                       std::span<const int> candidates, std::span<const Stage> stages,
                                       std::uint64_t seed, const NoiseSchedule& sched) {
  validate_stages(stages);
  check_candidates(model, candidates);
  if (z0.size() != model.dim()) throw ValidationError("classify: latent dimension mismatch");

  ClassificationResult r;
  r.candidates.assign(candidates.begin(), candidates.end());
  r.mean_losses.assign(candidates.size(), 0.0);
  r.trials_used.assign(candidates.size(), 0);
  std::vector<double> sums(candidates.size(), 0.0);
  std::vector<std::size_t> alive(candidates.size());
  std::iota(alive.begin(), alive.end(), 0);

  Rng rng(seed);
  for (const auto& stage : stages) {
    const auto trials = draw_trials(stage.trials, model.dim(), sched.steps(), rng);
    for (auto i : alive) {
      sums[i] += trial_loss_sum(model, z0, candidates[i], trials, sched);
      r.trials_used[i] += trials.size();
      r.evaluations += trials.size();
      r.mean_losses[i] = sums[i] / static_cast<double>(r.trials_used[i]);
    }
    if (stage.keep < alive.size()) {
      std::stable_sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) {
        if (r.mean_losses[a] != r.mean_losses[b]) return r.mean_losses[a] < r.mean_losses[b];
        return r.candidates[a] < r.candidates[b];
      });
      alive.resize(stage.keep);
      std::sort(alive.begin(), alive.end());
    }
  }
  r.predicted = r.candidates[best_index(r, alive)];
  r.posterior = posterior(r.mean_losses, uniform_prior(candidates.size()));
  return r;
}

int threshold_vote(std::span<const int> binary_votes) {
  if (binary_votes.empty()) throw ValidationError("vote: empty vote list");
  std::size_t positive = 0;
  for (int v : binary_votes) {
    if (v != 0 && v != 1) throw ValidationError("vote: binary votes must be 0 or 1");
    positive += static_cast<std::size_t>(v);
  }
  return 2 * positive >= binary_votes.size() ? 1 : 0;
}

int majority_vote(std::span<const int> votes, std::size_t n_classes) {
  if (votes.empty()) throw ValidationError("vote: empty vote list");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int v : votes) {
    if (v < 0 || static_cast<std::size_t>(v) >= n_classes) {
      throw ValidationError("vote: class " + std::to_string(v) + " outside 0.." + std::to_string(n_classes - 1));
    }
    ++counts[static_cast<std::size_t>(v)];
  }
  if (n_classes == 2) return threshold_vote(votes);
  std::size_t best = 0;
  for (std::size_t c = 1; c < n_classes; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<int>(best);
}

Latent view_vector(const DepthImage& img) {
  Latent v(img.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0 * img.pixels[i] - 1.0;
  return v;
}

VoteRecord classify_multiview(const EpsModel& model2d, std::span<const DepthImage> views,
                              std::span<const int> candidates, std::size_t n_trials, std::uint64_t seed,
                              const NoiseSchedule& sched, std::optional<int> positive) {
  if (views.empty()) throw ValidationError("classify_multiview: no views");
  for (const auto& v : views) {
    if (v.size != views.front().size || v.pixels.size() != v.size * v.size) {
      throw ValidationError("classify_multiview: inconsistent view sizes");
    }
  }
  if (views.front().pixels.size() != model2d.dim()) {
    throw ValidationError("classify_multiview: view has " + std::to_string(views.front().pixels.size()) +
                          " pixels, model expects " + std::to_string(model2d.dim()));
  }
  if (positive && (candidates.size() != 2 ||
                   (candidates[0] != *positive && candidates[1] != *positive))) {
    throw ValidationError("classify_multiview: one-vs-rest needs exactly {positive, complement}");
  }

  VoteRecord rec;
  for (const auto& view : views) {
    auto r = classify_latent(model2d, view_vector(view), candidates, n_trials, seed, sched);
    rec.votes.push_back(r.predicted);
    rec.per_view.push_back(std::move(r));
  }
  if (positive) {
    std::vector<int> binary;
    for (int v : rec.votes) binary.push_back(v == *positive ? 1 : 0);
    const int other = candidates[0] == *positive ? candidates[1] : candidates[0];
    rec.final = threshold_vote(binary) == 1 ? *positive : other;
  } else {
    const int max_id = *std::max_element(candidates.begin(), candidates.end());
    rec.final = majority_vote(rec.votes, static_cast<std::size_t>(max_id) + 1);
  }
  return rec;
}

}  // namespace shapediff
