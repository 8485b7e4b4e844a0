#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapediff/rng.hpp"
#include "shapediff/schedule.hpp"
#include "shapediff/views.hpp"

namespace shapediff {

struct ClassificationResult {
  std::vector<int> candidates;
  std::vector<double> mean_losses;     // per candidate
  std::vector<double> posterior;       // per candidate, sums to 1
  int predicted = -1;
  std::vector<std::size_t> trials_used;  // per candidate
  std::size_t evaluations = 0;         // denoiser calls
};

// Paired: one (t, eps) sequence shared by all candidates (common random
// numbers). Independent: every candidate draws its own sequence.
enum class Sampling { kPaired, kIndependent };

struct Trial {
  int t;
  Latent eps;
};

// Draws `n` trials: t uniform in 1..steps, then `dim` standard normals.
std::vector<Trial> draw_trials(std::size_t n, std::size_t dim, int steps, Rng& rng);

// Scores every candidate by its mean eps-prediction loss over n_trials and
// predicts the argmin (ties to the lowest class id).
ClassificationResult classify_latent(const EpsModel& model, std::span<const double> z0,
                                     std::span<const int> candidates, std::size_t n_trials,
                                     std::uint64_t seed, const NoiseSchedule& sched,
                                     Sampling sampling = Sampling::kPaired);

// p(c | x) proportional to prior_c * exp(-loss_c), evaluated after
// subtracting the smallest loss.
std::vector<double> posterior(std::span<const double> mean_losses, std::span<const double> prior);
std::vector<double> uniform_prior(std::size_t n);

struct Stage {
  std::size_t trials;
  std::size_t keep;
};

void validate_stages(std::span<const Stage> stages);

// Successive halving over candidates: each stage adds `trials` paired trials
// for the survivors (continuing the same draw sequence as classify_latent),
// then keeps the `keep` lowest running means. Losses accumulate across stages.
ClassificationResult classify_adaptive(const EpsModel& model, std::span<const double> z0,
                                       std::span<const int> candidates, std::span<const Stage> stages,
                                       std::uint64_t seed, const NoiseSchedule& sched);

// Mode of the votes, ties to the lowest class id. For two classes this is the
// one-vs-rest threshold rule: 1 iff at least half the votes are 1.
int majority_vote(std::span<const int> votes, std::size_t n_classes);

// 1 iff sum(votes) >= n / 2.
int threshold_vote(std::span<const int> binary_votes);

struct VoteRecord {
  std::vector<int> votes;  // per-view predictions
  int final = -1;
  std::vector<ClassificationResult> per_view;
};

// Depth image flattened row-major and mapped from [0, 1] to [-1, 1].
Latent view_vector(const DepthImage& img);

// Classifies every view independently (same trial seed for each view) and
// aggregates by majority vote. With `positive` set, the run is one-vs-rest:
// candidates must be {positive, its complement}, votes are 1 for positive and
// the final answer uses threshold_vote (returned as a class id).
VoteRecord classify_multiview(const EpsModel& model2d, std::span<const DepthImage> views,
                              std::span<const int> candidates, std::size_t n_trials,
                              std::uint64_t seed, const NoiseSchedule& sched,
                              std::optional<int> positive = std::nullopt);

}  // namespace shapediff
