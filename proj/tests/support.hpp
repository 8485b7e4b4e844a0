#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "shapediff/geom.hpp"
#include "shapediff/rng.hpp"
#include "shapediff/schedule.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(SHAPEDIFF_TEST_DATA) / name;
}

inline shapediff::PointCloud random_cloud(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  shapediff::Rng rng(seed);
  shapediff::PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    pc.points.push_back({scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1)});
  }
  return pc;
}

// Greedy farthest point selection recomputed from scratch at every step:
// the next pick is the lowest index whose minimum distance to the chosen set
// is maximal.
inline std::vector<std::size_t> greedy_fps_oracle(const shapediff::PointCloud& pc, std::size_t k,
                                                  std::size_t start) {
  std::vector<std::size_t> chosen{start};
  while (chosen.size() < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      double dmin = INFINITY;
      for (auto j : chosen) {
        double d = 0.0;
        for (int a = 0; a < 3; ++a) d += (pc.points[i][a] - pc.points[j][a]) * (pc.points[i][a] - pc.points[j][a]);
        dmin = std::min(dmin, d);
      }
      if (dmin > best_d) {
        best_d = dmin;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

// Knows the clean latent, so it can recover the injected noise exactly:
// eps = (z_t - alpha_t z0) / sigma_t. Returns it for `target` and zeros for
// every other label.
class OracleModel : public shapediff::EpsModel {
 public:
  OracleModel(std::vector<double> z0, const shapediff::NoiseSchedule& sched, int target, std::size_t labels)
      : z0_(std::move(z0)), sched_(sched), target_(target), labels_(labels) {}
  std::size_t dim() const override { return z0_.size(); }
  std::size_t num_labels() const override { return labels_; }
  void predict(std::span<const double> z_t, int t, int label, std::span<double> out) const override {
    for (std::size_t i = 0; i < z0_.size(); ++i) {
      out[i] = label == target_ ? (z_t[i] - sched_.alpha(t) * z0_[i]) / sched_.sigma(t) : 0.0;
    }
  }

 private:
  std::vector<double> z0_;
  shapediff::NoiseSchedule sched_;
  int target_;
  std::size_t labels_;
};

// Returns a fixed vector per label.
class ConstantModel : public shapediff::EpsModel {
 public:
  explicit ConstantModel(std::vector<std::vector<double>> outputs) : outputs_(std::move(outputs)) {}
  std::size_t dim() const override { return outputs_.front().size(); }
  std::size_t num_labels() const override { return outputs_.size(); }
  void predict(std::span<const double>, int, int label, std::span<double> out) const override {
    std::copy(outputs_[static_cast<std::size_t>(label)].begin(), outputs_[static_cast<std::size_t>(label)].end(),
              out.begin());
  }

 private:
  std::vector<std::vector<double>> outputs_;
};

}  // namespace testing
