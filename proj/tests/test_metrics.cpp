#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "shapediff/error.hpp"
#include "shapediff/metrics.hpp"
#include "shapediff/rng.hpp"

using namespace shapediff;

namespace {

// 3 classes, 4 objects each. Class 0: 4/4, class 1: 2/4, class 2: 1/4.
const std::vector<int> kLabels{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
const std::vector<int> kPreds{0, 0, 0, 0, 1, 0, 1, 2, 2, 0, 1, 1};

}  // namespace

TEST_CASE("per-class accuracy basics") {
  CHECK(per_class_accuracy(std::vector<int>{0, 0, 1, 0}, std::vector<int>{0, 0, 0, 0}, 1)[0] == 0.75);
  CHECK(per_class_accuracy(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1}, 2) == std::vector<double>{1.0, 1.0});
  CHECK_THROWS_AS(per_class_accuracy(std::vector<int>{0}, std::vector<int>{0, 1}, 2), ValidationError);
  CHECK_THROWS_AS(per_class_accuracy(std::vector<int>{0, 0}, std::vector<int>{0, 0}, 2), ValidationError);
  CHECK_THROWS_AS(per_class_accuracy(std::vector<int>{0}, std::vector<int>{4}, 2), ValidationError);
}

TEST_CASE("mean per-class accuracy") {
  CHECK(mean_per_class_accuracy(std::vector<double>{1.0, 0.5}) == 0.75);
  CHECK(mean_per_class_accuracy(std::vector<double>{0.315}) == 0.315);
  CHECK_THROWS_AS(mean_per_class_accuracy(std::vector<double>{}), ValidationError);
}

TEST_CASE("documentation values pass through the mean unchanged") {
  // Reported 64x64 multi-view figures for car and chair.
  const std::vector<double> reported{0.648, 0.315};
  CHECK(mean_per_class_accuracy(std::vector<double>{reported[0]}) == 0.648);
  CHECK(mean_per_class_accuracy(reported) == doctest::Approx(0.4815));
}

TEST_CASE("12-object fixture") {
  const auto a = per_class_accuracy(kPreds, kLabels, 3);
  CHECK(a == std::vector<double>{1.0, 0.5, 0.25});
  CHECK(mean_per_class_accuracy(a) == 1.75 / 3.0);
  const auto cm = confusion_matrix(kPreds, kLabels, 3);
  const std::vector<std::vector<std::size_t>> expected{{4, 0, 0}, {1, 2, 1}, {1, 2, 1}};
  CHECK(cm == expected);
  CHECK(overall_accuracy(kPreds, kLabels) == 7.0 / 12.0);
}

TEST_CASE("confusion trace over total equals overall accuracy; rows sum to class counts") {
  Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = 2 + rng.below(4);
    const std::size_t n = k + rng.below(30);
    std::vector<int> labels(n), preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = i < k ? static_cast<int>(i) : static_cast<int>(rng.below(k));
      preds[i] = static_cast<int>(rng.below(k));
    }
    const auto cm = confusion_matrix(preds, labels, k);
    std::size_t trace = 0, total = 0;
    for (std::size_t c = 0; c < k; ++c) {
      trace += cm[c][c];
      const auto row = std::accumulate(cm[c].begin(), cm[c].end(), std::size_t{0});
      CHECK(row == static_cast<std::size_t>(std::count(labels.begin(), labels.end(), static_cast<int>(c))));
      total += row;
    }
    CHECK(static_cast<double>(trace) / static_cast<double>(total) == overall_accuracy(preds, labels));

    // Relabeling classes permutes A_c and leaves the mean unchanged.
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = k - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<int> pl(n), pp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pl[i] = perm[static_cast<std::size_t>(labels[i])];
      pp[i] = perm[static_cast<std::size_t>(preds[i])];
    }
    const auto a = per_class_accuracy(preds, labels, k);
    const auto b = per_class_accuracy(pp, pl, k);
    for (std::size_t c = 0; c < k; ++c) CHECK(b[static_cast<std::size_t>(perm[c])] == a[c]);
    CHECK(mean_per_class_accuracy(b) == doctest::Approx(mean_per_class_accuracy(a)).epsilon(1e-15));
  }
}

TEST_CASE("binary one-vs-rest: A_c ignores predictions for other classes") {
  // -1 marks a rejected object.
  const std::vector<int> labels{0, 0, 1, 1};
  auto a = per_class_accuracy(std::vector<int>{0, -1, 1, 1}, labels, 2);
  auto b = per_class_accuracy(std::vector<int>{0, -1, 1, -1}, labels, 2);
  CHECK(a[0] == b[0]);
  CHECK(a[1] == 1.0);
  CHECK(b[1] == 0.5);
}

TEST_CASE("report csv and json") {
  const auto r = make_report("multiclass", {"slab", "chair", "cross"}, kPreds, kLabels,
                             std::vector<double>(12, 0.5));
  const auto csv = report_csv(r);
  CHECK(csv == "class,accuracy\nslab,1.000000\nchair,0.500000\ncross,0.250000\nmean,0.583333\n");
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  CHECK(rows - 1 == r.class_names.size() + 1);
  const auto j = report_json(r);
  CHECK(j["mode"] == "multiclass");
  CHECK(j["classes"].size() == 3);
  CHECK(j["classes"][1]["accuracy"] == 0.5);
  CHECK(j["mean_accuracy"] == 1.75 / 3.0);
  CHECK(j["confusion"][1][0] == 1);
  CHECK(j["objects"] == 12);
  CHECK(j["total_seconds"] == 6.0);
  CHECK(j["mean_seconds_per_object"] == 0.5);

  const auto bin = make_report("binary", {"a", "b"}, std::vector<int>{0, -1, 1, 1}, std::vector<int>{0, 0, 1, 1}, {});
  CHECK(bin.confusion.empty());
  CHECK(!report_json(bin).contains("confusion"));
  CHECK(bin.mean == 0.75);
}
