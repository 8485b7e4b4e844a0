#include "shapediff/metrics.hpp"

#include <cstdio>
#include <numeric>

#include "shapediff/error.hpp"

namespace shapediff {

namespace {

void check_lengths(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw ValidationError("metrics: " + std::to_string(preds.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

std::vector<double> per_class_accuracy(std::span<const int> preds, std::span<const int> labels,
                                       std::size_t n_classes) {
  check_lengths(preds, labels);
  std::vector<std::size_t> total(n_classes, 0), correct(n_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= n_classes) {
      throw ValidationError("metrics: label " + std::to_string(c) + " out of range");
    }
    ++total[static_cast<std::size_t>(c)];
    if (preds[i] == c) ++correct[static_cast<std::size_t>(c)];
  }
  std::vector<double> acc(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (total[c] == 0) throw ValidationError("metrics: class " + std::to_string(c) + " has no labeled objects");
    acc[c] = static_cast<double>(correct[c]) / static_cast<double>(total[c]);
  }
  return acc;
}

double mean_per_class_accuracy(std::span<const double> per_class) {
  if (per_class.empty()) throw ValidationError("metrics: no classes to average");
  return std::accumulate(per_class.begin(), per_class.end(), 0.0) / static_cast<double>(per_class.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> preds, std::span<const int> labels,
                                                       std::size_t n_classes) {
  check_lengths(preds, labels);
  std::vector<std::vector<std::size_t>> m(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i], p = preds[i];
    if (l < 0 || p < 0 || static_cast<std::size_t>(l) >= n_classes || static_cast<std::size_t>(p) >= n_classes) {
      throw ValidationError("metrics: class id out of range in confusion matrix");
    }
    ++m[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)];
  }
  return m;
}

double overall_accuracy(std::span<const int> preds, std::span<const int> labels) {
  check_lengths(preds, labels);
  if (labels.empty()) throw ValidationError("metrics: no objects");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

EvalReport make_report(std::string mode, std::vector<std::string> class_names, std::span<const int> preds,
                       std::span<const int> labels, std::vector<double> object_seconds) {
  EvalReport r;
  r.mode = std::move(mode);
  r.class_names = std::move(class_names);
  r.per_class = per_class_accuracy(preds, labels, r.class_names.size());
  r.mean = mean_per_class_accuracy(r.per_class);
  if (r.mode == "multiclass") r.confusion = confusion_matrix(preds, labels, r.class_names.size());
  r.object_seconds = std::move(object_seconds);
  return r;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "class,accuracy\n";
  char buf[64];
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    std::snprintf(buf, sizeof buf, ",%.6f\n", report.per_class[c]);
    out += report.class_names[c] + buf;
  }
  std::snprintf(buf, sizeof buf, "mean,%.6f\n", report.mean);
  out += buf;
  return out;
}

nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json j;
  j["mode"] = report.mode;
  j["classes"] = nlohmann::json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    j["classes"].push_back({{"class", report.class_names[c]}, {"accuracy", report.per_class[c]}});
  }
  j["mean_accuracy"] = report.mean;
  if (!report.confusion.empty()) j["confusion"] = report.confusion;
  double total = 0.0;
  for (double s : report.object_seconds) total += s;
  j["objects"] = report.object_seconds.size();
  j["total_seconds"] = total;
  j["mean_seconds_per_object"] =
      report.object_seconds.empty() ? 0.0 : total / static_cast<double>(report.object_seconds.size());
  return j;
}

}  // namespace shapediff
