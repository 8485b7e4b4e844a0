#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace shapediff {

// A_c = correct predictions among objects labeled c / objects labeled c.
// Every class in 0..n_classes-1 must have at least one labeled object.
std::vector<double> per_class_accuracy(std::span<const int> preds, std::span<const int> labels,
                                       std::size_t n_classes);

double mean_per_class_accuracy(std::span<const double> per_class);

// counts[label][pred]; predictions must be class ids in range.
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> preds,
                                                       std::span<const int> labels, std::size_t n_classes);

double overall_accuracy(std::span<const int> preds, std::span<const int> labels);

struct EvalReport {
  std::string mode;  // "multiclass" or "binary"
  std::vector<std::string> class_names;
  std::vector<double> per_class;  // A_c
  double mean = 0.0;              // mean of A_c
  std::vector<std::vector<std::size_t>> confusion;  // multiclass only
  std::vector<double> object_seconds;
};

EvalReport make_report(std::string mode, std::vector<std::string> class_names, std::span<const int> preds,
                       std::span<const int> labels, std::vector<double> object_seconds);

// "class,accuracy" rows per class followed by a "mean" row.
std::string report_csv(const EvalReport& report);
nlohmann::json report_json(const EvalReport& report);

}  // namespace shapediff
