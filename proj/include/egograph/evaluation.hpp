#pragma once

// Classification metrics against ground truth.

#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace egograph::pipeline {

struct EvaluationReport {
  /// Row = truth, column = prediction.
  Eigen::MatrixXi confusion;
  std::vector<double> precision;
  std::vector<double> recall;
  /// Set where the denominator was empty; the value is then reported as 0.
  std::vector<bool> precision_undefined;
  std::vector<bool> recall_undefined;
  std::vector<int> eval_classes;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double accuracy = 0.0;
  long total = 0;

  int classes() const { return static_cast<int>(confusion.rows()); }
};

/// Segments whose truth is negative (unlabelled or held out) are skipped.
/// An empty `eval_classes` means every class.
EvaluationReport evaluate(std::span<const int> predicted, std::span<const int> truth, int classes,
                          std::vector<int> eval_classes = {});

nlohmann::json to_json(const EvaluationReport& report, const std::vector<std::string>& class_names = {});

}  // namespace egograph::pipeline
