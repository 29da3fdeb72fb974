#include "egograph/evaluation.hpp"

#include <algorithm>
#include <string>

#include "egograph/errors.hpp"

namespace egograph::pipeline {

EvaluationReport evaluate(std::span<const int> predicted, std::span<const int> truth, int classes,
                          std::vector<int> eval_classes) {
  if (predicted.size() != truth.size())
    throw ShapeError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(truth.size()) + " truth labels");
  if (classes < 1) throw ParameterError("evaluate: need at least one class");
  if (eval_classes.empty())
    for (int k = 0; k < classes; ++k) eval_classes.push_back(k);
  for (int k : eval_classes)
    if (k < 0 || k >= classes) throw ParameterError("evaluation class " + std::to_string(k) + " out of range");

  EvaluationReport r;
  r.confusion = Eigen::MatrixXi::Zero(classes, classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0) continue;
    if (truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes)
      throw ParameterError("segment " + std::to_string(i) + ": class id out of range");
    ++r.confusion(truth[i], predicted[i]);
  }
  r.total = r.confusion.sum();

  const auto k = static_cast<std::size_t>(classes);
  r.precision.assign(k, 0.0);
  r.recall.assign(k, 0.0);
  r.precision_undefined.assign(k, false);
  r.recall_undefined.assign(k, false);
  for (int c = 0; c < classes; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const int tp = r.confusion(c, c);
    const int predicted_c = r.confusion.col(c).sum();
    const int true_c = r.confusion.row(c).sum();
    if (predicted_c == 0) r.precision_undefined[i] = true;
    else r.precision[i] = static_cast<double>(tp) / predicted_c;
    if (true_c == 0) r.recall_undefined[i] = true;
    else r.recall[i] = static_cast<double>(tp) / true_c;
  }
  for (int c : eval_classes) {
    r.mean_precision += r.precision[static_cast<std::size_t>(c)];
    r.mean_recall += r.recall[static_cast<std::size_t>(c)];
  }
  r.mean_precision /= static_cast<double>(eval_classes.size());
  r.mean_recall /= static_cast<double>(eval_classes.size());
  r.accuracy = r.total > 0 ? static_cast<double>(r.confusion.trace()) / static_cast<double>(r.total) : 0.0;
  r.eval_classes = std::move(eval_classes);
  return r;
}

nlohmann::json to_json(const EvaluationReport& report, const std::vector<std::string>& class_names) {
  nlohmann::json j;
  nlohmann::json per_class = nlohmann::json::array();
  for (int c = 0; c < report.classes(); ++c) {
    const auto i = static_cast<std::size_t>(c);
    nlohmann::json row = {{"class_id", c},
                          {"precision", report.precision[i]},
                          {"recall", report.recall[i]},
                          {"precision_undefined", static_cast<bool>(report.precision_undefined[i])},
                          {"recall_undefined", static_cast<bool>(report.recall_undefined[i])},
                          {"support", report.confusion.row(c).sum()}};
    if (i < class_names.size()) row["name"] = class_names[i];
    per_class.push_back(row);
  }
  nlohmann::json confusion = nlohmann::json::array();
  for (int r = 0; r < report.classes(); ++r) {
    std::vector<int> row(report.confusion.cols());
    for (int c = 0; c < report.classes(); ++c) row[static_cast<std::size_t>(c)] = report.confusion(r, c);
    confusion.push_back(row);
  }
  j["classes"] = per_class;
  j["confusion"] = confusion;
  j["eval_classes"] = report.eval_classes;
  j["mean_precision"] = report.mean_precision;
  j["mean_recall"] = report.mean_recall;
  j["accuracy"] = report.accuracy;
  j["total"] = report.total;
  return j;
}

}  // namespace egograph::pipeline
