#ifndef AMTL_METRICS_HPP
#define AMTL_METRICS_HPP

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "amtl/data.hpp"
#include "amtl/model.hpp"

namespace amtl {

struct MetricsReport {
  double task1a_f1 = 0;
  double task1a_accuracy = 0;
  double task1b_rmse = 0;
  double task2_rmse = 0;
  std::string split;
};

// F1/accuracy for the humor classification (positive class = humor,
// threshold 0.5) and RMSE for the two regressions on clamped predictions.
// Missing regression labels participate as 0, mirroring training.
inline MetricsReport compute_metrics(const std::vector<Prediction>& preds, const std::vector<Sample>& samples,
                                     const std::string& split) {
  if (preds.size() != samples.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(preds.size()) + " predictions for " +
                                std::to_string(samples.size()) + " samples");
  }
  if (samples.empty()) throw std::invalid_argument("compute_metrics: empty dataset");
  for (const Sample& s : samples) {
    if (!s.labeled) throw std::invalid_argument("compute_metrics: dataset has no labels");
  }
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  double se_1b = 0, se_2 = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int truth = samples[i].is_humor == 1 ? 1 : 0;
    const int guess = preds[i].task1a_label();
    if (guess == truth) ++correct;
    if (guess == 1 && truth == 1) ++tp;
    if (guess == 1 && truth == 0) ++fp;
    if (guess == 0 && truth == 1) ++fn;
    const double d1 = preds[i].task1b - samples[i].humor_rating;
    const double d2 = preds[i].task2 - samples[i].offense;
    se_1b += d1 * d1;
    se_2 += d2 * d2;
  }
  MetricsReport r;
  r.split = split;
  const double n = static_cast<double>(samples.size());
  r.task1a_accuracy = static_cast<double>(correct) / n;
  const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.task1a_f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  r.task1b_rmse = std::sqrt(se_1b / n);
  r.task2_rmse = std::sqrt(se_2 / n);
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  return nlohmann::json{{"task1a_f1", r.task1a_f1},
                        {"task1a_accuracy", r.task1a_accuracy},
                        {"task1b_rmse", r.task1b_rmse},
                        {"task2_rmse", r.task2_rmse},
                        {"split", r.split}};
}

}  // namespace amtl

#endif  // AMTL_METRICS_HPP
