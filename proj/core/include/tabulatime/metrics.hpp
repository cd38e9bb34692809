#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabulatime/tensor.hpp"

namespace tabulatime {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Predicted positive iff score >= threshold.
ConfusionCounts confusion_at(const std::vector<int>& labels,
                             const std::vector<double>& scores,
                             double threshold = 0.5);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct ClassificationMetrics {
  ConfusionCounts confusion;
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when no positive predictions
  double recall = 0.0;     // 0 when no positive labels
  double f1 = 0.0;
  // Trapezoidal area over the ROC at every distinct score. Absent when only
  // one class appears; `warning` says so.
  std::optional<double> auc;
  std::vector<RocPoint> roc;
  std::string warning;
};

ClassificationMetrics classification_metrics(const std::vector<int>& labels,
                                             const std::vector<double>& scores,
                                             double threshold = 0.5);

struct ForecastMetrics {
  double mse = 0.0;
  double mae = 0.0;
};

// Elementwise means over all entries; shapes must match exactly.
ForecastMetrics forecast_metrics(const Tensor& predicted, const Tensor& actual);

}  // namespace tabulatime
