#include "tabulatime/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tabulatime/errors.hpp"

namespace tabulatime {

namespace {

void check_pairs(const std::vector<int>& labels,
                 const std::vector<double>& scores) {
  if (labels.size() != scores.size()) {
    throw DimensionError("metrics: " + std::to_string(labels.size()) +
                         " labels vs " + std::to_string(scores.size()) +
                         " scores");
  }
  if (labels.empty()) throw DataError("metrics: no samples");
  for (int y : labels) {
    if (y != 0 && y != 1) {
      throw ContractError("metrics: labels must be 0/1, got " +
                          std::to_string(y));
    }
  }
}

}  // namespace

ConfusionCounts confusion_at(const std::vector<int>& labels,
                             const std::vector<double>& scores,
                             double threshold) {
  check_pairs(labels, scores);
  ConfusionCounts counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? counts.tp : counts.fn) += 1;
    } else {
      (predicted ? counts.fp : counts.tn) += 1;
    }
  }
  return counts;
}

ClassificationMetrics classification_metrics(const std::vector<int>& labels,
                                             const std::vector<double>& scores,
                                             double threshold) {
  ClassificationMetrics out;
  out.confusion = confusion_at(labels, scores, threshold);
  const auto& c = out.confusion;
  const double total = static_cast<double>(c.tp + c.fp + c.tn + c.fn);
  out.accuracy = static_cast<double>(c.tp + c.tn) / total;
  out.precision =
      (c.tp + c.fp) > 0
          ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
          : 0.0;
  out.recall =
      (c.tp + c.fn) > 0
          ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
          : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall /
                     (out.precision + out.recall)
               : 0.0;

  const auto positives = static_cast<double>(c.tp + c.fn);
  const auto negatives = static_cast<double>(c.fp + c.tn);
  if (positives == 0.0 || negatives == 0.0) {
    out.warning = "AUC undefined: only one class present";
    return out;
  }

  // Sweep thresholds at each distinct score, descending. Ties move both
  // counts at once, which the trapezoid then credits at half weight.
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) {
              return scores[a] > scores[b];
            });
  out.roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double auc = 0.0;
  std::int64_t tp = 0, fp = 0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double score = scores[order[i]];
    while (i < order.size() && scores[order[i]] == score) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / positives;
    const double fpr = static_cast<double>(fp) / negatives;
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    out.roc.push_back({score, fpr, tpr});
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  out.auc = auc;
  return out;
}

ForecastMetrics forecast_metrics(const Tensor& predicted,
                                 const Tensor& actual) {
  if (predicted.shape() != actual.shape()) {
    throw DimensionError("forecast_metrics: " + shape_str(predicted.shape()) +
                         " vs " + shape_str(actual.shape()));
  }
  if (predicted.size() == 0) throw DataError("forecast_metrics: no values");
  ForecastMetrics out;
  for (std::size_t f = 0; f < predicted.data().size(); ++f) {
    const double d = predicted.data()[f] - actual.data()[f];
    out.mse += d * d;
    out.mae += std::fabs(d);
  }
  const auto n = static_cast<double>(predicted.size());
  out.mse /= n;
  out.mae /= n;
  return out;
}

}  // namespace tabulatime
