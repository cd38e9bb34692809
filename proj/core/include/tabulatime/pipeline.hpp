#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tabulatime/config.hpp"
#include "tabulatime/io.hpp"
#include "tabulatime/metrics.hpp"
#include "tabulatime/model.hpp"
#include "tabulatime/tabular.hpp"
#include "tabulatime/training.hpp"

namespace tabulatime {

// Untracked first-axis gather for assembling minibatches and splits.
Tensor take_rows(const Tensor& values, std::span<const std::int64_t> rows);
std::vector<int> take_ints(const std::vector<int>& values,
                           std::span<const std::int64_t> rows);

// A classification dataset ready for the model: windows normalized per
// instance and patched; clinical features extended with window summaries,
// then imputed/encoded/standardized with statistics frozen on the training
// split (or on a transform carried in from a saved run).
struct ClassificationDataset {
  Tensor windows;          // (B, N, T, P)
  EncodedTabular tabular;  // matrix (B, F); unused in series_only mode
  std::vector<int> labels;
  SplitIndices split;
  TabularTransform transform;
  std::vector<std::string> channel_names;
  std::vector<std::int64_t> kept_rows;  // event-file row per dataset row
  std::vector<std::pair<std::int64_t, std::string>> excluded;
};

ClassificationDataset prepare_classification(
    const RunConfig& run, const EventTable& events, const EnvTable& env,
    const TabularTransform* frozen = nullptr);
// Same, ingesting the files named by the run config.
ClassificationDataset load_classification(const RunConfig& run,
                                          const TabularTransform* frozen =
                                              nullptr);

// Positive-class probabilities for the given dataset rows (binary only).
std::vector<double> class_scores(Model& model,
                                 const ClassificationDataset& data,
                                 std::span<const std::int64_t> rows);
ClassificationMetrics evaluate_classifier(Model& model,
                                          const ClassificationDataset& data,
                                          std::span<const std::int64_t> rows);

struct ClassifierRun {
  Model model;
  TrainHistory history;
  ClassificationMetrics val_metrics;
  ClassificationMetrics test_metrics;
};
// Builds the model from run.model (geometry comes from the dataset) and
// trains with early stopping on the validation split.
ClassifierRun train_classifier(const RunConfig& run,
                               const ClassificationDataset& data);

// Forecasting: sliding windows over the environment table; the model learns
// on the per-window normalized scale.
struct ForecastDataset {
  ForecastData raw;        // native-unit context and targets
  SeriesBatch normalized;  // context after per-window normalization
  Tensor windows;          // (B, N, T, P)
  Tensor norm_targets;     // (B, N, H), normalized with the context stats
  SplitIndices split;
};
ForecastDataset prepare_forecast(const RunConfig& run, const EnvTable& env,
                                 std::int64_t slide_stride = 24);

struct ForecastRun {
  Model model;
  TrainHistory history;
  ForecastMetrics test_normalized;         // model error, normalized scale
  ForecastMetrics persistence_normalized;  // repeat-last baseline, same rows
  Tensor test_predictions;                 // native units, split.test order
};
ForecastRun train_forecaster(const RunConfig& run,
                             const ForecastDataset& data);

}  // namespace tabulatime
