#include "tabulatime/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tabulatime/errors.hpp"
#include "tabulatime/rand.hpp"
#include "tabulatime/series.hpp"

namespace tabulatime {

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ",";
    out += p;
  }
  return out;
}

}  // namespace

Tensor take_rows(const Tensor& values, std::span<const std::int64_t> rows) {
  if (values.rank() < 1) {
    throw DimensionError("take_rows: values must have a leading axis");
  }
  Shape shape = values.shape();
  const std::int64_t total = shape[0];
  std::int64_t block = 1;
  for (int axis = 1; axis < values.rank(); ++axis) block *= shape[axis];
  shape[0] = static_cast<std::int64_t>(rows.size());

  std::vector<double> out;
  out.reserve(rows.size() * static_cast<std::size_t>(block));
  const auto& in = values.data();
  for (const std::int64_t r : rows) {
    if (r < 0 || r >= total) {
      throw ContractError("take_rows: row " + std::to_string(r) +
                          " outside 0.." + std::to_string(total - 1));
    }
    const auto begin = in.begin() + static_cast<std::ptrdiff_t>(r * block);
    out.insert(out.end(), begin, begin + static_cast<std::ptrdiff_t>(block));
  }
  return Tensor(shape, std::move(out));
}

std::vector<int> take_ints(const std::vector<int>& values,
                           std::span<const std::int64_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const std::int64_t r : rows) {
    if (r < 0 || r >= static_cast<std::int64_t>(values.size())) {
      throw ContractError("take_ints: row " + std::to_string(r) +
                          " outside 0.." + std::to_string(values.size() - 1));
    }
    out.push_back(values[static_cast<std::size_t>(r)]);
  }
  return out;
}

ClassificationDataset prepare_classification(const RunConfig& run,
                                             const EventTable& events,
                                             const EnvTable& env,
                                             const TabularTransform* frozen) {
  if (run.model.task != "classification") {
    throw ContractError("prepare_classification: task is '" + run.model.task +
                        "'");
  }
  if (!run.channels.empty() && env.channels != run.channels) {
    throw DataError("environment channels (" + join(env.channels) +
                    ") do not match the configured channels (" +
                    join(run.channels) + ")");
  }

  AlignedData aligned = align_windows(events, env, run.window_days);
  if (aligned.kept.empty()) {
    throw DataError("no usable events: every window was excluded");
  }
  if (aligned.labels.empty()) {
    throw DataError("classification needs labeled events");
  }

  ClassificationDataset data;
  data.labels = aligned.labels;
  data.kept_rows = aligned.kept;
  data.excluded = std::move(aligned.excluded);
  data.channel_names = env.channels;

  const SeriesBatch normalized = instance_normalize(aligned.series);
  data.windows = patch(normalized.values, run.model.patch_size,
                       run.model.stride);

  const auto n_rows = static_cast<std::int64_t>(data.kept_rows.size());
  std::vector<double> keys;
  if (run.train.temporal_split) {
    keys.reserve(data.kept_rows.size());
    for (const std::int64_t row : data.kept_rows) {
      keys.push_back(static_cast<double>(
          events.admissions[static_cast<std::size_t>(row)]));
    }
  }
  data.split = split_dataset(n_rows, run.train,
                             run.train.temporal_split ? &keys : nullptr);

  if (run.model.mode != "series_only") {
    const TabularData base =
        with_summary_columns(events.features, data.kept_rows,
                             aligned.summary_names, aligned.summary);
    if (frozen) {
      data.transform = *frozen;
    } else {
      data.transform.fit(base.select_rows(data.split.train), run.imputation);
    }
    data.tabular = data.transform.transform(base);
  }
  return data;
}

ClassificationDataset load_classification(const RunConfig& run,
                                          const TabularTransform* frozen) {
  const EnvTable env = ingest_environment(run.environment_path);
  const EventTable events =
      load_events(run.events_path, run.schema, run.label_column);
  return prepare_classification(run, events, env, frozen);
}

std::vector<double> class_scores(Model& model,
                                 const ClassificationDataset& data,
                                 std::span<const std::int64_t> rows) {
  if (model.config().classes != 2) {
    throw ContractError("class_scores: binary scoring needs 2 classes, got " +
                        std::to_string(model.config().classes));
  }
  const Tensor windows = take_rows(data.windows, rows);
  const Tensor tab = data.tabular.matrix.defined()
                         ? take_rows(data.tabular.matrix, rows)
                         : Tensor();
  const Tensor probs = softmax_rows(model.class_logits(windows, tab));
  std::vector<double> scores;
  scores.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    scores.push_back(probs.data()[2 * r + 1]);
  }
  return scores;
}

ClassificationMetrics evaluate_classifier(Model& model,
                                          const ClassificationDataset& data,
                                          std::span<const std::int64_t> rows) {
  return classification_metrics(take_ints(data.labels, rows),
                                class_scores(model, data, rows));
}

ClassifierRun train_classifier(const RunConfig& run,
                               const ClassificationDataset& data) {
  ModelConfig mc = run.model;
  const bool uses_tabular = mc.mode != "series_only";
  mc.tabular_dim = uses_tabular ? data.tabular.matrix.dim(1) : 0;

  ClassifierRun result;
  result.model = Model(mc, data.windows.dim(1), data.windows.dim(2),
                       mc.tabular_dim, run.train.seed);
  Model& model = result.model;

  std::mt19937_64 dropout_rng(derive_seed(run.train.seed, "dropout"));
  std::mt19937_64* drop = mc.dropout > 0.0 ? &dropout_rng : nullptr;

  const auto batch_loss = [&](std::span<const std::int64_t> local) {
    std::vector<std::int64_t> global;
    global.reserve(local.size());
    for (const std::int64_t i : local) {
      global.push_back(data.split.train[static_cast<std::size_t>(i)]);
    }
    const Tensor windows = take_rows(data.windows, global);
    const Tensor tab = uses_tabular ? take_rows(data.tabular.matrix, global)
                                    : Tensor();
    return cross_entropy_with_logits(model.class_logits(windows, tab, drop),
                                     take_ints(data.labels, global));
  };
  const auto val_loss = [&]() {
    const Tensor windows = take_rows(data.windows, data.split.val);
    const Tensor tab = uses_tabular
                           ? take_rows(data.tabular.matrix, data.split.val)
                           : Tensor();
    return cross_entropy_with_logits(
               model.class_logits(windows, tab),
               take_ints(data.labels, data.split.val))
        .item();
  };

  result.history =
      fit(model.parameters(),
          static_cast<std::int64_t>(data.split.train.size()), batch_loss,
          val_loss, run.train);
  result.val_metrics = evaluate_classifier(model, data, data.split.val);
  result.test_metrics = evaluate_classifier(model, data, data.split.test);
  return result;
}

ForecastDataset prepare_forecast(const RunConfig& run, const EnvTable& env,
                                 std::int64_t slide_stride) {
  if (run.model.task != "forecasting") {
    throw ContractError("prepare_forecast: task is '" + run.model.task + "'");
  }
  if (!run.channels.empty() && env.channels != run.channels) {
    throw DataError("environment channels (" + join(env.channels) +
                    ") do not match the configured channels (" +
                    join(run.channels) + ")");
  }

  ForecastDataset data;
  data.raw = forecast_windows(env, run.window_days * 24, run.model.horizon,
                              slide_stride);
  const auto examples = static_cast<std::int64_t>(data.raw.starts.size());
  if (examples == 0) {
    throw DataError("environment table too short for any forecast window");
  }
  data.normalized = instance_normalize(data.raw.context);
  data.windows = patch(data.normalized.values, run.model.patch_size,
                       run.model.stride);
  data.norm_targets = normalize_like(data.normalized, data.raw.targets);

  std::vector<double> keys;
  if (run.train.temporal_split) {
    keys.reserve(data.raw.starts.size());
    for (const std::int64_t s : data.raw.starts) {
      keys.push_back(static_cast<double>(s));
    }
  }
  data.split = split_dataset(examples, run.train,
                             run.train.temporal_split ? &keys : nullptr);
  return data;
}

ForecastRun train_forecaster(const RunConfig& run,
                             const ForecastDataset& data) {
  ModelConfig mc = run.model;
  ForecastRun result;
  result.model = Model(mc, data.windows.dim(1), data.windows.dim(2), 0,
                       run.train.seed);
  Model& model = result.model;

  std::mt19937_64 dropout_rng(derive_seed(run.train.seed, "dropout"));
  std::mt19937_64* drop = mc.dropout > 0.0 ? &dropout_rng : nullptr;

  const auto mse_loss = [&](const Tensor& windows, const Tensor& targets,
                            std::mt19937_64* rng) {
    const Tensor diff = sub(model.forecast(windows, rng), targets);
    return mean_all(mul(diff, diff));
  };
  const auto batch_loss = [&](std::span<const std::int64_t> local) {
    std::vector<std::int64_t> global;
    global.reserve(local.size());
    for (const std::int64_t i : local) {
      global.push_back(data.split.train[static_cast<std::size_t>(i)]);
    }
    return mse_loss(take_rows(data.windows, global),
                    take_rows(data.norm_targets, global), drop);
  };
  const auto val_loss = [&]() {
    return mse_loss(take_rows(data.windows, data.split.val),
                    take_rows(data.norm_targets, data.split.val), nullptr)
        .item();
  };

  result.history =
      fit(model.parameters(),
          static_cast<std::int64_t>(data.split.train.size()), batch_loss,
          val_loss, run.train);

  const auto& test = data.split.test;
  const Tensor test_targets = take_rows(data.norm_targets, test);
  const Tensor predictions =
      model.forecast(take_rows(data.windows, test));
  result.test_normalized = forecast_metrics(predictions, test_targets);

  // Repeat-last baseline on the same normalized scale.
  const auto n_channels = data.windows.dim(1);
  const auto horizon = run.model.horizon;
  const auto window = data.normalized.values.dim(2);
  Tensor baseline = Tensor::zeros(
      {static_cast<std::int64_t>(test.size()), n_channels, horizon});
  for (std::size_t r = 0; r < test.size(); ++r) {
    for (std::int64_t n = 0; n < n_channels; ++n) {
      const double last =
          data.normalized.values.at({test[r], n, window - 1});
      for (std::int64_t h = 0; h < horizon; ++h) {
        baseline.raw()[(r * static_cast<std::size_t>(n_channels) +
                        static_cast<std::size_t>(n)) *
                           static_cast<std::size_t>(horizon) +
                       static_cast<std::size_t>(h)] = last;
      }
    }
  }
  result.persistence_normalized = forecast_metrics(baseline, test_targets);

  SeriesBatch test_batch;
  test_batch.values = take_rows(data.normalized.values, test);
  test_batch.channel_names = data.normalized.channel_names;
  for (const std::int64_t r : test) {
    for (std::int64_t n = 0; n < n_channels; ++n) {
      const auto s = static_cast<std::size_t>(r * n_channels + n);
      test_batch.norm_mean.push_back(data.normalized.norm_mean[s]);
      test_batch.norm_std.push_back(data.normalized.norm_std[s]);
    }
  }
  result.test_predictions = denormalize(test_batch, predictions);
  return result;
}

}  // namespace tabulatime
