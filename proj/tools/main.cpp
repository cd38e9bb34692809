#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabulatime/errors.hpp"
#include "tabulatime/importance.hpp"
#include "tabulatime/io.hpp"
#include "tabulatime/pipeline.hpp"
#include "tabulatime/series.hpp"
#include "tabulatime/synth.hpp"

using namespace tabulatime;

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

std::string metrics_json(const ClassificationMetrics& m) {
  nlohmann::json doc = {
      {"accuracy", m.accuracy},
      {"precision", m.precision},
      {"recall", m.recall},
      {"f1", m.f1},
      {"confusion",
       {{"tp", m.confusion.tp},
        {"fp", m.confusion.fp},
        {"tn", m.confusion.tn},
        {"fn", m.confusion.fn}}},
  };
  if (m.auc) {
    doc["auc"] = *m.auc;
  } else {
    doc["auc"] = nullptr;
  }
  if (!m.warning.empty()) doc["warning"] = m.warning;
  return doc.dump(2);
}

std::string roc_csv(const ClassificationMetrics& m) {
  std::string text = "threshold,fpr,tpr\n";
  for (const auto& point : m.roc) {
    text += format_double(point.threshold) + "," +
            format_double(point.fpr) + "," + format_double(point.tpr) + "\n";
  }
  return text;
}

std::string importance_csv(const ImportanceReport& report) {
  std::string text = "name,baseline,mean_drop,std_drop\n";
  for (const auto& entry : report.entries) {
    text += entry.name + "," + format_double(entry.baseline) + "," +
            format_double(entry.mean_drop) + "," +
            format_double(entry.std_drop) + "\n";
  }
  return text;
}

void print_metrics(const std::string& split, const ClassificationMetrics& m) {
  std::cout << split << ": accuracy " << m.accuracy << ", f1 " << m.f1;
  if (m.auc) std::cout << ", auc " << *m.auc;
  std::cout << '\n';
}

// Rebuilds the trained model around a freshly prepared dataset, taking the
// architecture and transform from the bundle so evaluation matches training.
struct LoadedClassifier {
  RunConfig run;
  ClassificationDataset data;
  Model model;
};

LoadedClassifier load_classifier(const RunConfig& cli_run,
                                 const ModelBundle& bundle) {
  LoadedClassifier loaded;
  loaded.run = run_config_from_json(bundle.config_json);
  loaded.run.events_path = cli_run.events_path;
  loaded.run.environment_path = cli_run.environment_path;
  loaded.run.out_dir = cli_run.out_dir;

  if (loaded.run.model.mode != "series_only") {
    const TabularTransform transform =
        TabularTransform::from_json(bundle.stats_json);
    loaded.data = load_classification(loaded.run, &transform);
  } else {
    loaded.data = load_classification(loaded.run);
  }
  const std::int64_t tab_features =
      loaded.data.tabular.matrix.defined() ? loaded.data.tabular.matrix.dim(1)
                                           : 0;
  loaded.model = Model(loaded.run.model, loaded.data.windows.dim(1),
                       loaded.data.windows.dim(2), tab_features, 0);
  loaded.model.load_parameters(bundle.parameters);
  return loaded;
}

void report_exclusions(const ClassificationDataset& data) {
  std::cout << "aligned " << data.kept_rows.size() << " events";
  if (!data.excluded.empty()) {
    std::cout << ", excluded " << data.excluded.size();
  }
  std::cout << '\n';
  for (const auto& [row, reason] : data.excluded) {
    std::cerr << "excluded event row " << row << ": " << reason << '\n';
  }
}

ModelBundle make_bundle(const RunConfig& run, const Model& model,
                        const std::string& stats_json,
                        const TrainHistory& history) {
  ModelBundle bundle;
  RunConfig saved = run;
  saved.model = model.config();
  bundle.config_json = run_config_to_json(saved);
  bundle.stats_json = stats_json;
  bundle.history_json = history_to_json(history);
  bundle.parameters = model.named_parameters();
  return bundle;
}

int cmd_train(const RunConfig& run) {
  std::filesystem::create_directories(run.out_dir);
  if (run.model.task == "classification") {
    const ClassificationDataset data = load_classification(run);
    report_exclusions(data);
    ClassifierRun trained = train_classifier(run, data);

    const std::string stats = data.transform.fitted()
                                  ? data.transform.to_json()
                                  : std::string("{}");
    save_bundle(make_bundle(run, trained.model, stats, trained.history),
                join_path(run.out_dir, "model.ttmb"));
    write_text(join_path(run.out_dir, "history.json"),
               history_to_json(trained.history));
    nlohmann::json doc = {
        {"val", nlohmann::json::parse(metrics_json(trained.val_metrics))},
        {"test", nlohmann::json::parse(metrics_json(trained.test_metrics))}};
    write_text(join_path(run.out_dir, "metrics.json"), doc.dump(2));

    std::cout << "trained " << trained.history.epochs.size()
              << " epochs (best " << trained.history.best_epoch << ")\n";
    print_metrics("val", trained.val_metrics);
    print_metrics("test", trained.test_metrics);
  } else {
    const EnvTable env = ingest_environment(run.environment_path);
    const ForecastDataset data = prepare_forecast(run, env);
    ForecastRun trained = train_forecaster(run, data);

    save_bundle(make_bundle(run, trained.model, "{}", trained.history),
                join_path(run.out_dir, "model.ttmb"));
    write_text(join_path(run.out_dir, "history.json"),
               history_to_json(trained.history));
    const double improvement =
        1.0 - trained.test_normalized.mse / trained.persistence_normalized.mse;
    nlohmann::json doc = {
        {"normalized_mse", trained.test_normalized.mse},
        {"normalized_mae", trained.test_normalized.mae},
        {"persistence_mse", trained.persistence_normalized.mse},
        {"improvement_over_persistence", improvement}};
    write_text(join_path(run.out_dir, "metrics.json"), doc.dump(2));

    std::cout << "trained " << trained.history.epochs.size()
              << " epochs (best " << trained.history.best_epoch << ")\n";
    std::cout << "test normalized mse " << trained.test_normalized.mse
              << " vs persistence " << trained.persistence_normalized.mse
              << " (" << improvement * 100.0 << "% better)\n";
  }
  std::cout << "wrote " << join_path(run.out_dir, "model.ttmb") << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& cli_run, const std::string& bundle_path) {
  const ModelBundle bundle = load_bundle(bundle_path);
  std::filesystem::create_directories(cli_run.out_dir);
  const RunConfig bundle_run = run_config_from_json(bundle.config_json);
  if (bundle_run.model.task == "classification") {
    LoadedClassifier loaded = load_classifier(cli_run, bundle);
    const ClassificationMetrics metrics = evaluate_classifier(
        loaded.model, loaded.data, loaded.data.split.test);
    write_text(join_path(cli_run.out_dir, "metrics.json"),
               metrics_json(metrics));
    write_text(join_path(cli_run.out_dir, "roc.csv"), roc_csv(metrics));
    print_metrics("test", metrics);
  } else {
    RunConfig run = bundle_run;
    run.environment_path = cli_run.environment_path;
    const EnvTable env = ingest_environment(run.environment_path);
    const ForecastDataset data = prepare_forecast(run, env);
    Model model(run.model, data.windows.dim(1), data.windows.dim(2), 0, 0);
    model.load_parameters(bundle.parameters);
    const Tensor predictions =
        model.forecast(take_rows(data.windows, data.split.test));
    const ForecastMetrics metrics = forecast_metrics(
        predictions, take_rows(data.norm_targets, data.split.test));
    nlohmann::json doc = {{"normalized_mse", metrics.mse},
                          {"normalized_mae", metrics.mae}};
    write_text(join_path(cli_run.out_dir, "metrics.json"), doc.dump(2));
    std::cout << "test normalized mse " << metrics.mse << ", mae "
              << metrics.mae << '\n';
  }
  std::cout << "wrote " << join_path(cli_run.out_dir, "metrics.json") << '\n';
  return 0;
}

// Predicts the horizon following the last complete window in the table and
// emits it in the environment CSV layout.
int cmd_forecast(const RunConfig& cli_run, const std::string& bundle_path) {
  const ModelBundle bundle = load_bundle(bundle_path);
  RunConfig run = run_config_from_json(bundle.config_json);
  if (run.model.task != "forecasting") {
    throw ContractError("bundle was trained for classification");
  }
  run.environment_path = cli_run.environment_path;
  std::filesystem::create_directories(cli_run.out_dir);

  const EnvTable env = ingest_environment(run.environment_path);
  const std::int64_t window = run.window_days * 24;
  if (env.hours() < window) {
    throw DataError("environment table shorter than one window");
  }
  const auto n_channels = static_cast<std::int64_t>(env.channels.size());
  SeriesBatch tail;
  tail.channel_names = env.channels;
  tail.values = Tensor::zeros({1, n_channels, window});
  for (std::int64_t c = 0; c < n_channels; ++c) {
    for (std::int64_t r = 0; r < window; ++r) {
      const double v = env.at(env.hours() - window + r, c);
      if (std::isnan(v)) {
        throw DataError("latest window overlaps a long data gap");
      }
      tail.values.raw()[static_cast<std::size_t>(c * window + r)] = v;
    }
  }

  const SeriesBatch normalized = instance_normalize(tail);
  Model model(run.model, n_channels,
              (window - run.model.patch_size) / run.model.stride + 1, 0, 0);
  model.load_parameters(bundle.parameters);
  const Tensor outputs = model.forecast(
      patch(normalized.values, run.model.patch_size, run.model.stride));
  const Tensor native = denormalize(normalized, outputs);

  std::string csv = "timestamp";
  for (const auto& name : env.channels) csv += "," + name;
  csv += '\n';
  const std::int64_t first = env.first_hour + env.hours();
  for (std::int64_t h = 0; h < run.model.horizon; ++h) {
    csv += format_hour_timestamp(first + h);
    for (std::int64_t c = 0; c < n_channels; ++c) {
      csv += "," + format_double(native.at({0, c, h}));
    }
    csv += '\n';
  }
  const auto path = join_path(cli_run.out_dir, "forecast.csv");
  write_text(path, csv);
  std::cout << "wrote " << path << " (" << run.model.horizon
            << " hours from " << format_hour_timestamp(first) << ")\n";
  return 0;
}

int cmd_importance(const RunConfig& cli_run, const std::string& bundle_path,
                   std::uint64_t seed, int repeats) {
  const ModelBundle bundle = load_bundle(bundle_path);
  const RunConfig bundle_run = run_config_from_json(bundle.config_json);
  if (bundle_run.model.task != "classification") {
    throw ContractError("importance needs a classification bundle");
  }
  std::filesystem::create_directories(cli_run.out_dir);
  LoadedClassifier loaded = load_classifier(cli_run, bundle);
  ClassificationDataset& data = loaded.data;
  const auto& val = data.split.val;
  const std::vector<int> val_labels = take_ints(data.labels, val);

  // Both views score validation accuracy with everything else held fixed.
  const Tensor val_windows = take_rows(data.windows, val);
  const auto tab_metric = [&](const Tensor& matrix) {
    const Tensor probs = softmax_rows(
        loaded.model.class_logits(val_windows, take_rows(matrix, val)));
    std::vector<double> scores;
    for (std::size_t r = 0; r < val.size(); ++r) {
      scores.push_back(probs.data()[2 * r + 1]);
    }
    return classification_metrics(val_labels, scores).accuracy;
  };
  const Tensor val_tab = data.tabular.matrix.defined()
                             ? take_rows(data.tabular.matrix, val)
                             : Tensor();
  const auto step_metric = [&](const Tensor& windows) {
    const Tensor probs = softmax_rows(
        loaded.model.class_logits(take_rows(windows, val), val_tab));
    std::vector<double> scores;
    for (std::size_t r = 0; r < val.size(); ++r) {
      scores.push_back(probs.data()[2 * r + 1]);
    }
    return classification_metrics(val_labels, scores).accuracy;
  };

  if (loaded.run.model.mode != "series_only") {
    const ImportanceReport features = permutation_importance(
        tab_metric, data.tabular.matrix, feature_groups(data.tabular),
        repeats, seed, true, "accuracy");
    const auto path = join_path(cli_run.out_dir, "feature_importance.csv");
    write_text(path, importance_csv(features));
    std::cout << "wrote " << path << " (top: "
              << (features.entries.empty() ? "-" : features.entries[0].name)
              << ")\n";
  }
  if (loaded.run.model.mode != "tabular_only") {
    const ImportanceReport steps = step_importance(
        step_metric, data.windows, repeats, seed, true, "accuracy");
    const auto path = join_path(cli_run.out_dir, "step_importance.csv");
    write_text(path, importance_csv(steps));
    std::cout << "wrote " << path << " (top: "
              << (steps.entries.empty() ? "-" : steps.entries[0].name)
              << ")\n";
  }
  return 0;
}

int cmd_sensitivity(const RunConfig& base) {
  std::filesystem::create_directories(base.out_dir);
  std::string csv = "method,accuracy,f1,auc\n";
  for (const std::string method : {"mean", "knn", "mice"}) {
    RunConfig run = base;
    run.imputation.method = method;
    const ClassificationDataset data = load_classification(run);
    ClassifierRun trained = train_classifier(run, data);
    const auto& m = trained.test_metrics;
    csv += method + "," + format_double(m.accuracy) + "," +
           format_double(m.f1) + "," +
           (m.auc ? format_double(*m.auc) : std::string("")) + "\n";
    std::cout << method << ": accuracy " << m.accuracy << ", f1 " << m.f1
              << '\n';
  }
  const auto path = join_path(base.out_dir, "imputation_sensitivity.csv");
  write_text(path, csv);
  std::cout << "wrote " << path << '\n';
  return 0;
}

struct SynthOptions {
  std::string task = "classification";
  std::uint64_t seed = 7;
  std::int64_t events = 800;
  double missing_rate = 0.0;
  std::int64_t hours = 4000;
  std::int64_t window_days = 10;
  std::string out_dir = ".";
  // Emitted run.json knobs so small experiments need no hand editing.
  std::int64_t embed_dim = 128;
  int layers = 4;
  int heads = 4;
  int max_epochs = 100;
  int patience = 10;
  std::int64_t batch_size = 16;
};

int cmd_synth(const SynthOptions& opt) {
  std::filesystem::create_directories(opt.out_dir);
  SynthDataset dataset;
  if (opt.task == "classification") {
    ClassificationSynthConfig config;
    config.events = opt.events;
    config.seed = opt.seed;
    config.missing_rate = opt.missing_rate;
    config.window_days = opt.window_days;
    dataset = synth_classification(config);
  } else if (opt.task == "forecasting") {
    ForecastSynthConfig config;
    config.hours = opt.hours;
    config.seed = opt.seed;
    dataset = synth_forecast(config);
    dataset.run.window_days = opt.window_days;
  } else {
    throw ContractError("unknown synth task '" + opt.task + "'");
  }

  RunConfig run = dataset.run;
  run.model.embed_dim = opt.embed_dim;
  run.model.layers = opt.layers;
  run.model.heads = opt.heads;
  run.train.max_epochs = opt.max_epochs;
  run.train.patience = opt.patience;
  run.train.batch_size = opt.batch_size;
  run.train.seed = opt.seed;
  run.out_dir = opt.out_dir;

  if (!dataset.events_csv.empty()) {
    run.events_path = join_path(opt.out_dir, "events.csv");
    write_text(run.events_path, dataset.events_csv);
    std::cout << "wrote " << run.events_path << '\n';
  }
  run.environment_path = join_path(opt.out_dir, "environment.csv");
  write_text(run.environment_path, dataset.environment_csv);
  std::cout << "wrote " << run.environment_path << '\n';

  const auto config_path = join_path(opt.out_dir, "run.json");
  save_run_config(run, config_path);
  std::cout << "wrote " << config_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal clinical time-series modeling"};
  app.require_subcommand(1);

  std::string config_path, bundle_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  int repeats = 5;
  std::int64_t window_days = 0;

  auto add_common = [&](CLI::App* cmd, bool with_bundle) {
    cmd->add_option("--config", config_path, "run configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);
    if (with_bundle) {
      cmd->add_option("--bundle", bundle_path, "trained model bundle")
          ->required()
          ->check(CLI::ExistingFile);
    }
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the configured seed");
  };

  auto* train = app.add_subcommand("train", "fit a model and save a bundle");
  add_common(train, false);
  train->add_option("--window-days", window_days,
                    "override the configured window length");

  auto* evaluate =
      app.add_subcommand("evaluate", "score a saved bundle on the test split");
  add_common(evaluate, true);

  auto* forecast = app.add_subcommand(
      "forecast", "predict the horizon after the latest window");
  add_common(forecast, true);

  auto* importance = app.add_subcommand(
      "importance", "permutation importance for features and days");
  add_common(importance, true);
  importance->add_option("--repeats", repeats, "shuffles per group")
      ->check(CLI::PositiveNumber);

  auto* sensitivity = app.add_subcommand(
      "sensitivity-imputation",
      "train and score under mean, knn and mice imputation");
  add_common(sensitivity, false);

  SynthOptions synth_options;
  auto* synth =
      app.add_subcommand("synth", "generate a synthetic dataset + run config");
  synth->add_option("--task", synth_options.task,
                    "classification or forecasting");
  synth->add_option("--seed", synth_options.seed, "generator seed");
  synth->add_option("--events", synth_options.events, "classification events");
  synth->add_option("--missing-rate", synth_options.missing_rate,
                    "MCAR rate over clinical numeric cells");
  synth->add_option("--hours", synth_options.hours, "forecasting table length");
  synth->add_option("--window-days", synth_options.window_days,
                    "window length in days");
  synth->add_option("--out", synth_options.out_dir, "output directory");
  synth->add_option("--embed-dim", synth_options.embed_dim,
                    "emitted config: embedding width");
  synth->add_option("--layers", synth_options.layers,
                    "emitted config: encoder blocks");
  synth->add_option("--heads", synth_options.heads,
                    "emitted config: attention heads");
  synth->add_option("--max-epochs", synth_options.max_epochs,
                    "emitted config: epoch cap");
  synth->add_option("--patience", synth_options.patience,
                    "emitted config: early-stopping patience");
  synth->add_option("--batch-size", synth_options.batch_size,
                    "emitted config: minibatch size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(synth_options);

    CLI::App* active = app.get_subcommands().at(0);
    RunConfig run = load_run_config(config_path);
    if (active->count("--seed") > 0) run.train.seed = seed;
    if (!out_dir.empty()) run.out_dir = out_dir;
    if (train->count("--window-days") > 0) run.window_days = window_days;

    if (*train) return cmd_train(run);
    if (*evaluate) return cmd_evaluate(run, bundle_path);
    if (*forecast) return cmd_forecast(run, bundle_path);
    if (*importance) {
      return cmd_importance(run, bundle_path, run.train.seed, repeats);
    }
    if (*sensitivity) return cmd_sensitivity(run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
