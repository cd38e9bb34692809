#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "tabulatime/errors.hpp"
#include "tabulatime/pipeline.hpp"
#include "tabulatime/synth.hpp"

using namespace tabulatime;

namespace {

std::filesystem::path temp_dir() {
  const auto dir =
      std::filesystem::temp_directory_path() / "tabulatime_pipeline_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = temp_dir() / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path.string();
}

// Small synthetic classification run written to disk, with a model sized for
// test speed.
RunConfig tiny_classification_run() {
  ClassificationSynthConfig synth;
  synth.events = 60;
  synth.window_days = 2;
  synth.seed = 21;
  const SynthDataset data = synth_classification(synth);

  RunConfig run = data.run;
  run.events_path = write_file("cls_events.csv", data.events_csv);
  run.environment_path = write_file("cls_env.csv", data.environment_csv);
  run.model.layers = 1;
  run.model.embed_dim = 8;
  run.model.heads = 2;
  run.model.head_hidden = 16;
  run.train.max_epochs = 3;
  run.train.batch_size = 16;
  run.train.seed = 5;
  return run;
}

}  // namespace

TEST_CASE("take_rows gathers leading-axis blocks") {
  const Tensor t({3, 2, 2},
                 {0, 1, 2, 3, 10, 11, 12, 13, 20, 21, 22, 23});
  const std::vector<std::int64_t> rows = {2, 0, 2};
  const Tensor picked = take_rows(t, rows);
  REQUIRE(picked.shape() == Shape{3, 2, 2});
  CHECK(picked.at({0, 0, 0}) == 20.0);
  CHECK(picked.at({1, 1, 1}) == 3.0);
  CHECK(picked.at({2, 0, 1}) == 21.0);

  const std::vector<std::int64_t> none = {};
  CHECK(take_rows(t, none).dim(0) == 0);
  const std::vector<std::int64_t> bad = {3};
  CHECK_THROWS_AS(take_rows(t, bad), ContractError);

  CHECK(take_ints({7, 8, 9}, rows) == std::vector<int>{9, 7, 9});
  CHECK_THROWS_AS(take_ints({1}, bad), ContractError);
}

TEST_CASE("classification data prepares end to end from files") {
  const RunConfig run = tiny_classification_run();
  const ClassificationDataset data = load_classification(run);

  // 60 events, 2-day windows tiling the table: nothing excluded.
  CHECK(data.excluded.empty());
  REQUIRE(data.windows.shape() == Shape{60, 5, 2, 24});
  CHECK(data.labels.size() == 60);
  CHECK(data.channel_names ==
        std::vector<std::string>{"PM10", "NO", "NO2", "NOx", "Temp"});

  // Clinical columns (4 numeric + Sex one-hot) plus two summaries per channel.
  REQUIRE(data.tabular.matrix.defined());
  CHECK(data.tabular.matrix.dim(0) == 60);
  CHECK(data.tabular.matrix.dim(1) == 4 + 2 + 10);
  CHECK(data.transform.fitted());

  // 60 -> 43 train / 5 val / 12 test, temporally ordered.
  CHECK(data.split.train.size() == 43);
  CHECK(data.split.val.size() == 5);
  CHECK(data.split.test.size() == 12);
  std::int64_t train_max = 0;
  for (const auto r : data.split.train) train_max = std::max(train_max, r);
  std::int64_t test_min = 60;
  for (const auto r : data.split.test) test_min = std::min(test_min, r);
  CHECK(train_max < test_min);

  // A frozen transform is reused verbatim instead of refitting.
  const ClassificationDataset again =
      load_classification(run, &data.transform);
  CHECK(again.tabular.matrix.data() == data.tabular.matrix.data());

  RunConfig renamed = run;
  renamed.channels = {"PM10", "NO"};
  CHECK_THROWS_AS(load_classification(renamed), DataError);
}

TEST_CASE("a tiny classifier trains, evaluates and scores") {
  const RunConfig run = tiny_classification_run();
  const ClassificationDataset data = load_classification(run);
  ClassifierRun trained = train_classifier(run, data);

  CHECK(trained.history.epochs.size() == 3);
  CHECK(trained.history.best_epoch >= 1);
  for (const auto& epoch : trained.history.epochs) {
    CHECK(std::isfinite(epoch.train_loss));
    CHECK(std::isfinite(epoch.val_loss));
  }

  const auto scores =
      class_scores(trained.model, data, data.split.test);
  REQUIRE(scores.size() == 12);
  for (const double s : scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  CHECK(trained.test_metrics.confusion.tp + trained.test_metrics.confusion.fp +
            trained.test_metrics.confusion.tn +
            trained.test_metrics.confusion.fn ==
        12);
  CHECK(std::isfinite(trained.val_metrics.accuracy));

  // Training is reproducible from the seed.
  ClassifierRun again = train_classifier(run, data);
  CHECK(again.history.epochs.back().train_loss ==
        trained.history.epochs.back().train_loss);
  CHECK(again.test_metrics.accuracy == trained.test_metrics.accuracy);
}

TEST_CASE("forecast data prepares and a tiny forecaster trains") {
  ForecastSynthConfig synth;
  synth.hours = 400;
  synth.channels = 2;
  synth.seed = 31;
  const SynthDataset generated = synth_forecast(synth);

  RunConfig run = generated.run;
  run.environment_path = write_file("fc_env.csv", generated.environment_csv);
  run.window_days = 2;  // 48-hour context
  run.model.horizon = 12;
  run.model.layers = 1;
  run.model.embed_dim = 8;
  run.model.heads = 2;
  run.train.max_epochs = 3;
  run.train.seed = 9;

  const EnvTable env = ingest_environment(run.environment_path);
  const ForecastDataset data = prepare_forecast(run, env);

  const auto examples = static_cast<std::int64_t>(data.raw.starts.size());
  CHECK(examples == (400 - 48 - 12) / 24 + 1);
  CHECK(data.windows.shape() == Shape{examples, 2, 2, 24});
  CHECK(data.norm_targets.shape() == Shape{examples, 2, 12});

  // Normalized targets invert back to the raw ones.
  const Tensor roundtrip = denormalize(data.normalized, data.norm_targets);
  for (std::size_t i = 0; i < roundtrip.data().size(); ++i) {
    CHECK(roundtrip.data()[i] ==
          doctest::Approx(data.raw.targets.data()[i]).epsilon(1e-9));
  }

  ForecastRun trained = train_forecaster(run, data);
  CHECK(trained.history.epochs.size() == 3);
  CHECK(std::isfinite(trained.test_normalized.mse));
  CHECK(trained.persistence_normalized.mse > 0.0);
  REQUIRE(trained.test_predictions.shape() ==
          Shape{static_cast<std::int64_t>(data.split.test.size()), 2, 12});
  for (const double v : trained.test_predictions.data()) {
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("pipeline rejects mismatched tasks") {
  const RunConfig cls = tiny_classification_run();
  const EnvTable env = ingest_environment(cls.environment_path);
  RunConfig wrong = cls;
  wrong.model.task = "forecasting";
  CHECK_THROWS_AS(prepare_forecast(cls, env), ContractError);
  CHECK_THROWS_AS(
      prepare_classification(wrong, EventTable{}, env), ContractError);
}
