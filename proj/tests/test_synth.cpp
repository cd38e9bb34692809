#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "tabulatime/errors.hpp"
#include "tabulatime/io.hpp"
#include "tabulatime/synth.hpp"

using namespace tabulatime;

namespace {

std::filesystem::path temp_dir() {
  const auto dir =
      std::filesystem::temp_directory_path() / "tabulatime_synth_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = temp_dir() / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path.string();
}

}  // namespace

TEST_CASE("classification synthesis is byte-identical per seed") {
  ClassificationSynthConfig config;
  config.events = 24;
  config.seed = 7;
  const SynthDataset a = synth_classification(config);
  const SynthDataset b = synth_classification(config);
  CHECK(a.events_csv == b.events_csv);
  CHECK(a.environment_csv == b.environment_csv);

  config.seed = 8;
  const SynthDataset c = synth_classification(config);
  CHECK(a.events_csv != c.events_csv);
  CHECK(a.environment_csv != c.environment_csv);
}

TEST_CASE("classification synthesis feeds the ingestion pipeline cleanly") {
  ClassificationSynthConfig config;
  config.events = 30;
  config.window_days = 3;
  const SynthDataset data = synth_classification(config);

  const auto events_path = write_file("events.csv", data.events_csv);
  const auto env_path = write_file("env.csv", data.environment_csv);

  const EnvTable env = ingest_environment(env_path);
  CHECK(env.channels == data.run.channels);
  CHECK(env.hours() == 30 * 3 * 24);
  CHECK(env.long_gaps.empty());
  CHECK(env.interpolated_cells == 0);

  const EventTable events =
      load_events(events_path, data.run.schema, data.run.label_column);
  CHECK(events.admissions.size() == 30);

  // Every window fits the table exactly; nothing is excluded.
  const AlignedData aligned = align_windows(events, env, config.window_days);
  CHECK(aligned.excluded.empty());
  CHECK(aligned.kept.size() == 30);
  CHECK(aligned.series.values.shape() == Shape{30, 5, 72});

  // Both classes appear.
  int ones = 0;
  for (int label : aligned.labels) ones += label;
  CHECK(ones > 0);
  CHECK(ones < 30);
}

TEST_CASE("requested missingness appears only in clinical numeric cells") {
  ClassificationSynthConfig config;
  config.events = 200;
  config.window_days = 2;
  config.missing_rate = 0.1;
  const SynthDataset data = synth_classification(config);

  const auto events_path = write_file("missing_events.csv", data.events_csv);
  const EventTable events =
      load_events(events_path, data.run.schema, data.run.label_column);

  std::int64_t missing = 0;
  std::int64_t cells = 0;
  for (const auto& column : events.features.columns) {
    if (column.schema.kind == ColumnKind::Numeric) {
      for (double v : column.numeric) {
        ++cells;
        if (std::isnan(v)) ++missing;
      }
    } else {
      for (int code : column.codes) CHECK(code >= 0);
    }
  }
  const double rate =
      static_cast<double>(missing) / static_cast<double>(cells);
  CHECK(rate > 0.05);
  CHECK(rate < 0.15);

  ClassificationSynthConfig complete = config;
  complete.missing_rate = 0.0;
  const SynthDataset full = synth_classification(complete);
  const EventTable all = load_events(write_file("full_events.csv",
                                                full.events_csv),
                                     full.run.schema, full.run.label_column);
  for (const auto& column : all.features.columns) {
    for (double v : column.numeric) CHECK(!std::isnan(v));
  }
}

TEST_CASE("forecast synthesis emits a gap-free hourly table") {
  ForecastSynthConfig config;
  config.hours = 400;
  config.channels = 2;
  const SynthDataset data = synth_forecast(config);
  CHECK(data.events_csv.empty());
  CHECK(data.run.model.task == "forecasting");
  CHECK(data.run.model.mode == "series_only");

  const EnvTable env = ingest_environment(
      write_file("forecast_env.csv", data.environment_csv));
  CHECK(env.channels == std::vector<std::string>{"series_0", "series_1"});
  CHECK(env.hours() == 400);
  CHECK(env.long_gaps.empty());

  const SynthDataset again = synth_forecast(config);
  CHECK(again.environment_csv == data.environment_csv);
}

TEST_CASE("synthesis rejects degenerate settings") {
  ClassificationSynthConfig tiny;
  tiny.events = 5;
  CHECK_THROWS_AS(synth_classification(tiny), ContractError);
  ClassificationSynthConfig shallow;
  shallow.window_days = 1;
  CHECK_THROWS_AS(synth_classification(shallow), ContractError);
  ClassificationSynthConfig soggy;
  soggy.missing_rate = 1.0;
  CHECK_THROWS_AS(synth_classification(soggy), ContractError);

  ForecastSynthConfig unstable;
  unstable.phi1 = 1.4;
  unstable.phi2 = -0.3;
  CHECK_THROWS_AS(synth_forecast(unstable), ContractError);
}
