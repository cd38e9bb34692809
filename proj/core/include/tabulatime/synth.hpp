#pragma once

#include <cstdint>
#include <string>

#include "tabulatime/config.hpp"

namespace tabulatime {

// Classification task with a planted joint signal: the label depends on one
// clinical score and on the window-relative PM10 anomaly two days before
// admission, so neither branch alone can reach the joint accuracy. Event
// windows tile the environment table without overlap, making every event's
// series signal independent.
struct ClassificationSynthConfig {
  std::int64_t events = 800;
  std::int64_t window_days = 10;
  double missing_rate = 0.0;  // MCAR over clinical numeric cells
  std::uint64_t seed = 7;
  double tab_weight = 0.8;
  double env_weight = 1.2;
  double label_noise = 0.05;
  double marker_correlation = 0.85;  // companions that let KNN recover gaps
};

// Hourly AR(2) series with a daily seasonal component, emitted in the
// environment CSV format for the forecasting task.
struct ForecastSynthConfig {
  std::int64_t hours = 4000;
  std::int64_t channels = 3;
  std::uint64_t seed = 11;
  double phi1 = 1.2;
  double phi2 = -0.3;
  double season_amplitude = 2.0;
  std::int64_t season_period = 24;
  double noise = 0.5;
};

// CSV text plus a run config wired for the generated data (paths left for
// the caller to fill after writing the files).
struct SynthDataset {
  std::string events_csv;       // empty for forecasting
  std::string environment_csv;
  RunConfig run;
};

SynthDataset synth_classification(const ClassificationSynthConfig& config);
SynthDataset synth_forecast(const ForecastSynthConfig& config);

}  // namespace tabulatime
