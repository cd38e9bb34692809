#include "tabulatime/synth.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tabulatime/errors.hpp"
#include "tabulatime/io.hpp"
#include "tabulatime/rand.hpp"

namespace tabulatime {

namespace {

struct ChannelProfile {
  const char* name;
  double base;
  double day_amplitude;
  double hour_noise;
};

constexpr ChannelProfile kChannels[] = {
    {"PM10", 30.0, 8.0, 2.0}, {"NO", 20.0, 6.0, 2.0},  {"NO2", 25.0, 6.0, 2.0},
    {"NOx", 40.0, 10.0, 3.0}, {"Temp", 10.0, 4.0, 1.0},
};
constexpr std::int64_t kChannelCount =
    static_cast<std::int64_t>(sizeof(kChannels) / sizeof(kChannels[0]));

void standardize(std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const double sd = std::sqrt(var);
  for (double& v : values) v = (v - mean) / sd;
}

}  // namespace

SynthDataset synth_classification(const ClassificationSynthConfig& config) {
  if (config.events < 20) throw ContractError("need at least 20 events");
  if (config.window_days < 2)
    throw ContractError("window must cover at least 2 days");
  if (config.missing_rate < 0.0 || config.missing_rate >= 1.0)
    throw ContractError("missing rate must lie in [0, 1)");

  const std::int64_t n = config.events;
  const std::int64_t window = config.window_days * 24;
  const std::int64_t start = parse_hour_timestamp("2000-01-01T00");

  // Event windows tile [start, start + n*window): admission i sits at the end
  // of tile i, so its lookback window is exactly tile i.
  std::vector<std::vector<double>> env(
      static_cast<std::size_t>(n * window),
      std::vector<double>(kChannelCount, 0.0));
  std::mt19937_64 env_rng(derive_seed(config.seed, "synth_env"));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t c = 0; c < kChannelCount; ++c) {
      const ChannelProfile& profile = kChannels[c];
      for (std::int64_t d = 0; d < config.window_days; ++d) {
        const double day_level =
            profile.base + profile.day_amplitude * normal_double(env_rng);
        for (std::int64_t j = 0; j < 24; ++j) {
          const std::int64_t hour = i * window + d * 24 + j;
          env[static_cast<std::size_t>(hour)][static_cast<std::size_t>(c)] =
              day_level + profile.hour_noise * normal_double(env_rng);
        }
      }
    }
  }

  // Environmental driver: window-relative PM10 anomaly of the day two days
  // before admission, i.e. exactly the quantity the series branch sees after
  // per-window normalization.
  std::vector<double> env_signal(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::int64_t h = 0; h < window; ++h)
      mean += env[static_cast<std::size_t>(i * window + h)][0];
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (std::int64_t h = 0; h < window; ++h) {
      const double v = env[static_cast<std::size_t>(i * window + h)][0];
      var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(window);
    double block = 0.0;
    for (std::int64_t h = window - 48; h < window - 24; ++h)
      block += env[static_cast<std::size_t>(i * window + h)][0];
    block /= 24.0;
    env_signal[static_cast<std::size_t>(i)] =
        (block - mean) / std::sqrt(var);
  }
  standardize(env_signal);

  std::mt19937_64 tab_rng(derive_seed(config.seed, "synth_tab"));
  std::vector<double> tab_signal(static_cast<std::size_t>(n));
  for (double& v : tab_signal) v = normal_double(tab_rng);
  standardize(tab_signal);

  std::vector<double> marker_a(static_cast<std::size_t>(n));
  std::vector<double> marker_b(static_cast<std::size_t>(n));
  std::vector<double> age(static_cast<std::size_t>(n));
  std::vector<int> sex(static_cast<std::size_t>(n));
  const double rho = config.marker_correlation;
  const double tail = std::sqrt(1.0 - rho * rho);
  for (std::int64_t i = 0; i < n; ++i) {
    const double z = tab_signal[static_cast<std::size_t>(i)];
    marker_a[static_cast<std::size_t>(i)] =
        100.0 + 20.0 * (rho * z + tail * normal_double(tab_rng));
    marker_b[static_cast<std::size_t>(i)] =
        60.0 + 15.0 * (rho * z + tail * normal_double(tab_rng));
    age[static_cast<std::size_t>(i)] =
        std::floor(uniform_double(tab_rng, 40.0, 90.0));
    sex[static_cast<std::size_t>(i)] = uniform_double(tab_rng) < 0.5 ? 0 : 1;
  }

  std::mt19937_64 label_rng(derive_seed(config.seed, "synth_label"));
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double score =
        config.tab_weight * tab_signal[static_cast<std::size_t>(i)] +
        config.env_weight * env_signal[static_cast<std::size_t>(i)] +
        config.label_noise * normal_double(label_rng);
    labels[static_cast<std::size_t>(i)] = score > 0.0 ? 1 : 0;
  }

  std::mt19937_64 miss_rng(derive_seed(config.seed, "synth_missing"));
  auto drop = [&](double) {
    return config.missing_rate > 0.0 &&
           uniform_double(miss_rng) < config.missing_rate;
  };

  std::string events;
  events += "admission_time,label,RiskScore,MarkerA,MarkerB,Age,Sex\n";
  for (std::int64_t i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    events += format_hour_timestamp(start + (i + 1) * window);
    events += ',';
    events += labels[k] ? '1' : '0';
    const double risk = 50.0 + 10.0 * tab_signal[k];
    // Missingness draws run in fixed column order so the mask depends only on
    // the seed, not on the values.
    for (double value : {risk, marker_a[k], marker_b[k], age[k]}) {
      events += ',';
      if (!drop(value)) events += format_double(value);
    }
    events += ',';
    events += sex[k] ? "F" : "M";
    events += '\n';
  }

  std::string environment;
  environment += "timestamp";
  for (const ChannelProfile& profile : kChannels) {
    environment += ',';
    environment += profile.name;
  }
  environment += '\n';
  for (std::int64_t h = 0; h < n * window; ++h) {
    environment += format_hour_timestamp(start + h);
    for (std::int64_t c = 0; c < kChannelCount; ++c) {
      environment += ',';
      environment += format_double(
          env[static_cast<std::size_t>(h)][static_cast<std::size_t>(c)]);
    }
    environment += '\n';
  }

  SynthDataset out;
  out.events_csv = std::move(events);
  out.environment_csv = std::move(environment);
  out.run.schema = {
      {"RiskScore", ColumnKind::Numeric, {}},
      {"MarkerA", ColumnKind::Numeric, {}},
      {"MarkerB", ColumnKind::Numeric, {}},
      {"Age", ColumnKind::Numeric, {}},
      {"Sex", ColumnKind::Categorical, {"M", "F"}},
  };
  out.run.label_column = "label";
  for (const ChannelProfile& profile : kChannels)
    out.run.channels.push_back(profile.name);
  out.run.window_days = config.window_days;
  out.run.model.task = "classification";
  out.run.model.mode = "full";
  out.run.model.patch_size = 24;
  out.run.model.stride = 24;
  return out;
}

SynthDataset synth_forecast(const ForecastSynthConfig& config) {
  if (config.hours < 2) throw ContractError("need at least 2 hours");
  if (config.channels < 1) throw ContractError("need at least 1 channel");
  if (std::abs(config.phi2) >= 1.0 ||
      std::abs(config.phi1) >= 1.0 - config.phi2)
    throw ContractError("AR(2) coefficients must be stationary");

  const std::int64_t start = parse_hour_timestamp("2000-01-01T00");
  std::string environment;
  environment += "timestamp";
  for (std::int64_t c = 0; c < config.channels; ++c) {
    environment += ",series_";
    environment += std::to_string(c);
  }
  environment += '\n';

  std::vector<std::vector<double>> values(
      static_cast<std::size_t>(config.channels));
  for (std::int64_t c = 0; c < config.channels; ++c) {
    std::mt19937_64 rng(derive_seed(config.seed, "synth_forecast",
                                    static_cast<std::uint64_t>(c)));
    const double phase = uniform_double(rng, 0.0, 6.283185307179586);
    std::vector<double>& series = values[static_cast<std::size_t>(c)];
    series.resize(static_cast<std::size_t>(config.hours));
    double prev1 = 0.0;
    double prev2 = 0.0;
    for (std::int64_t t = 0; t < config.hours; ++t) {
      const double ar = config.phi1 * prev1 + config.phi2 * prev2 +
                        config.noise * normal_double(rng);
      prev2 = prev1;
      prev1 = ar;
      const double season =
          config.season_amplitude *
          std::sin(6.283185307179586 * static_cast<double>(t) /
                       static_cast<double>(config.season_period) +
                   phase);
      series[static_cast<std::size_t>(t)] =
          100.0 + 10.0 * (c + 1) + ar + season;
    }
  }
  for (std::int64_t t = 0; t < config.hours; ++t) {
    environment += format_hour_timestamp(start + t);
    for (std::int64_t c = 0; c < config.channels; ++c) {
      environment += ',';
      environment += format_double(
          values[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)]);
    }
    environment += '\n';
  }

  SynthDataset out;
  out.environment_csv = std::move(environment);
  for (std::int64_t c = 0; c < config.channels; ++c)
    out.run.channels.push_back("series_" + std::to_string(c));
  out.run.window_days = 10;
  out.run.model.task = "forecasting";
  out.run.model.mode = "series_only";
  out.run.model.patch_size = 24;
  out.run.model.stride = 24;
  out.run.model.horizon = 48;
  return out;
}

}  // namespace tabulatime
