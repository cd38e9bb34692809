#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tabulatime/series.hpp"
#include "tabulatime/tabular.hpp"
#include "tabulatime/tensor.hpp"
#include "tabulatime/training.hpp"

namespace tabulatime {

// Raw CSV with the header split off; `line` holds each row's 1-based source
// line for error messages.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::int64_t> line;
};
CsvTable read_csv(const std::string& path);

// Shortest round-trippable decimal form.
std::string format_double(double value);

// "YYYY-MM-DDTHH", optionally with ":MM" and ":MM:SS" which must be zero
// (the tables are hourly). Returns whole hours since the Unix epoch.
std::int64_t parse_hour_timestamp(const std::string& text,
                                  std::int64_t line = 0);
std::string format_hour_timestamp(std::int64_t hour);

// Hourly environment table, contiguous from first_hour onward: row r holds
// hour first_hour + r. Gaps of at most three hours are filled by linear
// interpolation; longer gaps hold NaN and are listed so alignment can refuse
// windows that touch them.
struct EnvTable {
  std::vector<std::string> channels;
  std::int64_t first_hour = 0;
  std::vector<double> values;  // (hours, channels) row-major
  std::vector<std::pair<std::int64_t, std::int64_t>> long_gaps;  // [from, to) hours
  std::int64_t interpolated_cells = 0;

  std::int64_t hours() const {
    return channels.empty()
               ? 0
               : static_cast<std::int64_t>(values.size() / channels.size());
  }
  double at(std::int64_t row, std::int64_t channel) const {
    return values[static_cast<std::size_t>(
        row * static_cast<std::int64_t>(channels.size()) + channel)];
  }
};
EnvTable ingest_environment(const std::string& path);

// Event records: the schema's clinical columns, a 0/1 label when
// `label_column` is non-empty, and an admission hour per row.
struct EventTable {
  TabularData features;
  std::vector<int> labels;
  std::vector<std::int64_t> admissions;
};
EventTable load_events(const std::string& path,
                       const std::vector<ColumnSchema>& schema,
                       const std::string& label_column = "label");

// One aligned dataset: for every kept event, the window_days*24 hours
// strictly before the admission hour, plus per-channel window statistics for
// the tabular branch (max and mean, except channels named "Temp" which
// report mean and min, following the upstream feature naming).
struct AlignedData {
  SeriesBatch series;                       // (kept, channels, hours)
  std::vector<std::string> summary_names;   // e.g. PM10max, PM10avg, ...
  std::vector<std::vector<double>> summary; // (kept, 2*channels)
  std::vector<int> labels;                  // kept events only
  std::vector<std::int64_t> kept;           // row index into the event table
  std::vector<std::pair<std::int64_t, std::string>> excluded;  // row -> reason
};
AlignedData align_windows(const EventTable& events, const EnvTable& env,
                          std::int64_t window_days);

// Sliding forecasting examples: `window_hours` of context followed by
// `horizon` hours of target, advancing by `stride` rows. Spans touching a
// long-gap NaN are skipped.
struct ForecastData {
  SeriesBatch context;               // (examples, channels, window_hours)
  Tensor targets;                    // (examples, channels, horizon)
  std::vector<std::int64_t> starts;  // context start hour per example
};
ForecastData forecast_windows(const EnvTable& env, std::int64_t window_hours,
                              std::int64_t horizon, std::int64_t stride);

// Appends the alignment's summary statistics to the clinical columns as
// ordinary numeric features.
TabularData with_summary_columns(const TabularData& base,
                                 const std::vector<std::int64_t>& kept_rows,
                                 const std::vector<std::string>& names,
                                 const std::vector<std::vector<double>>& rows);

// Sectioned binary artifact: magic, format version, three JSON sections
// (run config, preprocessing statistics, training history), then named
// float64 tensors. Integers and floats are stored little-endian.
struct ModelBundle {
  std::uint32_t version = 1;
  std::string config_json;
  std::string stats_json;
  std::string history_json;
  std::vector<std::pair<std::string, Tensor>> parameters;
};
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

std::string history_to_json(const TrainHistory& history);

}  // namespace tabulatime
