#include "tabulatime/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "tabulatime/errors.hpp"

namespace tabulatime {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell_double(const std::string& text, const std::string& what,
                         std::int64_t line) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("'" + text + "' is not a number for " + what + " (line " +
                    std::to_string(line) + ")");
  }
  return value;
}

int parse_digits(const std::string& text, std::size_t pos, std::size_t count,
                 const std::string& original, std::int64_t line) {
  if (pos + count > text.size()) {
    throw DataError("bad timestamp '" + original + "' (line " +
                    std::to_string(line) + ")");
  }
  int value = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (text[i] < '0' || text[i] > '9') {
      throw DataError("bad timestamp '" + original + "' (line " +
                      std::to_string(line) + ")");
    }
    value = value * 10 + (text[i] - '0');
  }
  return value;
}

void expect_char(const std::string& text, std::size_t pos, char expected,
                 const std::string& original, std::int64_t line) {
  if (pos >= text.size() || text[pos] != expected) {
    throw DataError("bad timestamp '" + original + "' (line " +
                    std::to_string(line) + ")");
  }
}

void append_u32(std::string& out, std::uint32_t value) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((value >> shift) & 0xff));
  }
}

void append_i64(std::string& out, std::int64_t value) {
  auto bits = static_cast<std::uint64_t>(value);
  for (int shift = 0; shift < 64; shift += 8) {
    out.push_back(static_cast<char>((bits >> shift) & 0xff));
  }
}

void append_f64(std::string& out, double value) {
  append_i64(out, static_cast<std::int64_t>(std::bit_cast<std::uint64_t>(value)));
}

void append_section(std::string& out, const std::string& payload) {
  append_u32(out, static_cast<std::uint32_t>(payload.size()));
  out.append(payload);
}

class BundleReader {
 public:
  explicit BundleReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t read_u32() {
    need(4);
    std::uint32_t value = 0;
    for (int shift = 0; shift < 32; shift += 8) {
      value |= static_cast<std::uint32_t>(
                   static_cast<unsigned char>(bytes_[pos_++]))
               << shift;
    }
    return value;
  }
  std::int64_t read_i64() {
    need(8);
    std::uint64_t value = 0;
    for (int shift = 0; shift < 64; shift += 8) {
      value |= static_cast<std::uint64_t>(
                   static_cast<unsigned char>(bytes_[pos_++]))
               << shift;
    }
    return static_cast<std::int64_t>(value);
  }
  double read_f64() {
    return std::bit_cast<double>(static_cast<std::uint64_t>(read_i64()));
  }
  std::string read_section() {
    const auto length = read_u32();
    need(length);
    std::string payload = bytes_.substr(pos_, length);
    pos_ += length;
    return payload;
  }
  void expect_magic(const char* magic) {
    need(4);
    if (bytes_.compare(pos_, 4, magic) != 0) {
      throw FormatError("not a model bundle (bad magic)");
    }
    pos_ += 4;
  }
  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t count) {
    if (pos_ + count > bytes_.size()) {
      throw FormatError("truncated model bundle");
    }
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw DataError("'" + path + "' line " + std::to_string(line_no) +
                      " has " + std::to_string(cells.size()) +
                      " cells, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
    table.line.push_back(line_no);
  }
  if (table.header.empty()) throw DataError("'" + path + "' has no header");
  return table;
}

std::string format_double(double value) {
  char buffer[32];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::int64_t parse_hour_timestamp(const std::string& text, std::int64_t line) {
  const int year = parse_digits(text, 0, 4, text, line);
  expect_char(text, 4, '-', text, line);
  const int month = parse_digits(text, 5, 2, text, line);
  expect_char(text, 7, '-', text, line);
  const int day = parse_digits(text, 8, 2, text, line);
  expect_char(text, 10, 'T', text, line);
  const int hour = parse_digits(text, 11, 2, text, line);
  std::size_t pos = 13;
  // Hourly tables: any minutes/seconds given must be zero.
  while (pos < text.size()) {
    expect_char(text, pos, ':', text, line);
    if (parse_digits(text, pos + 1, 2, text, line) != 0) {
      throw DataError("timestamp '" + text + "' is not on the hour (line " +
                      std::to_string(line) + ")");
    }
    pos += 3;
  }
  const std::chrono::year_month_day ymd{
      std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
      std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23) {
    throw DataError("bad timestamp '" + text + "' (line " +
                    std::to_string(line) + ")");
  }
  const auto days =
      std::chrono::sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 24 + hour;
}

std::string format_hour_timestamp(std::int64_t hour) {
  std::int64_t days = hour / 24;
  std::int64_t h = hour % 24;
  if (h < 0) {
    h += 24;
    days -= 1;
  }
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{days}}};
  char buffer[20];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02uT%02u:00",
                static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<unsigned>(h));
  return buffer;
}

EnvTable ingest_environment(const std::string& path) {
  CsvTable csv = read_csv(path);
  if (csv.header.empty() || csv.header[0] != "timestamp") {
    throw DataError("'" + path + "': first column must be 'timestamp'");
  }
  if (csv.header.size() < 2) {
    throw DataError("'" + path + "': no channel columns");
  }
  EnvTable env;
  env.channels.assign(csv.header.begin() + 1, csv.header.end());
  const auto n_channels = static_cast<std::int64_t>(env.channels.size());

  struct Row {
    std::int64_t hour;
    std::int64_t line;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  rows.reserve(csv.rows.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    Row row;
    row.line = csv.line[r];
    row.hour = parse_hour_timestamp(csv.rows[r][0], row.line);
    for (std::int64_t c = 0; c < n_channels; ++c) {
      row.values.push_back(
          parse_cell_double(csv.rows[r][static_cast<std::size_t>(c + 1)],
                            env.channels[static_cast<std::size_t>(c)],
                            row.line));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("'" + path + "' has no data rows");
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.hour < b.hour; });
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].hour == rows[r - 1].hour) {
      throw DataError("duplicate timestamp '" +
                      format_hour_timestamp(rows[r].hour) + "' (line " +
                      std::to_string(rows[r].line) + ")");
    }
  }

  env.first_hour = rows.front().hour;
  const std::int64_t total_hours = rows.back().hour - rows.front().hour + 1;
  env.values.assign(static_cast<std::size_t>(total_hours * n_channels),
                    std::numeric_limits<double>::quiet_NaN());
  for (const auto& row : rows) {
    const std::int64_t at = row.hour - env.first_hour;
    std::copy(row.values.begin(), row.values.end(),
              env.values.begin() +
                  static_cast<std::ptrdiff_t>(at * n_channels));
  }
  // Short gaps are linearly interpolated between their bounding rows; longer
  // ones stay NaN so alignment can refuse windows that touch them.
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::int64_t gap = rows[r].hour - rows[r - 1].hour - 1;
    if (gap == 0) continue;
    if (gap > 3) {
      env.long_gaps.emplace_back(rows[r - 1].hour + 1, rows[r].hour);
      continue;
    }
    for (std::int64_t j = 1; j <= gap; ++j) {
      const std::int64_t at = rows[r - 1].hour + j - env.first_hour;
      const double frac =
          static_cast<double>(j) / static_cast<double>(gap + 1);
      for (std::int64_t c = 0; c < n_channels; ++c) {
        const double lo = rows[r - 1].values[static_cast<std::size_t>(c)];
        const double hi = rows[r].values[static_cast<std::size_t>(c)];
        env.values[static_cast<std::size_t>(at * n_channels + c)] =
            lo + (hi - lo) * frac;
        ++env.interpolated_cells;
      }
    }
  }
  return env;
}

EventTable load_events(const std::string& path,
                       const std::vector<ColumnSchema>& schema,
                       const std::string& label_column) {
  CsvTable csv = read_csv(path);
  auto column_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < csv.header.size(); ++i) {
      if (csv.header[i] == name) return i;
    }
    throw DataError("'" + path + "' is missing column '" + name + "'");
  };
  const std::size_t admission_at = column_index("admission_time");
  std::vector<std::size_t> feature_at;
  for (const auto& col : schema) feature_at.push_back(column_index(col.name));
  std::size_t label_at = 0;
  if (!label_column.empty()) label_at = column_index(label_column);

  EventTable events;
  std::vector<std::vector<std::string>> cells;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    events.admissions.push_back(
        parse_hour_timestamp(row[admission_at], csv.line[r]));
    if (!label_column.empty()) {
      const std::string& text = row[label_at];
      if (text != "0" && text != "1") {
        throw DataError("label must be 0 or 1, got '" + text + "' (line " +
                        std::to_string(csv.line[r]) + ")");
      }
      events.labels.push_back(text == "1" ? 1 : 0);
    }
    std::vector<std::string> feature_row;
    for (auto at : feature_at) feature_row.push_back(row[at]);
    cells.push_back(std::move(feature_row));
  }
  events.features = TabularData::from_strings(schema, cells);
  return events;
}

AlignedData align_windows(const EventTable& events, const EnvTable& env,
                          std::int64_t window_days) {
  if (window_days <= 0) {
    throw ContractError("align_windows: window_days must be positive");
  }
  if (env.channels.empty() || env.hours() == 0) {
    throw DataError("align_windows: empty environment table");
  }
  const std::int64_t window = window_days * 24;
  const auto n_channels = static_cast<std::int64_t>(env.channels.size());
  const auto n_events = static_cast<std::int64_t>(events.admissions.size());

  AlignedData aligned;
  for (const auto& name : env.channels) {
    if (name == "Temp") {
      aligned.summary_names.push_back(name + "avg");
      aligned.summary_names.push_back(name + "min");
    } else {
      aligned.summary_names.push_back(name + "max");
      aligned.summary_names.push_back(name + "avg");
    }
  }

  std::vector<double> series_values;
  for (std::int64_t i = 0; i < n_events; ++i) {
    const std::int64_t admission = events.admissions[static_cast<std::size_t>(i)];
    // The window is the `window` hours strictly before admission.
    const std::int64_t begin = admission - window - env.first_hour;
    const std::int64_t end = admission - env.first_hour;
    if (begin < 0 || end > env.hours()) {
      aligned.excluded.emplace_back(i, "window outside environment coverage");
      continue;
    }
    bool touches_gap = false;
    for (std::int64_t r = begin; r < end && !touches_gap; ++r) {
      for (std::int64_t c = 0; c < n_channels; ++c) {
        if (std::isnan(env.at(r, c))) {
          touches_gap = true;
          break;
        }
      }
    }
    if (touches_gap) {
      aligned.excluded.emplace_back(i, "window overlaps a long data gap");
      continue;
    }
    auto& summary_row = aligned.summary.emplace_back();
    for (std::int64_t c = 0; c < n_channels; ++c) {
      double total = 0.0;
      double high = -std::numeric_limits<double>::infinity();
      double low = std::numeric_limits<double>::infinity();
      for (std::int64_t r = begin; r < end; ++r) {
        const double v = env.at(r, c);
        total += v;
        high = std::max(high, v);
        low = std::min(low, v);
      }
      const double avg = total / static_cast<double>(window);
      if (env.channels[static_cast<std::size_t>(c)] == "Temp") {
        summary_row.push_back(avg);
        summary_row.push_back(low);
      } else {
        summary_row.push_back(high);
        summary_row.push_back(avg);
      }
    }
    for (std::int64_t c = 0; c < n_channels; ++c) {
      for (std::int64_t r = begin; r < end; ++r) {
        series_values.push_back(env.at(r, c));
      }
    }
    aligned.kept.push_back(i);
    if (!events.labels.empty()) {
      aligned.labels.push_back(events.labels[static_cast<std::size_t>(i)]);
    }
  }

  const auto kept = static_cast<std::int64_t>(aligned.kept.size());
  aligned.series.channel_names = env.channels;
  aligned.series.values = Tensor::zeros({kept, n_channels, window});
  if (kept > 0) aligned.series.values.raw() = std::move(series_values);
  return aligned;
}

ForecastData forecast_windows(const EnvTable& env, std::int64_t window_hours,
                              std::int64_t horizon, std::int64_t stride) {
  if (window_hours <= 0 || horizon <= 0 || stride <= 0) {
    throw ContractError(
        "forecast_windows: window, horizon and stride must be positive");
  }
  if (env.channels.empty() || env.hours() == 0) {
    throw DataError("forecast_windows: empty environment table");
  }
  const auto n_channels = static_cast<std::int64_t>(env.channels.size());
  const std::int64_t span = window_hours + horizon;

  ForecastData data;
  std::vector<double> context_values;
  std::vector<double> target_values;
  for (std::int64_t begin = 0; begin + span <= env.hours(); begin += stride) {
    bool touches_gap = false;
    for (std::int64_t r = begin; r < begin + span && !touches_gap; ++r) {
      for (std::int64_t c = 0; c < n_channels; ++c) {
        if (std::isnan(env.at(r, c))) {
          touches_gap = true;
          break;
        }
      }
    }
    if (touches_gap) continue;
    for (std::int64_t c = 0; c < n_channels; ++c) {
      for (std::int64_t r = begin; r < begin + window_hours; ++r) {
        context_values.push_back(env.at(r, c));
      }
    }
    for (std::int64_t c = 0; c < n_channels; ++c) {
      for (std::int64_t r = begin + window_hours; r < begin + span; ++r) {
        target_values.push_back(env.at(r, c));
      }
    }
    data.starts.push_back(env.first_hour + begin);
  }

  const auto examples = static_cast<std::int64_t>(data.starts.size());
  data.context.channel_names = env.channels;
  data.context.values = Tensor::zeros({examples, n_channels, window_hours});
  data.targets = Tensor::zeros({examples, n_channels, horizon});
  if (examples > 0) {
    data.context.values.raw() = std::move(context_values);
    data.targets.raw() = std::move(target_values);
  }
  return data;
}

TabularData with_summary_columns(const TabularData& base,
                                 const std::vector<std::int64_t>& kept_rows,
                                 const std::vector<std::string>& names,
                                 const std::vector<std::vector<double>>& rows) {
  if (kept_rows.size() != rows.size()) {
    throw DimensionError("with_summary_columns: " +
                         std::to_string(kept_rows.size()) + " kept rows vs " +
                         std::to_string(rows.size()) + " summary rows");
  }
  TabularData out = base.select_rows(kept_rows);
  for (std::size_t f = 0; f < names.size(); ++f) {
    Column column;
    column.schema.name = names[f];
    column.schema.kind = ColumnKind::Numeric;
    for (const auto& row : rows) {
      if (row.size() != names.size()) {
        throw DimensionError("with_summary_columns: summary row width " +
                             std::to_string(row.size()) + " vs " +
                             std::to_string(names.size()) + " names");
      }
      column.numeric.push_back(row[f]);
    }
    out.columns.push_back(std::move(column));
  }
  return out;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  std::string out;
  out.append("TTMB");
  append_u32(out, bundle.version);
  append_section(out, bundle.config_json);
  append_section(out, bundle.stats_json);
  append_section(out, bundle.history_json);
  append_u32(out, static_cast<std::uint32_t>(bundle.parameters.size()));
  for (const auto& [name, tensor] : bundle.parameters) {
    append_section(out, name);
    append_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (int axis = 0; axis < tensor.rank(); ++axis) {
      append_i64(out, tensor.dim(axis));
    }
    for (double v : tensor.data()) append_f64(out, v);
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write '" + path + "'");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("failed writing '" + path + "'");
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(file)),
                    std::istreambuf_iterator<char>());
  BundleReader reader(std::move(bytes));
  reader.expect_magic("TTMB");
  ModelBundle bundle;
  bundle.version = reader.read_u32();
  if (bundle.version != 1) {
    throw FormatError("unsupported bundle version " +
                      std::to_string(bundle.version));
  }
  bundle.config_json = reader.read_section();
  bundle.stats_json = reader.read_section();
  bundle.history_json = reader.read_section();
  const std::uint32_t count = reader.read_u32();
  for (std::uint32_t p = 0; p < count; ++p) {
    std::string name = reader.read_section();
    const std::uint32_t rank = reader.read_u32();
    Shape shape;
    std::int64_t size = 1;
    for (std::uint32_t axis = 0; axis < rank; ++axis) {
      shape.push_back(reader.read_i64());
      if (shape.back() <= 0) throw FormatError("corrupt tensor shape");
      size *= shape.back();
    }
    Tensor tensor = Tensor::zeros(shape);
    for (std::int64_t i = 0; i < size; ++i) {
      tensor.raw()[static_cast<std::size_t>(i)] = reader.read_f64();
    }
    bundle.parameters.emplace_back(std::move(name), std::move(tensor));
  }
  if (!reader.exhausted()) {
    throw FormatError("trailing bytes after model bundle payload");
  }
  return bundle;
}

std::string history_to_json(const TrainHistory& history) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& record : history.epochs) {
    epochs.push_back({{"epoch", record.epoch},
                      {"train_loss", record.train_loss},
                      {"val_loss", record.val_loss}});
  }
  nlohmann::json doc = {{"epochs", epochs},
                        {"best_epoch", history.best_epoch},
                        {"best_val_loss", history.best_val_loss},
                        {"early_stopped", history.early_stopped}};
  return doc.dump(2);
}

}  // namespace tabulatime
