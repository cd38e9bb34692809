#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tabulatime/model.hpp"
#include "tabulatime/tabular.hpp"
#include "tabulatime/training.hpp"

namespace tabulatime {

// One experiment, fully described: data schema, window geometry, model
// hyperparameters, training settings, and file locations. The JSON form is
// the CLI's --config payload.
struct RunConfig {
  std::vector<ColumnSchema> schema;  // clinical columns in the events file
  std::string label_column = "label";
  std::vector<std::string> channels;  // expected environment channels, ordered
  std::int64_t window_days = 10;      // window length is window_days * 24
  ModelConfig model;                  // carries task and mode
  TrainConfig train;
  ImputeConfig imputation;
  std::string events_path;
  std::string environment_path;
  std::string out_dir = ".";
};

std::string run_config_to_json(const RunConfig& config);
// FormatError on malformed JSON, wrong types, unknown top-level keys, or
// invalid settings (bad task/mode/fractions, duplicate schema names, ...).
RunConfig run_config_from_json(const std::string& text);
// check_paths additionally requires the referenced data files to exist.
RunConfig load_run_config(const std::string& path, bool check_paths = true);
void save_run_config(const RunConfig& config, const std::string& path);

}  // namespace tabulatime
