#include "tabulatime/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tabulatime/errors.hpp"

namespace tabulatime {

namespace {

using nlohmann::json;

json schema_to_json(const std::vector<ColumnSchema>& schema) {
  json out = json::array();
  for (const auto& col : schema) {
    json entry = {{"name", col.name}};
    if (col.kind == ColumnKind::Categorical) {
      entry["kind"] = "categorical";
      entry["categories"] = col.categories;
    } else {
      entry["kind"] = "numeric";
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<ColumnSchema> schema_from_json(const json& doc) {
  if (!doc.is_array()) throw FormatError("config: 'schema' must be an array");
  std::vector<ColumnSchema> schema;
  std::set<std::string> names;
  for (const auto& entry : doc) {
    ColumnSchema col;
    col.name = entry.at("name").get<std::string>();
    if (!names.insert(col.name).second) {
      throw FormatError("config: duplicate schema column '" + col.name + "'");
    }
    const std::string kind = entry.value("kind", "numeric");
    if (kind == "numeric") {
      col.kind = ColumnKind::Numeric;
    } else if (kind == "categorical") {
      col.kind = ColumnKind::Categorical;
      col.categories =
          entry.at("categories").get<std::vector<std::string>>();
      if (col.categories.empty()) {
        throw FormatError("config: column '" + col.name +
                          "' has no categories");
      }
    } else {
      throw FormatError("config: unknown column kind '" + kind + "'");
    }
    schema.push_back(std::move(col));
  }
  return schema;
}

template <typename T>
T field(const json& doc, const std::string& key, T fallback) {
  try {
    return doc.value(key, fallback);
  } catch (const json::exception& e) {
    throw FormatError("config: bad value for '" + key + "': " + e.what());
  }
}

void validate(const RunConfig& config) {
  const auto& model = config.model;
  if (model.task != "classification" && model.task != "forecasting") {
    throw FormatError("config: unknown task '" + model.task + "'");
  }
  if (model.mode != "full" && model.mode != "tabular_only" &&
      model.mode != "series_only") {
    throw FormatError("config: unknown mode '" + model.mode + "'");
  }
  if (config.window_days <= 0) {
    throw FormatError("config: window_days must be positive");
  }
  if (model.patch_size <= 0 || model.stride <= 0) {
    throw FormatError("config: patch_size and stride must be positive");
  }
  if (config.window_days * 24 < model.patch_size) {
    throw FormatError("config: window shorter than one patch");
  }
  if (model.layers <= 0 || model.embed_dim <= 0 || model.heads <= 0) {
    throw FormatError("config: model dimensions must be positive");
  }
  if (model.embed_dim % model.heads != 0) {
    throw FormatError("config: heads must divide embed_dim");
  }
  if (model.classes < 2) throw FormatError("config: classes must be >= 2");
  if (model.horizon <= 0) throw FormatError("config: horizon must be positive");
  if (model.dropout < 0.0 || model.dropout >= 1.0) {
    throw FormatError("config: dropout must be in [0,1)");
  }
  if (config.train.train_frac <= 0.0 || config.train.train_frac >= 1.0) {
    throw FormatError("config: train_frac must be in (0,1)");
  }
  if (config.imputation.method != "mean" && config.imputation.method != "knn" &&
      config.imputation.method != "mice") {
    throw FormatError("config: unknown imputation method '" +
                      config.imputation.method + "'");
  }
  if (config.imputation.k <= 0) {
    throw FormatError("config: imputation k must be positive");
  }
  if (model.task == "classification" && model.mode != "series_only" &&
      config.schema.empty() && config.channels.empty()) {
    throw FormatError("config: classification needs schema or channels");
  }
}

}  // namespace

std::string run_config_to_json(const RunConfig& config) {
  const auto& model = config.model;
  json doc = {
      {"task", model.task},
      {"mode", model.mode},
      {"schema", schema_to_json(config.schema)},
      {"label_column", config.label_column},
      {"environment",
       {{"channels", config.channels}, {"window_days", config.window_days}}},
      {"model",
       {{"layers", model.layers},
        {"embed_dim", model.embed_dim},
        {"heads", model.heads},
        {"tabular_dim", model.tabular_dim},
        {"patch_size", model.patch_size},
        {"stride", model.stride},
        {"head_hidden", model.head_hidden},
        {"bottleneck", model.bottleneck},
        {"dropout", model.dropout},
        {"classes", model.classes},
        {"horizon", model.horizon}}},
      {"train",
       {{"learning_rate", config.train.learning_rate},
        {"batch_size", config.train.batch_size},
        {"max_epochs", config.train.max_epochs},
        {"patience", config.train.patience},
        {"seed", config.train.seed},
        {"train_frac", config.train.train_frac},
        {"val_frac_of_train", config.train.val_frac_of_train},
        {"temporal_split", config.train.temporal_split}}},
      {"imputation",
       {{"method", config.imputation.method},
        {"k", config.imputation.k},
        {"iterations", config.imputation.mice_iterations}}},
      {"paths",
       {{"events", config.events_path},
        {"environment", config.environment_path},
        {"out_dir", config.out_dir}}},
  };
  return doc.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("config: top level must be an object");
  static const std::set<std::string> known = {
      "task",  "mode",  "schema",     "label_column", "environment",
      "model", "train", "imputation", "paths"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) {
      throw FormatError("config: unknown key '" + key + "'");
    }
  }

  RunConfig config;
  try {
    config.model.task = field<std::string>(doc, "task", "classification");
    config.model.mode = field<std::string>(doc, "mode", "full");
    if (doc.contains("schema")) config.schema = schema_from_json(doc["schema"]);
    config.label_column =
        field<std::string>(doc, "label_column", config.label_column);
    if (doc.contains("environment")) {
      const auto& env = doc["environment"];
      config.channels = field<std::vector<std::string>>(env, "channels", {});
      config.window_days =
          field<std::int64_t>(env, "window_days", config.window_days);
    }
    if (doc.contains("model")) {
      const auto& m = doc["model"];
      auto& model = config.model;
      model.layers = field<int>(m, "layers", model.layers);
      model.embed_dim = field<std::int64_t>(m, "embed_dim", model.embed_dim);
      model.heads = field<int>(m, "heads", model.heads);
      model.tabular_dim =
          field<std::int64_t>(m, "tabular_dim", model.tabular_dim);
      model.patch_size =
          field<std::int64_t>(m, "patch_size", model.patch_size);
      model.stride = field<std::int64_t>(m, "stride", model.stride);
      model.head_hidden =
          field<std::int64_t>(m, "head_hidden", model.head_hidden);
      model.bottleneck =
          field<std::int64_t>(m, "bottleneck", model.bottleneck);
      model.dropout = field<double>(m, "dropout", model.dropout);
      model.classes = field<int>(m, "classes", model.classes);
      model.horizon = field<std::int64_t>(m, "horizon", model.horizon);
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      auto& train = config.train;
      train.learning_rate =
          field<double>(t, "learning_rate", train.learning_rate);
      train.batch_size = field<std::int64_t>(t, "batch_size", train.batch_size);
      train.max_epochs = field<int>(t, "max_epochs", train.max_epochs);
      train.patience = field<int>(t, "patience", train.patience);
      train.seed = field<std::uint64_t>(t, "seed", train.seed);
      train.train_frac = field<double>(t, "train_frac", train.train_frac);
      train.val_frac_of_train =
          field<double>(t, "val_frac_of_train", train.val_frac_of_train);
      train.temporal_split =
          field<bool>(t, "temporal_split", train.temporal_split);
    }
    if (doc.contains("imputation")) {
      const auto& imp = doc["imputation"];
      config.imputation.method =
          field<std::string>(imp, "method", config.imputation.method);
      config.imputation.k = field<int>(imp, "k", config.imputation.k);
      config.imputation.mice_iterations =
          field<int>(imp, "iterations", config.imputation.mice_iterations);
    }
    if (doc.contains("paths")) {
      const auto& paths = doc["paths"];
      config.events_path = field<std::string>(paths, "events", "");
      config.environment_path = field<std::string>(paths, "environment", "");
      config.out_dir = field<std::string>(paths, "out_dir", config.out_dir);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  validate(config);
  return config;
}

RunConfig load_run_config(const std::string& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig config = run_config_from_json(buffer.str());
  if (check_paths) {
    for (const auto& p : {config.events_path, config.environment_path}) {
      if (!p.empty() && !std::filesystem::exists(p)) {
        throw DataError("config references missing file '" + p + "'");
      }
    }
  }
  return config;
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << run_config_to_json(config) << '\n';
}

}  // namespace tabulatime
