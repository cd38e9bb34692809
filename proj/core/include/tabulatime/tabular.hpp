#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tabulatime/tensor.hpp"

namespace tabulatime {

enum class ColumnKind { Numeric, Categorical };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> categories;  // categorical only; order is fixed
};

// Typed column store. Numeric missing = NaN; categorical missing = -1.
struct Column {
  ColumnSchema schema;
  std::vector<double> numeric;  // when kind == Numeric
  std::vector<int> codes;       // when kind == Categorical
  std::int64_t rows() const;
  bool missing_at(std::int64_t row) const;
};

struct TabularData {
  std::vector<Column> columns;
  std::int64_t rows() const;
  std::int64_t missing_count() const;
  TabularData select_rows(const std::vector<std::int64_t>& indices) const;

  // Parses string cells (row-major, aligned with schema order) into typed
  // columns. Empty cells are missing. Bad numerics and unknown categories are
  // DataErrors naming the column and offending value.
  static TabularData from_strings(
      const std::vector<ColumnSchema>& schema,
      const std::vector<std::vector<std::string>>& rows);
};

struct ImputeConfig {
  std::string method = "knn";  // "mean" | "knn" | "mice"
  int k = 5;
  int mice_iterations = 5;
};

// Frozen imputation state, always fit on training rows only.
struct ImputerState {
  std::string method;
  ImputeConfig config;
  // Column-parallel fallback fills (mean / modal code).
  std::vector<double> fill_numeric;
  std::vector<int> fill_code;
  // knn: donor rows plus standardization stats for the distance metric.
  TabularData reference;
  std::vector<double> ref_mean, ref_std;
  // mice: per-column linear model over the other columns (+ intercept last),
  // empty when the column was complete at fit time.
  std::vector<std::vector<double>> regressions;
  std::vector<std::string> warnings;
};

ImputerState fit_imputer(const TabularData& train, const ImputeConfig& config);
// Fills every missing cell; the result has no NaN / -1 left.
TabularData impute(const TabularData& data, const ImputerState& state);

// One-hot encoding keyed to the schema: numeric columns pass through as one
// feature, categorical columns expand to one indicator per category (named
// "col=cat"). Input must be complete (post-imputation).
struct EncodedTabular {
  Tensor matrix;  // (rows, features)
  std::vector<std::string> feature_names;
  std::vector<bool> is_indicator;
  // Raw schema column -> the encoded columns it produced, in schema order.
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> groups;
};
EncodedTabular encode_onehot(const TabularData& data);

// Standardization over the original numeric features only; indicator columns
// keep their 0/1 values so each one-hot group still sums to one.
struct StandardizeStats {
  std::vector<double> mean, std_dev;  // per encoded feature; identity for
                                      // indicators
};
StandardizeStats fit_standardize(const EncodedTabular& train);
void standardize_inplace(EncodedTabular& data, const StandardizeStats& stats);

// impute -> encode -> standardize with every statistic frozen on the fit
// split.
class TabularTransform {
 public:
  void fit(const TabularData& train, const ImputeConfig& config);
  EncodedTabular transform(const TabularData& data) const;
  bool fitted() const { return fitted_; }
  const ImputerState& imputer() const;
  const StandardizeStats& stats() const;
  const std::vector<std::string>& warnings() const;

  std::string to_json() const;
  static TabularTransform from_json(const std::string& text);

 private:
  bool fitted_ = false;
  ImputerState imputer_;
  StandardizeStats stats_;
};

}  // namespace tabulatime
