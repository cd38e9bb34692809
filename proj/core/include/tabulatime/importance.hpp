#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tabulatime/tabular.hpp"
#include "tabulatime/tensor.hpp"

namespace tabulatime {

// Columns that must be permuted together (a one-hot category travels as one
// unit; numeric columns are singleton groups).
struct FeatureGroup {
  std::string name;
  std::vector<std::int64_t> columns;
};

// Builds groups from an encoded design matrix: one group per one-hot source
// column, one per remaining numeric/indicator column.
std::vector<FeatureGroup> feature_groups(const EncodedTabular& encoded);

struct ImportanceEntry {
  std::string name;
  double baseline = 0.0;
  double mean_drop = 0.0;  // baseline - permuted, sign-fixed so larger = more important
  double std_drop = 0.0;
  std::vector<double> drops;  // one per repeat
};

struct ImportanceReport {
  std::string metric;
  double baseline = 0.0;
  std::vector<ImportanceEntry> entries;  // sorted by mean_drop descending
};

// Shuffles the listed columns of `matrix` (rows stay aligned across the
// group's columns: one row permutation is applied to all of them).
void permute_columns(Tensor& matrix, const std::vector<std::int64_t>& columns,
                     std::mt19937_64& rng);

// Swaps patch `patch_index` across samples for every channel: windows is
// (B,N,T,P) and one row permutation of the B axis is applied to that patch.
void permute_patch(Tensor& windows, std::int64_t patch_index,
                   std::mt19937_64& rng);

// metric_fn evaluates the frozen model on a candidate design matrix.
// higher_is_better controls the drop sign so importance is always
// "how much the metric worsens when this group is destroyed".
ImportanceReport permutation_importance(
    const std::function<double(const Tensor&)>& metric_fn,
    const Tensor& matrix, const std::vector<FeatureGroup>& groups, int repeats,
    std::uint64_t seed, bool higher_is_better, const std::string& metric_name);

// Day-step variant: entry d = 1 is the most recent day before the event, so
// day d maps to patch index T - d. metric_fn evaluates on perturbed windows.
ImportanceReport step_importance(
    const std::function<double(const Tensor&)>& metric_fn,
    const Tensor& windows, int repeats, std::uint64_t seed,
    bool higher_is_better, const std::string& metric_name);

}  // namespace tabulatime
