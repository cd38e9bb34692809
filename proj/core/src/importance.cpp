#include "tabulatime/importance.hpp"

#include <algorithm>
#include <cmath>

#include "tabulatime/errors.hpp"
#include "tabulatime/rand.hpp"

namespace tabulatime {

std::vector<FeatureGroup> feature_groups(const EncodedTabular& encoded) {
  std::vector<FeatureGroup> groups;
  std::vector<bool> claimed(encoded.feature_names.size(), false);
  for (const auto& [source, columns] : encoded.groups) {
    FeatureGroup group;
    group.name = source;
    group.columns = columns;
    for (auto c : columns) claimed[static_cast<std::size_t>(c)] = true;
    groups.push_back(std::move(group));
  }
  for (std::size_t i = 0; i < encoded.feature_names.size(); ++i) {
    if (claimed[i]) continue;
    groups.push_back({encoded.feature_names[i],
                      {static_cast<std::int64_t>(i)}});
  }
  // Encoded order, not map order, so reports read like the schema.
  std::sort(groups.begin(), groups.end(),
            [](const FeatureGroup& a, const FeatureGroup& b) {
              return a.columns.front() < b.columns.front();
            });
  return groups;
}

void permute_columns(Tensor& matrix, const std::vector<std::int64_t>& columns,
                     std::mt19937_64& rng) {
  if (matrix.rank() != 2) throw DimensionError("expected a (rows, cols) matrix");
  std::int64_t rows = matrix.shape()[0], cols = matrix.shape()[1];
  for (auto c : columns) {
    if (c < 0 || c >= cols) throw ContractError("column index out of range");
  }
  std::vector<std::int64_t> perm =
      random_permutation(static_cast<std::int64_t>(rows), rng);
  std::vector<double> scratch(static_cast<std::size_t>(rows));
  auto& data = matrix.raw();
  for (auto c : columns) {
    for (std::int64_t r = 0; r < rows; ++r) {
      scratch[static_cast<std::size_t>(r)] =
          data[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)] *
                                            cols +
                                        c)];
    }
    for (std::int64_t r = 0; r < rows; ++r) {
      data[static_cast<std::size_t>(r * cols + c)] =
          scratch[static_cast<std::size_t>(r)];
    }
  }
}

void permute_patch(Tensor& windows, std::int64_t patch_index,
                   std::mt19937_64& rng) {
  if (windows.rank() != 4) {
    throw DimensionError("expected (batch, channels, patches, patch) windows");
  }
  std::int64_t B = windows.shape()[0], N = windows.shape()[1],
               T = windows.shape()[2], P = windows.shape()[3];
  if (patch_index < 0 || patch_index >= T) {
    throw ContractError("patch index out of range");
  }
  std::vector<std::int64_t> perm = random_permutation(B, rng);
  auto& data = windows.raw();
  std::vector<double> scratch(static_cast<std::size_t>(B * N * P));
  for (std::int64_t b = 0; b < B; ++b) {
    std::int64_t src = perm[static_cast<std::size_t>(b)];
    for (std::int64_t n = 0; n < N; ++n) {
      for (std::int64_t p = 0; p < P; ++p) {
        scratch[static_cast<std::size_t>((b * N + n) * P + p)] =
            data[static_cast<std::size_t>(((src * N + n) * T + patch_index) *
                                              P +
                                          p)];
      }
    }
  }
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t n = 0; n < N; ++n) {
      for (std::int64_t p = 0; p < P; ++p) {
        data[static_cast<std::size_t>(((b * N + n) * T + patch_index) * P +
                                      p)] =
            scratch[static_cast<std::size_t>((b * N + n) * P + p)];
      }
    }
  }
}

namespace {

ImportanceReport build_report(
    const std::string& metric_name, double baseline,
    std::vector<ImportanceEntry> entries) {
  for (auto& entry : entries) {
    double sum = 0.0;
    for (double d : entry.drops) sum += d;
    entry.mean_drop = sum / static_cast<double>(entry.drops.size());
    double var = 0.0;
    for (double d : entry.drops) {
      var += (d - entry.mean_drop) * (d - entry.mean_drop);
    }
    entry.std_drop =
        std::sqrt(var / static_cast<double>(entry.drops.size()));
    entry.baseline = baseline;
  }
  std::sort(entries.begin(), entries.end(),
            [](const ImportanceEntry& a, const ImportanceEntry& b) {
              return a.mean_drop > b.mean_drop;
            });
  ImportanceReport report;
  report.metric = metric_name;
  report.baseline = baseline;
  report.entries = std::move(entries);
  return report;
}

}  // namespace

ImportanceReport permutation_importance(
    const std::function<double(const Tensor&)>& metric_fn,
    const Tensor& matrix, const std::vector<FeatureGroup>& groups, int repeats,
    std::uint64_t seed, bool higher_is_better,
    const std::string& metric_name) {
  if (repeats <= 0) throw ContractError("repeats must be positive");
  if (groups.empty()) throw ContractError("no feature groups to score");
  double baseline = metric_fn(matrix);
  double sign = higher_is_better ? 1.0 : -1.0;
  std::vector<ImportanceEntry> entries;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    ImportanceEntry entry;
    entry.name = groups[g].name;
    for (int r = 0; r < repeats; ++r) {
      std::mt19937_64 rng(derive_seed(seed, "perm_feature",
                                      static_cast<std::uint64_t>(g),
                                      static_cast<std::uint64_t>(r)));
      Tensor shuffled = matrix.detached();
      permute_columns(shuffled, groups[g].columns, rng);
      entry.drops.push_back(sign * (baseline - metric_fn(shuffled)));
    }
    entries.push_back(std::move(entry));
  }
  return build_report(metric_name, baseline, std::move(entries));
}

ImportanceReport step_importance(
    const std::function<double(const Tensor&)>& metric_fn,
    const Tensor& windows, int repeats, std::uint64_t seed,
    bool higher_is_better, const std::string& metric_name) {
  if (repeats <= 0) throw ContractError("repeats must be positive");
  if (windows.rank() != 4) {
    throw DimensionError("expected (batch, channels, patches, patch) windows");
  }
  std::int64_t T = windows.shape()[2];
  double baseline = metric_fn(windows);
  double sign = higher_is_better ? 1.0 : -1.0;
  std::vector<ImportanceEntry> entries;
  for (std::int64_t day = 1; day <= T; ++day) {
    std::int64_t patch = T - day;  // day 1 = most recent = last patch
    ImportanceEntry entry;
    entry.name = "day_" + std::to_string(day);
    for (int r = 0; r < repeats; ++r) {
      std::mt19937_64 rng(derive_seed(seed, "perm_step",
                                      static_cast<std::uint64_t>(day),
                                      static_cast<std::uint64_t>(r)));
      Tensor shuffled = windows.detached();
      permute_patch(shuffled, patch, rng);
      entry.drops.push_back(sign * (baseline - metric_fn(shuffled)));
    }
    entries.push_back(std::move(entry));
  }
  return build_report(metric_name, baseline, std::move(entries));
}

}  // namespace tabulatime
