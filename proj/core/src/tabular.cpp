#include "tabulatime/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "json.hpp"
#include "tabulatime/errors.hpp"

namespace tabulatime {

namespace {

std::size_t usize(std::int64_t v) { return static_cast<std::size_t>(v); }

bool is_missing_numeric(double v) { return std::isnan(v); }

// Solves A x = b in place via Gaussian elimination with partial pivoting.
// Returns false when the system is numerically singular.
bool solve_linear(std::vector<double>& a, std::vector<double>& b,
                  std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::fabs(a[col * n + col]);
    for (std::size_t row = col + 1; row < n; ++row) {
      const double cand = std::fabs(a[row * n + col]);
      if (cand > best) {
        best = cand;
        pivot = row;
      }
    }
    if (best < 1e-10) return false;
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a[col * n + j], a[pivot * n + j]);
      }
      std::swap(b[col], b[pivot]);
    }
    const double diag = a[col * n + col];
    for (std::size_t row = col + 1; row < n; ++row) {
      const double factor = a[row * n + col] / diag;
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) {
        a[row * n + j] -= factor * a[col * n + j];
      }
      b[row] -= factor * b[col];
    }
  }
  for (std::size_t col = n; col-- > 0;) {
    double acc = b[col];
    for (std::size_t j = col + 1; j < n; ++j) acc -= a[col * n + j] * b[j];
    b[col] = acc / a[col * n + col];
  }
  return true;
}

double column_mean(const std::vector<double>& values) {
  double total = 0.0;
  std::int64_t count = 0;
  for (double v : values) {
    if (!is_missing_numeric(v)) {
      total += v;
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

int column_mode(const std::vector<int>& codes) {
  std::map<int, std::int64_t> counts;
  for (int c : codes) {
    if (c >= 0) ++counts[c];
  }
  int best = 0;
  std::int64_t best_count = -1;
  for (const auto& [code, count] : counts) {
    if (count > best_count) {  // map order makes ties pick the smallest code
      best = code;
      best_count = count;
    }
  }
  return best;
}

// Current cell value as a double (codes cast), assuming no missing left or
// substituting the fill for missing cells.
double cell_as_double(const Column& col, std::int64_t row, double fill_numeric,
                      int fill_code) {
  if (col.schema.kind == ColumnKind::Numeric) {
    const double v = col.numeric[usize(row)];
    return is_missing_numeric(v) ? fill_numeric : v;
  }
  const int c = col.codes[usize(row)];
  return static_cast<double>(c < 0 ? fill_code : c);
}

void fill_with_constant(Column& col, double fill_numeric, int fill_code) {
  if (col.schema.kind == ColumnKind::Numeric) {
    for (auto& v : col.numeric) {
      if (is_missing_numeric(v)) v = fill_numeric;
    }
  } else {
    for (auto& c : col.codes) {
      if (c < 0) c = fill_code;
    }
  }
}

void set_cell_from_double(Column& col, std::int64_t row, double value) {
  if (col.schema.kind == ColumnKind::Numeric) {
    col.numeric[usize(row)] = value;
  } else {
    const auto count = static_cast<int>(col.schema.categories.size());
    int code = static_cast<int>(std::llround(value));
    code = std::clamp(code, 0, count > 0 ? count - 1 : 0);
    col.codes[usize(row)] = code;
  }
}

// One full round of chained-equation updates using the stored models.
// `originally_missing[c]` flags the cells that regression may overwrite.
void mice_pass(TabularData& data, const ImputerState& state,
               const std::vector<std::vector<bool>>& originally_missing) {
  const auto n_cols = data.columns.size();
  const auto n_rows = data.rows();
  for (std::size_t c = 0; c < n_cols; ++c) {
    const auto& weights = state.regressions[c];
    if (weights.empty()) continue;
    bool any = false;
    for (std::int64_t r = 0; r < n_rows; ++r) {
      if (originally_missing[c][usize(r)]) {
        any = true;
        break;
      }
    }
    if (!any) continue;
    for (std::int64_t r = 0; r < n_rows; ++r) {
      if (!originally_missing[c][usize(r)]) continue;
      double pred = weights.back();  // intercept
      std::size_t wi = 0;
      for (std::size_t p = 0; p < n_cols; ++p) {
        if (p == c) continue;
        pred += weights[wi++] * cell_as_double(data.columns[p], r,
                                               state.fill_numeric[p],
                                               state.fill_code[p]);
      }
      set_cell_from_double(data.columns[c], r, pred);
    }
  }
}

}  // namespace

// ---- TabularData ----------------------------------------------------------------

std::int64_t Column::rows() const {
  return schema.kind == ColumnKind::Numeric
             ? static_cast<std::int64_t>(numeric.size())
             : static_cast<std::int64_t>(codes.size());
}

bool Column::missing_at(std::int64_t row) const {
  return schema.kind == ColumnKind::Numeric
             ? is_missing_numeric(numeric[usize(row)])
             : codes[usize(row)] < 0;
}

std::int64_t TabularData::rows() const {
  return columns.empty() ? 0 : columns.front().rows();
}

std::int64_t TabularData::missing_count() const {
  std::int64_t count = 0;
  for (const auto& col : columns) {
    for (std::int64_t r = 0; r < col.rows(); ++r) {
      count += col.missing_at(r) ? 1 : 0;
    }
  }
  return count;
}

TabularData TabularData::select_rows(
    const std::vector<std::int64_t>& indices) const {
  TabularData out;
  out.columns.reserve(columns.size());
  for (const auto& col : columns) {
    Column next;
    next.schema = col.schema;
    if (col.schema.kind == ColumnKind::Numeric) {
      next.numeric.reserve(indices.size());
      for (auto i : indices) next.numeric.push_back(col.numeric[usize(i)]);
    } else {
      next.codes.reserve(indices.size());
      for (auto i : indices) next.codes.push_back(col.codes[usize(i)]);
    }
    out.columns.push_back(std::move(next));
  }
  return out;
}

TabularData TabularData::from_strings(
    const std::vector<ColumnSchema>& schema,
    const std::vector<std::vector<std::string>>& rows) {
  TabularData out;
  out.columns.reserve(schema.size());
  for (const auto& cs : schema) {
    Column col;
    col.schema = cs;
    out.columns.push_back(std::move(col));
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != schema.size()) {
      throw DataError("row " + std::to_string(r + 1) + " has " +
                      std::to_string(cells.size()) + " cells, schema wants " +
                      std::to_string(schema.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto& col = out.columns[c];
      const std::string& cell = cells[c];
      if (col.schema.kind == ColumnKind::Numeric) {
        if (cell.empty()) {
          col.numeric.push_back(std::numeric_limits<double>::quiet_NaN());
          continue;
        }
        try {
          std::size_t used = 0;
          const double v = std::stod(cell, &used);
          if (used != cell.size()) throw std::invalid_argument(cell);
          col.numeric.push_back(v);
        } catch (const std::exception&) {
          throw DataError("column '" + col.schema.name + "' row " +
                          std::to_string(r + 1) + ": '" + cell +
                          "' is not numeric");
        }
      } else {
        if (cell.empty()) {
          col.codes.push_back(-1);
          continue;
        }
        const auto& cats = col.schema.categories;
        const auto it = std::find(cats.begin(), cats.end(), cell);
        if (it == cats.end()) {
          throw DataError("column '" + col.schema.name + "' row " +
                          std::to_string(r + 1) + ": unknown category '" +
                          cell + "'");
        }
        col.codes.push_back(static_cast<int>(it - cats.begin()));
      }
    }
  }
  return out;
}

// ---- imputation ------------------------------------------------------------------

ImputerState fit_imputer(const TabularData& train, const ImputeConfig& config) {
  if (train.rows() == 0) throw DataError("fit_imputer: no training rows");
  if (config.method != "mean" && config.method != "knn" &&
      config.method != "mice") {
    throw ContractError("fit_imputer: unknown method '" + config.method + "'");
  }
  ImputerState state;
  state.method = config.method;
  state.config = config;
  const auto n_cols = train.columns.size();
  state.fill_numeric.resize(n_cols, 0.0);
  state.fill_code.resize(n_cols, 0);
  for (std::size_t c = 0; c < n_cols; ++c) {
    const auto& col = train.columns[c];
    if (col.schema.kind == ColumnKind::Numeric) {
      state.fill_numeric[c] = column_mean(col.numeric);
    } else {
      state.fill_code[c] = column_mode(col.codes);
    }
  }

  if (config.method == "knn") {
    if (config.k <= 0) throw ContractError("fit_imputer: k must be positive");
    for (std::size_t c = 0; c < n_cols; ++c) {
      const auto& col = train.columns[c];
      std::int64_t observed = 0;
      for (std::int64_t r = 0; r < col.rows(); ++r) {
        observed += col.missing_at(r) ? 0 : 1;
      }
      if (observed < config.k) {
        throw DataError("fit_imputer: column '" + col.schema.name +
                        "' has only " + std::to_string(observed) +
                        " observed training values, need at least k=" +
                        std::to_string(config.k));
      }
    }
    state.reference = train;
    state.ref_mean.resize(n_cols, 0.0);
    state.ref_std.resize(n_cols, 1.0);
    for (std::size_t c = 0; c < n_cols; ++c) {
      const auto& col = train.columns[c];
      if (col.schema.kind != ColumnKind::Numeric) continue;
      const double mean = column_mean(col.numeric);
      double var = 0.0;
      std::int64_t count = 0;
      for (double v : col.numeric) {
        if (!is_missing_numeric(v)) {
          var += (v - mean) * (v - mean);
          ++count;
        }
      }
      var = count > 0 ? var / static_cast<double>(count) : 0.0;
      state.ref_mean[c] = mean;
      state.ref_std[c] = var < 1e-24 ? 1.0 : std::sqrt(var);
    }
  }

  if (config.method == "mice") {
    if (config.mice_iterations <= 0) {
      throw ContractError("fit_imputer: mice_iterations must be positive");
    }
    // Chained equations on a working copy initialized with mean/mode fills.
    TabularData work = train;
    std::vector<std::vector<bool>> missing_mask(n_cols);
    for (std::size_t c = 0; c < n_cols; ++c) {
      const auto& col = train.columns[c];
      missing_mask[c].resize(usize(col.rows()));
      for (std::int64_t r = 0; r < col.rows(); ++r) {
        missing_mask[c][usize(r)] = col.missing_at(r);
      }
      fill_with_constant(work.columns[c], state.fill_numeric[c],
                         state.fill_code[c]);
    }
    state.regressions.assign(n_cols, {});
    const auto n_rows = train.rows();
    for (int iter = 0; iter < config.mice_iterations; ++iter) {
      for (std::size_t c = 0; c < n_cols; ++c) {
        // Fit on the rows where this column was genuinely observed.
        std::vector<std::int64_t> fit_rows;
        for (std::int64_t r = 0; r < n_rows; ++r) {
          if (!missing_mask[c][usize(r)]) fit_rows.push_back(r);
        }
        const std::size_t p = n_cols;  // predictors (n_cols - 1) + intercept
        if (fit_rows.size() <= p) {
          if (iter == 0) {
            state.warnings.push_back("mice: column '" +
                                     train.columns[c].schema.name +
                                     "' has too few observed rows; using the "
                                     "mean fill");
          }
          continue;
        }
        std::vector<double> xtx(p * p, 0.0);
        std::vector<double> xty(p, 0.0);
        std::vector<double> row_values(p, 0.0);
        for (auto r : fit_rows) {
          std::size_t wi = 0;
          for (std::size_t q = 0; q < n_cols; ++q) {
            if (q == c) continue;
            row_values[wi++] = cell_as_double(work.columns[q], r, 0.0, 0);
          }
          row_values[p - 1] = 1.0;
          const double y = cell_as_double(work.columns[c], r, 0.0, 0);
          for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = i; j < p; ++j) {
              xtx[i * p + j] += row_values[i] * row_values[j];
            }
            xty[i] += row_values[i] * y;
          }
        }
        for (std::size_t i = 0; i < p; ++i) {
          for (std::size_t j = 0; j < i; ++j) xtx[i * p + j] = xtx[j * p + i];
        }
        std::vector<double> beta = xty;
        if (!solve_linear(xtx, beta, p)) {
          if (iter == 0) {
            state.warnings.push_back("mice: singular system for column '" +
                                     train.columns[c].schema.name +
                                     "'; using the mean fill");
          }
          state.regressions[c].clear();
          continue;
        }
        state.regressions[c] = beta;
        // Refresh this column's missing cells before the next column fits.
        for (std::int64_t r = 0; r < n_rows; ++r) {
          if (!missing_mask[c][usize(r)]) continue;
          double pred = beta.back();
          std::size_t wi = 0;
          for (std::size_t q = 0; q < n_cols; ++q) {
            if (q == c) continue;
            pred += beta[wi++] * cell_as_double(work.columns[q], r, 0.0, 0);
          }
          set_cell_from_double(work.columns[c], r, pred);
        }
      }
    }
  }
  return state;
}

namespace {

TabularData impute_mean(const TabularData& data, const ImputerState& state) {
  TabularData out = data;
  for (std::size_t c = 0; c < out.columns.size(); ++c) {
    fill_with_constant(out.columns[c], state.fill_numeric[c],
                       state.fill_code[c]);
  }
  return out;
}

TabularData impute_knn(const TabularData& data, const ImputerState& state) {
  TabularData out = data;
  const auto n_cols = data.columns.size();
  const auto n_ref = state.reference.rows();
  const double numeric_total = static_cast<double>(std::count_if(
      data.columns.begin(), data.columns.end(), [](const Column& col) {
        return col.schema.kind == ColumnKind::Numeric;
      }));
  for (std::int64_t r = 0; r < data.rows(); ++r) {
    // Distances are shared across the row's missing cells; donors differ per
    // column (a donor must have the target observed).
    std::vector<double> dist(usize(n_ref),
                             std::numeric_limits<double>::infinity());
    bool row_has_missing = false;
    for (std::size_t c = 0; c < n_cols; ++c) {
      row_has_missing = row_has_missing || data.columns[c].missing_at(r);
    }
    if (!row_has_missing) continue;
    for (std::int64_t d = 0; d < n_ref; ++d) {
      double acc = 0.0;
      std::int64_t shared = 0;
      for (std::size_t c = 0; c < n_cols; ++c) {
        const auto& col = data.columns[c];
        if (col.schema.kind != ColumnKind::Numeric) continue;
        const auto& ref_col = state.reference.columns[c];
        if (col.missing_at(r) || ref_col.missing_at(d)) continue;
        const double a = (col.numeric[usize(r)] - state.ref_mean[c]) /
                         state.ref_std[c];
        const double b = (ref_col.numeric[usize(d)] - state.ref_mean[c]) /
                         state.ref_std[c];
        acc += (a - b) * (a - b);
        ++shared;
      }
      if (shared > 0) {
        dist[usize(d)] = acc * numeric_total / static_cast<double>(shared);
      }
    }
    std::vector<std::int64_t> order(usize(n_ref));
    for (std::int64_t d = 0; d < n_ref; ++d) order[usize(d)] = d;
    std::stable_sort(order.begin(), order.end(),
                     [&dist](std::int64_t a, std::int64_t b) {
                       return dist[usize(a)] < dist[usize(b)];
                     });
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (!data.columns[c].missing_at(r)) continue;
      const auto& ref_col = state.reference.columns[c];
      // Walk donors in distance order, keeping the k nearest with the target
      // column observed.
      std::vector<std::int64_t> donors;
      for (auto d : order) {
        if (std::isinf(dist[usize(d)])) break;
        if (ref_col.missing_at(d)) continue;
        donors.push_back(d);
        if (static_cast<int>(donors.size()) == state.config.k) break;
      }
      if (donors.empty()) {
        // No usable neighbor; degrade to the mean/mode fill.
        if (out.columns[c].schema.kind == ColumnKind::Numeric) {
          out.columns[c].numeric[usize(r)] = state.fill_numeric[c];
        } else {
          out.columns[c].codes[usize(r)] = state.fill_code[c];
        }
        continue;
      }
      if (out.columns[c].schema.kind == ColumnKind::Numeric) {
        double total = 0.0;
        for (auto d : donors) total += ref_col.numeric[usize(d)];
        out.columns[c].numeric[usize(r)] =
            total / static_cast<double>(donors.size());
      } else {
        std::map<int, std::int64_t> counts;
        for (auto d : donors) ++counts[ref_col.codes[usize(d)]];
        int best = state.fill_code[c];
        std::int64_t best_count = -1;
        for (const auto& [code, count] : counts) {
          if (count > best_count) {
            best = code;
            best_count = count;
          }
        }
        out.columns[c].codes[usize(r)] = best;
      }
    }
  }
  return out;
}

TabularData impute_mice(const TabularData& data, const ImputerState& state) {
  TabularData out = data;
  const auto n_cols = data.columns.size();
  std::vector<std::vector<bool>> missing_mask(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    missing_mask[c].resize(usize(data.rows()));
    for (std::int64_t r = 0; r < data.rows(); ++r) {
      missing_mask[c][usize(r)] = data.columns[c].missing_at(r);
    }
    fill_with_constant(out.columns[c], state.fill_numeric[c],
                       state.fill_code[c]);
  }
  for (int iter = 0; iter < state.config.mice_iterations; ++iter) {
    mice_pass(out, state, missing_mask);
  }
  return out;
}

}  // namespace

TabularData impute(const TabularData& data, const ImputerState& state) {
  if (data.columns.size() != state.fill_numeric.size()) {
    throw DimensionError("impute: " + std::to_string(data.columns.size()) +
                         " columns vs state fitted on " +
                         std::to_string(state.fill_numeric.size()));
  }
  TabularData out;
  if (state.method == "mean") {
    out = impute_mean(data, state);
  } else if (state.method == "knn") {
    out = impute_knn(data, state);
  } else if (state.method == "mice") {
    out = impute_mice(data, state);
  } else {
    throw StateError("impute: state carries unknown method '" + state.method +
                     "'");
  }
  if (out.missing_count() != 0) {
    throw StateError("impute: missing values survived imputation");
  }
  return out;
}

// ---- encoding / standardization ------------------------------------------------------

EncodedTabular encode_onehot(const TabularData& data) {
  if (data.missing_count() != 0) {
    throw ContractError("encode_onehot: input still has missing values");
  }
  EncodedTabular out;
  std::int64_t width = 0;
  for (const auto& col : data.columns) {
    std::vector<std::int64_t> group_cols;
    if (col.schema.kind == ColumnKind::Numeric) {
      group_cols.push_back(width);
      out.feature_names.push_back(col.schema.name);
      out.is_indicator.push_back(false);
      ++width;
    } else {
      if (col.schema.categories.empty()) {
        throw ContractError("encode_onehot: categorical column '" +
                            col.schema.name + "' has no categories");
      }
      for (const auto& cat : col.schema.categories) {
        group_cols.push_back(width);
        out.feature_names.push_back(col.schema.name + "=" + cat);
        out.is_indicator.push_back(true);
        ++width;
      }
    }
    out.groups.emplace_back(col.schema.name, std::move(group_cols));
  }
  const auto n_rows = data.rows();
  std::vector<double> matrix(usize(n_rows * width), 0.0);
  std::int64_t offset = 0;
  for (const auto& col : data.columns) {
    if (col.schema.kind == ColumnKind::Numeric) {
      for (std::int64_t r = 0; r < n_rows; ++r) {
        matrix[usize(r * width + offset)] = col.numeric[usize(r)];
      }
      ++offset;
    } else {
      const auto cats = static_cast<std::int64_t>(col.schema.categories.size());
      for (std::int64_t r = 0; r < n_rows; ++r) {
        matrix[usize(r * width + offset + col.codes[usize(r)])] = 1.0;
      }
      offset += cats;
    }
  }
  out.matrix = Tensor({n_rows, width}, std::move(matrix));
  return out;
}

StandardizeStats fit_standardize(const EncodedTabular& train) {
  const auto rows = train.matrix.dim(0);
  const auto width = train.matrix.dim(1);
  if (rows == 0) throw DataError("fit_standardize: no rows");
  StandardizeStats stats;
  stats.mean.assign(usize(width), 0.0);
  stats.std_dev.assign(usize(width), 1.0);
  for (std::int64_t c = 0; c < width; ++c) {
    if (train.is_indicator[usize(c)]) continue;
    double mean = 0.0;
    for (std::int64_t r = 0; r < rows; ++r) {
      mean += train.matrix.data()[usize(r * width + c)];
    }
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (std::int64_t r = 0; r < rows; ++r) {
      const double d = train.matrix.data()[usize(r * width + c)] - mean;
      var += d * d;
    }
    var /= static_cast<double>(rows);
    stats.mean[usize(c)] = mean;
    stats.std_dev[usize(c)] = var < 1e-24 ? 1.0 : std::sqrt(var);
  }
  return stats;
}

void standardize_inplace(EncodedTabular& data, const StandardizeStats& stats) {
  const auto rows = data.matrix.dim(0);
  const auto width = data.matrix.dim(1);
  if (stats.mean.size() != usize(width)) {
    throw DimensionError("standardize: stats cover " +
                         std::to_string(stats.mean.size()) +
                         " features, matrix has " + std::to_string(width));
  }
  auto& values = data.matrix.raw();
  for (std::int64_t c = 0; c < width; ++c) {
    if (data.is_indicator[usize(c)]) continue;
    const double mean = stats.mean[usize(c)];
    const double inv = 1.0 / stats.std_dev[usize(c)];
    for (std::int64_t r = 0; r < rows; ++r) {
      auto& v = values[usize(r * width + c)];
      v = (v - mean) * inv;
    }
  }
}

// ---- TabularTransform ------------------------------------------------------------------

void TabularTransform::fit(const TabularData& train,
                           const ImputeConfig& config) {
  imputer_ = fit_imputer(train, config);
  TabularData complete = impute(train, imputer_);
  EncodedTabular encoded = encode_onehot(complete);
  stats_ = fit_standardize(encoded);
  fitted_ = true;
}

EncodedTabular TabularTransform::transform(const TabularData& data) const {
  if (!fitted_) throw StateError("TabularTransform: transform before fit");
  TabularData complete = impute(data, imputer_);
  EncodedTabular encoded = encode_onehot(complete);
  standardize_inplace(encoded, stats_);
  return encoded;
}

const ImputerState& TabularTransform::imputer() const {
  if (!fitted_) throw StateError("TabularTransform: not fitted");
  return imputer_;
}

const StandardizeStats& TabularTransform::stats() const {
  if (!fitted_) throw StateError("TabularTransform: not fitted");
  return stats_;
}

const std::vector<std::string>& TabularTransform::warnings() const {
  if (!fitted_) throw StateError("TabularTransform: not fitted");
  return imputer_.warnings;
}

namespace {

nlohmann::json schema_to_json(const ColumnSchema& schema) {
  nlohmann::json j;
  j["name"] = schema.name;
  j["kind"] = schema.kind == ColumnKind::Numeric ? "numeric" : "categorical";
  j["categories"] = schema.categories;
  return j;
}

ColumnSchema schema_from_json(const nlohmann::json& j) {
  ColumnSchema schema;
  schema.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "numeric") {
    schema.kind = ColumnKind::Numeric;
  } else if (kind == "categorical") {
    schema.kind = ColumnKind::Categorical;
  } else {
    throw FormatError("unknown column kind '" + kind + "'");
  }
  schema.categories = j.at("categories").get<std::vector<std::string>>();
  return schema;
}

nlohmann::json table_to_json(const TabularData& data) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& col : data.columns) {
    nlohmann::json j;
    j["schema"] = schema_to_json(col.schema);
    if (col.schema.kind == ColumnKind::Numeric) {
      nlohmann::json values = nlohmann::json::array();
      for (double v : col.numeric) {
        if (std::isnan(v)) {
          values.push_back(nullptr);
        } else {
          values.push_back(v);
        }
      }
      j["values"] = std::move(values);
    } else {
      j["codes"] = col.codes;
    }
    cols.push_back(std::move(j));
  }
  return cols;
}

TabularData table_from_json(const nlohmann::json& cols) {
  TabularData data;
  for (const auto& j : cols) {
    Column col;
    col.schema = schema_from_json(j.at("schema"));
    if (col.schema.kind == ColumnKind::Numeric) {
      for (const auto& v : j.at("values")) {
        col.numeric.push_back(v.is_null()
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : v.get<double>());
      }
    } else {
      col.codes = j.at("codes").get<std::vector<int>>();
    }
    data.columns.push_back(std::move(col));
  }
  return data;
}

}  // namespace

std::string TabularTransform::to_json() const {
  if (!fitted_) throw StateError("TabularTransform: serialize before fit");
  nlohmann::json j;
  j["method"] = imputer_.method;
  j["k"] = imputer_.config.k;
  j["mice_iterations"] = imputer_.config.mice_iterations;
  j["fill_numeric"] = imputer_.fill_numeric;
  j["fill_code"] = imputer_.fill_code;
  j["reference"] = table_to_json(imputer_.reference);
  j["ref_mean"] = imputer_.ref_mean;
  j["ref_std"] = imputer_.ref_std;
  j["regressions"] = imputer_.regressions;
  j["warnings"] = imputer_.warnings;
  j["standardize_mean"] = stats_.mean;
  j["standardize_std"] = stats_.std_dev;
  return j.dump();
}

TabularTransform TabularTransform::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tabular transform state: ") + e.what());
  }
  TabularTransform transform;
  try {
    transform.imputer_.method = j.at("method").get<std::string>();
    transform.imputer_.config.method = transform.imputer_.method;
    transform.imputer_.config.k = j.at("k").get<int>();
    transform.imputer_.config.mice_iterations =
        j.at("mice_iterations").get<int>();
    transform.imputer_.fill_numeric =
        j.at("fill_numeric").get<std::vector<double>>();
    transform.imputer_.fill_code = j.at("fill_code").get<std::vector<int>>();
    transform.imputer_.reference = table_from_json(j.at("reference"));
    transform.imputer_.ref_mean = j.at("ref_mean").get<std::vector<double>>();
    transform.imputer_.ref_std = j.at("ref_std").get<std::vector<double>>();
    transform.imputer_.regressions =
        j.at("regressions").get<std::vector<std::vector<double>>>();
    transform.imputer_.warnings =
        j.at("warnings").get<std::vector<std::string>>();
    transform.stats_.mean = j.at("standardize_mean").get<std::vector<double>>();
    transform.stats_.std_dev =
        j.at("standardize_std").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tabular transform state: ") + e.what());
  }
  transform.fitted_ = true;
  return transform;
}

}  // namespace tabulatime
