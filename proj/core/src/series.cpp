#include "tabulatime/series.hpp"

#include <cmath>

#include "tabulatime/errors.hpp"

namespace tabulatime {

namespace {
std::size_t usize(std::int64_t v) { return static_cast<std::size_t>(v); }
}  // namespace

SeriesBatch instance_normalize(const SeriesBatch& batch, double eps) {
  if (batch.values.rank() != 3) {
    throw DimensionError("instance_normalize: values must be (B,N,L), got " +
                         shape_str(batch.values.shape()));
  }
  if (batch.normalized()) {
    throw StateError("instance_normalize: batch is already normalized");
  }
  if (eps <= 0.0) throw ContractError("instance_normalize: eps must be > 0");
  const auto b_count = batch.values.dim(0);
  const auto n_count = batch.values.dim(1);
  const auto length = batch.values.dim(2);
  if (length == 0) throw DataError("instance_normalize: empty series");

  SeriesBatch out;
  out.channel_names = batch.channel_names;
  out.norm_mean.resize(usize(b_count * n_count));
  out.norm_std.resize(usize(b_count * n_count));
  std::vector<double> values(batch.values.data().size());
  const auto& in = batch.values.data();
  for (std::int64_t b = 0; b < b_count; ++b) {
    for (std::int64_t n = 0; n < n_count; ++n) {
      const auto row = usize((b * n_count + n) * length);
      double mean = 0.0;
      for (std::int64_t t = 0; t < length; ++t) mean += in[row + usize(t)];
      mean /= static_cast<double>(length);
      double var = 0.0;
      for (std::int64_t t = 0; t < length; ++t) {
        const double d = in[row + usize(t)] - mean;
        var += d * d;
      }
      var /= static_cast<double>(length);
      double std_dev = std::sqrt(var);
      if (std_dev < eps) std_dev = eps;
      out.norm_mean[usize(b * n_count + n)] = mean;
      out.norm_std[usize(b * n_count + n)] = std_dev;
      for (std::int64_t t = 0; t < length; ++t) {
        values[row + usize(t)] = (in[row + usize(t)] - mean) / std_dev;
      }
    }
  }
  out.values = Tensor({b_count, n_count, length}, std::move(values));
  return out;
}

Tensor denormalize(const SeriesBatch& normalized, const Tensor& outputs) {
  if (!normalized.normalized()) {
    throw StateError("denormalize: batch has no normalization stats");
  }
  if (outputs.rank() != 3) {
    throw DimensionError("denormalize: outputs must be (B,N,H), got " +
                         shape_str(outputs.shape()));
  }
  const auto b_count = outputs.dim(0);
  const auto n_count = outputs.dim(1);
  const auto horizon = outputs.dim(2);
  if (usize(b_count * n_count) != normalized.norm_mean.size()) {
    throw DimensionError("denormalize: stats cover " +
                         std::to_string(normalized.norm_mean.size()) +
                         " series, outputs have " +
                         std::to_string(b_count * n_count));
  }
  std::vector<double> values(outputs.data().size());
  const auto& in = outputs.data();
  for (std::int64_t b = 0; b < b_count; ++b) {
    for (std::int64_t n = 0; n < n_count; ++n) {
      const auto s = usize(b * n_count + n);
      const auto row = usize((b * n_count + n) * horizon);
      for (std::int64_t h = 0; h < horizon; ++h) {
        values[row + usize(h)] =
            in[row + usize(h)] * normalized.norm_std[s] +
            normalized.norm_mean[s];
      }
    }
  }
  return Tensor({b_count, n_count, horizon}, std::move(values));
}

Tensor normalize_like(const SeriesBatch& normalized, const Tensor& values) {
  if (!normalized.normalized()) {
    throw StateError("normalize_like: batch has no normalization stats");
  }
  if (values.rank() != 3) {
    throw DimensionError("normalize_like: values must be (B,N,H), got " +
                         shape_str(values.shape()));
  }
  const auto b_count = values.dim(0);
  const auto n_count = values.dim(1);
  const auto horizon = values.dim(2);
  if (usize(b_count * n_count) != normalized.norm_mean.size()) {
    throw DimensionError("normalize_like: stats cover " +
                         std::to_string(normalized.norm_mean.size()) +
                         " series, values have " +
                         std::to_string(b_count * n_count));
  }
  std::vector<double> out(values.data().size());
  const auto& in = values.data();
  for (std::int64_t b = 0; b < b_count; ++b) {
    for (std::int64_t n = 0; n < n_count; ++n) {
      const auto s = usize(b * n_count + n);
      const auto row = usize((b * n_count + n) * horizon);
      for (std::int64_t h = 0; h < horizon; ++h) {
        out[row + usize(h)] =
            (in[row + usize(h)] - normalized.norm_mean[s]) /
            normalized.norm_std[s];
      }
    }
  }
  return Tensor({b_count, n_count, horizon}, std::move(out));
}

Tensor patch(const Tensor& values, std::int64_t patch_size,
             std::int64_t stride) {
  if (values.rank() != 3) {
    throw DimensionError("patch: values must be (B,N,L), got " +
                         shape_str(values.shape()));
  }
  if (patch_size <= 0 || stride <= 0) {
    throw ContractError("patch: patch_size and stride must be positive");
  }
  const auto b_count = values.dim(0);
  const auto n_count = values.dim(1);
  const auto length = values.dim(2);
  if (length < patch_size) {
    throw DataError("patch: series length " + std::to_string(length) +
                    " is shorter than patch size " +
                    std::to_string(patch_size));
  }
  const auto t_count = (length - patch_size) / stride + 1;
  std::vector<double> out(usize(b_count * n_count * t_count * patch_size));
  const auto& in = values.data();
  std::size_t w = 0;
  for (std::int64_t b = 0; b < b_count; ++b) {
    for (std::int64_t n = 0; n < n_count; ++n) {
      const auto row = usize((b * n_count + n) * length);
      for (std::int64_t t = 0; t < t_count; ++t) {
        const auto start = row + usize(t * stride);
        for (std::int64_t p = 0; p < patch_size; ++p) {
          out[w++] = in[start + usize(p)];
        }
      }
    }
  }
  return Tensor({b_count, n_count, t_count, patch_size}, std::move(out));
}

Tensor embed_patches(const Tensor& windows, const Tensor& projection) {
  if (windows.rank() != 4) {
    throw DimensionError("embed_patches: windows must be (B,N,T,P), got " +
                         shape_str(windows.shape()));
  }
  if (projection.rank() != 2 || projection.dim(0) != windows.dim(3)) {
    throw DimensionError("embed_patches: projection " +
                         shape_str(projection.shape()) +
                         " does not accept patches of width " +
                         std::to_string(windows.dim(3)));
  }
  const auto b_count = windows.dim(0);
  const auto n_count = windows.dim(1);
  const auto t_count = windows.dim(2);
  const auto p_size = windows.dim(3);
  Tensor flat = reshape(windows, {b_count * n_count * t_count, p_size});
  Tensor projected = matmul(flat, projection);
  return reshape(projected, {b_count, n_count, t_count, projection.dim(1)});
}

}  // namespace tabulatime
