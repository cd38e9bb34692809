#pragma once

#include <string>
#include <vector>

#include "tabulatime/tensor.hpp"

namespace tabulatime {

// A batch of aligned multichannel series windows, values (B, N, L) in native
// units until instance_normalize is applied.
struct SeriesBatch {
  Tensor values;  // (B, N, L)
  std::vector<std::string> channel_names;
  // Per (instance, channel) stats captured by instance_normalize, flattened
  // row-major over (B, N). Empty until normalization.
  std::vector<double> norm_mean;
  std::vector<double> norm_std;
  bool normalized() const { return !norm_mean.empty(); }
};

// Zero-mean / unit-variance per (instance, channel) with population variance.
// Standard deviations below eps are clamped to eps, so a constant channel
// normalizes to all zeros instead of NaN. Stats stay with the result for
// later denormalization; each instance uses only its own values.
SeriesBatch instance_normalize(const SeriesBatch& batch, double eps = 1e-5);

// Maps per-channel model outputs (B, N, H) back to native units with the
// stats captured at normalization time. H may differ from L.
Tensor denormalize(const SeriesBatch& normalized, const Tensor& outputs);

// Applies the batch's captured stats to other values from the same windows
// (e.g. forecast targets), putting them on the model's normalized scale.
Tensor normalize_like(const SeriesBatch& normalized, const Tensor& values);

// Sliding windows along the last axis: (B, N, L) -> (B, N, T, P) with
// T = floor((L - patch_size) / stride) + 1. Values past the last full patch
// are dropped. L < patch_size is a DataError. Data preparation only; the
// result is never tracked.
Tensor patch(const Tensor& values, std::int64_t patch_size,
             std::int64_t stride);

// One linear projection shared by every channel and patch:
// (B,N,T,P) x (P,C) -> (B,N,T,C). Gradients flow into the projection.
Tensor embed_patches(const Tensor& windows, const Tensor& projection);

}  // namespace tabulatime
