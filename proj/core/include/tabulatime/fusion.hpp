#pragma once

#include <random>

#include "tabulatime/tensor.hpp"

namespace tabulatime {

// Collapses encoded series features (B,N,T,C) to one vector per sample by
// averaging over the embedding dimension, keeping a slot per (channel, step):
// result (B, N*T).
Tensor pool_series(const Tensor& features);

// Gated fusion over a feature vector: squeeze to a bottleneck with ReLU,
// expand back with sigmoid, multiply the input by the resulting per-feature
// gate. No biases, so a zero input stays zero and the gate is a pure
// function of the features.
struct AttentionGateParams {
  Tensor w1;  // (F, H)
  Tensor w2;  // (H, F)
  // bottleneck 0 picks ceil(F / 4).
  static AttentionGateParams init(std::int64_t features,
                                  std::int64_t bottleneck,
                                  std::mt19937_64& rng);
};
struct FuseResult {
  Tensor fused;  // (B, F): gate * input
  Tensor gate;   // (B, F): sigmoid activations, kept for interpretability
};
FuseResult fuse(const Tensor& features, const AttentionGateParams& params);

// Two-layer ReLU MLP with biases.
struct MlpHead {
  Tensor w1, b1;  // (in, hidden), (hidden)
  Tensor w2, b2;  // (hidden, out), (out)
  static MlpHead init(std::int64_t in, std::int64_t hidden, std::int64_t out,
                      std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;  // (B, in) -> (B, out)
};

// Shared linear readout for forecasting: every channel's (T,C) feature block
// maps through the same (T*C, H) projection plus bias.
struct ForecastHead {
  Tensor w;  // (T*C, H)
  Tensor b;  // (H)
  static ForecastHead init(std::int64_t flat_features, std::int64_t horizon,
                           std::mt19937_64& rng);
};
// features (B,N,T,C) -> (B,N,H).
Tensor forecast_outputs(const Tensor& features, const ForecastHead& head);

}  // namespace tabulatime
