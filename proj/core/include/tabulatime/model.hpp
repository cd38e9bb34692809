#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tabulatime/fusion.hpp"
#include "tabulatime/rwkv.hpp"
#include "tabulatime/tensor.hpp"

namespace tabulatime {

struct ModelConfig {
  std::string task = "classification";  // classification | forecasting
  std::string mode = "full";            // full | tabular_only | series_only
  int layers = 4;
  std::int64_t embed_dim = 128;
  int heads = 4;
  std::int64_t patch_size = 24;
  std::int64_t stride = 24;
  std::int64_t tabular_dim = 31;  // width of the tabular embedding
  std::int64_t head_hidden = 64;
  std::int64_t bottleneck = 0;  // 0 -> ceil(fused_width / 4)
  double dropout = 0.0;
  int classes = 2;
  std::int64_t horizon = 48;
};

// The assembled network. Construction fixes the data geometry: N series
// channels, T patches per window, and the encoded tabular width, because the
// fusion stage concatenates a slot per (channel, patch) with the tabular
// embedding.
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& config, std::int64_t channels, std::int64_t patches,
        std::int64_t tab_features, std::uint64_t seed);

  // windows: instance-normalized patches (B,N,T,P); tab: encoded rows (B,F).
  // Unused inputs for the current mode may be empty tensors.
  Tensor class_logits(const Tensor& windows, const Tensor& tab,
                      std::mt19937_64* dropout_rng = nullptr);
  // windows (B,N,T,P) -> normalized predictions (B,N,H).
  Tensor forecast(const Tensor& windows,
                  std::mt19937_64* dropout_rng = nullptr);

  // Fusion gate from the latest full-mode forward (B, D + N*T); StateError
  // when no such forward has run.
  const Tensor& last_gate() const;

  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  // Replaces parameter storage from (name, tensor) pairs; every parameter
  // must be present with matching shape.
  void load_parameters(
      const std::vector<std::pair<std::string, Tensor>>& values);

  const ModelConfig& config() const { return config_; }
  std::int64_t channels() const { return channels_; }
  std::int64_t patches() const { return patches_; }
  std::int64_t tab_features() const { return tab_features_; }
  std::int64_t fused_width() const;

 private:
  Tensor series_features(const Tensor& windows, std::mt19937_64* dropout_rng);

  ModelConfig config_;
  std::int64_t channels_ = 0, patches_ = 0, tab_features_ = 0;
  bool uses_series_ = false, uses_tabular_ = false;
  Tensor patch_proj_;  // (P, C)
  EncoderConfig encoder_config_;
  EncoderParams encoder_;
  MlpHead tab_embed_;  // F -> 2D -> D
  AttentionGateParams gate_;
  MlpHead class_head_;
  ForecastHead forecast_head_;
  Tensor last_gate_;
};

}  // namespace tabulatime
