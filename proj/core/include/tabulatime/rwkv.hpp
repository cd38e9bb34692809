#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tabulatime/tensor.hpp"

namespace tabulatime {

struct LayerNormParams {
  Tensor gain;  // (C)
  Tensor bias;  // (C)
};

// Time-mixing trainables. The mu vectors and per-dimension decay are stored
// unconstrained and squashed through sigmoid at use, which keeps the mixing
// weights in [0,1] and the decay strictly inside (0,1) during training.
struct TimeMixParams {
  Tensor mu_r_raw, mu_k_raw, mu_v_raw;  // (C)
  Tensor w_r, w_k, w_v, w_o;            // (C,C)
  Tensor decay_raw;                     // (h, d_h)
  Tensor bonus;                         // (h, d_h): extra weight on the
                                        // current token, trained freely
};

struct ChannelMixParams {
  Tensor mu_k_raw, mu_r_raw;  // (C)
  Tensor w_g, w_r, w_v;       // (C,C)
};

struct RwkvBlockParams {
  LayerNormParams ln_time, ln_channel;
  TimeMixParams time_mix;
  ChannelMixParams channel_mix;
};

struct EncoderConfig {
  int layers = 4;
  std::int64_t embed_dim = 128;
  int heads = 4;
  double dropout = 0.0;
};

struct EncoderParams {
  std::vector<RwkvBlockParams> blocks;

  // Initialization keeps every block an identity map at step zero (the output
  // projections start at zero), with decay log-spaced over [0.3, 0.95] across
  // the flattened head dimensions and all mixing weights at 0.5.
  static EncoderParams init(const EncoderConfig& config, std::mt19937_64& rng);

  // Appends (name, tensor) pairs for every trainable, names under `prefix`.
  void collect(std::vector<std::pair<std::string, Tensor>>& out,
               const std::string& prefix) const;
};

// Token-shifted projections: each of r,k,v is a linear map of the
// mu-interpolated blend of the current and previous token.
// x and shifted are (T,C); mu vectors are effective values in [0,1].
struct RkvProjections {
  Tensor r, k, v;  // (T,C), split into heads downstream
};
RkvProjections rkv_projections(const Tensor& x, const Tensor& shifted,
                               const Tensor& mu_r, const Tensor& mu_k,
                               const Tensor& mu_v, const Tensor& w_r,
                               const Tensor& w_k, const Tensor& w_v);

// The WKV attention operator. Per head, per step t:
//   wkv_t[i,j] = u[i] k_t[i] v_t[j] + sum_{s<t} w[i]^(t-1-s) k_s[i] v_s[j]
// k, v are (T,C) with C = heads * d_h; w, u are (h, d_h); w must lie strictly
// inside (0,1). Result is (h, T, d_h, d_h).
//
// wkv_direct evaluates the sum literally in O(T^2) and never tracks
// gradients: it is the reference the linear-time route is audited against.
Tensor wkv_direct(const Tensor& k, const Tensor& v, const Tensor& w,
                  const Tensor& u);
// wkv_recurrent folds the same sum into a running state in O(T) and
// backpropagates through the recurrence.
Tensor wkv_recurrent(const Tensor& k, const Tensor& v, const Tensor& w,
                     const Tensor& u);

// Output gating: contracts sigmoid(r) against the wkv state over the key
// dimension per head, then applies the output projection.
// r is (T,C) pre-sigmoid, wkv is (h,T,d_h,d_h), w_o is (C,C); result (T,C).
Tensor multihead_gate(const Tensor& r, const Tensor& wkv, const Tensor& w_o);

// Feed-forward half of a block: squared-ReLU MLP gated by sigmoid(r').
// All maps are (C,C); mu vectors are effective values in [0,1].
Tensor channel_mix(const Tensor& x, const Tensor& shifted, const Tensor& mu_k,
                   const Tensor& mu_r, const Tensor& w_g, const Tensor& w_r,
                   const Tensor& w_v);

// One pre-norm residual block half each: x += TimeMix(LN(x)); then
// x += ChannelMix(LN(x)). Input (T,C).
Tensor rwkv_block(const Tensor& x, const RwkvBlockParams& params, int heads,
                  double dropout = 0.0, std::mt19937_64* dropout_rng = nullptr);

// Runs every (instance, channel) token sequence of (B,N,T,C) through the
// block stack independently and reassembles the batch. Channels never mix
// here; fusion happens downstream.
Tensor encode(const Tensor& tokens, const EncoderConfig& config,
              const EncoderParams& params,
              std::mt19937_64* dropout_rng = nullptr);

}  // namespace tabulatime
