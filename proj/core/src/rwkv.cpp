#include "tabulatime/rwkv.hpp"

#include <cmath>

#include "tabulatime/errors.hpp"
#include "tabulatime/rand.hpp"

namespace tabulatime {

namespace {

std::size_t usize(std::int64_t v) { return static_cast<std::size_t>(v); }

struct WkvDims {
  std::int64_t t_count, channels, heads, head_dim;
};

WkvDims check_wkv_args(const Tensor& k, const Tensor& v, const Tensor& w,
                       const Tensor& u, const char* where) {
  if (k.rank() != 2 || v.rank() != 2 || k.shape() != v.shape()) {
    throw DimensionError(std::string(where) + ": k " + shape_str(k.shape()) +
                         " and v " + shape_str(v.shape()) +
                         " must be matching (T,C)");
  }
  if (w.rank() != 2 || u.rank() != 2 || w.shape() != u.shape()) {
    throw DimensionError(std::string(where) +
                         ": w and u must be matching (heads, d_h)");
  }
  WkvDims dims;
  dims.t_count = k.dim(0);
  dims.channels = k.dim(1);
  dims.heads = w.dim(0);
  dims.head_dim = w.dim(1);
  if (dims.heads * dims.head_dim != dims.channels) {
    throw DimensionError(std::string(where) + ": " +
                         std::to_string(dims.heads) + " heads of width " +
                         std::to_string(dims.head_dim) + " do not tile " +
                         std::to_string(dims.channels) + " channels");
  }
  for (double decay : w.data()) {
    if (!(decay > 0.0 && decay < 1.0)) {
      throw ContractError(std::string(where) + ": decay " +
                          std::to_string(decay) +
                          " outside the open interval (0,1)");
    }
  }
  return dims;
}

}  // namespace

RkvProjections rkv_projections(const Tensor& x, const Tensor& shifted,
                               const Tensor& mu_r, const Tensor& mu_k,
                               const Tensor& mu_v, const Tensor& w_r,
                               const Tensor& w_k, const Tensor& w_v) {
  RkvProjections out;
  out.r = matmul(lerp(mu_r, x, shifted), w_r);
  out.k = matmul(lerp(mu_k, x, shifted), w_k);
  out.v = matmul(lerp(mu_v, x, shifted), w_v);
  return out;
}

Tensor wkv_direct(const Tensor& k, const Tensor& v, const Tensor& w,
                  const Tensor& u) {
  const WkvDims dims = check_wkv_args(k, v, w, u, "wkv_direct");
  const auto [t_count, channels, heads, head_dim] = dims;
  std::vector<double> out(usize(heads * t_count * head_dim * head_dim), 0.0);
  const auto& kd = k.data();
  const auto& vd = v.data();
  for (std::int64_t hd = 0; hd < heads; ++hd) {
    const auto base = usize(hd * head_dim);
    for (std::int64_t t = 0; t < t_count; ++t) {
      for (std::int64_t i = 0; i < head_dim; ++i) {
        const double decay = w.data()[usize(hd * head_dim + i)];
        const double bonus = u.data()[usize(hd * head_dim + i)];
        for (std::int64_t j = 0; j < head_dim; ++j) {
          double acc = bonus * kd[usize(t * channels) + base + usize(i)] *
                       vd[usize(t * channels) + base + usize(j)];
          for (std::int64_t s = 0; s < t; ++s) {
            acc += std::pow(decay, static_cast<double>(t - 1 - s)) *
                   kd[usize(s * channels) + base + usize(i)] *
                   vd[usize(s * channels) + base + usize(j)];
          }
          out[usize(((hd * t_count + t) * head_dim + i) * head_dim + j)] = acc;
        }
      }
    }
  }
  return detail::plain_result({heads, t_count, head_dim, head_dim},
                              std::move(out));
}

Tensor wkv_recurrent(const Tensor& k, const Tensor& v, const Tensor& w,
                     const Tensor& u) {
  const WkvDims dims = check_wkv_args(k, v, w, u, "wkv_recurrent");
  const auto [t_count, channels, heads, head_dim] = dims;
  detail::guard_finite(k, "wkv_recurrent");
  detail::guard_finite(v, "wkv_recurrent");
  std::vector<double> out(usize(heads * t_count * head_dim * head_dim), 0.0);
  const auto& kd = k.data();
  const auto& vd = v.data();
  const auto& wd = w.data();
  const auto& ud = u.data();
  // state[i,j] carries sum_{s<t} w_i^(t-1-s) k_s[i] v_s[j], updated per step.
  std::vector<double> state(usize(head_dim * head_dim));
  for (std::int64_t hd = 0; hd < heads; ++hd) {
    const auto base = usize(hd * head_dim);
    std::fill(state.begin(), state.end(), 0.0);
    for (std::int64_t t = 0; t < t_count; ++t) {
      const auto krow = usize(t * channels) + base;
      for (std::int64_t i = 0; i < head_dim; ++i) {
        const double ki = kd[krow + usize(i)];
        const double bonus = ud[base + usize(i)];
        const double decay = wd[base + usize(i)];
        const auto srow = usize(i * head_dim);
        const auto orow =
            usize(((hd * t_count + t) * head_dim + i) * head_dim);
        for (std::int64_t j = 0; j < head_dim; ++j) {
          const double outer = ki * vd[krow + usize(j)];
          out[orow + usize(j)] = bonus * outer + state[srow + usize(j)];
          state[srow + usize(j)] = decay * state[srow + usize(j)] + outer;
        }
      }
    }
  }
  Tensor result = detail::plain_result({heads, t_count, head_dim, head_dim},
                                       std::move(out));
  detail::guard_finite(result, "wkv_recurrent");
  if (detail::tracing({&k, &v, &w, &u})) {
    auto kn = k.node();
    auto vn = v.node();
    auto wn = w.node();
    auto un = u.node();
    auto on = result.node();
    detail::track(result, [kn, vn, wn, un, on, t_count, channels, heads,
                           head_dim]() {
      const auto& g = on->grad;
      const auto& kd = kn->data;
      const auto& vd = vn->data;
      const auto& wd = wn->data;
      const auto& ud = un->data;
      // Rebuild the pre-update states A_t, then sweep backwards carrying
      // S = dL/dA_{t+1}:
      //   dOuter_t = u . g_t + S          (bonus path plus state path)
      //   dw_i    += sum_j S[i,j] A_t[i,j]
      //   S        = g_t + w . S
      std::vector<double> states(usize(t_count * head_dim * head_dim));
      std::vector<double> scratch(usize(head_dim * head_dim));
      for (std::int64_t hd = 0; hd < heads; ++hd) {
        const auto base = usize(hd * head_dim);
        std::fill(scratch.begin(), scratch.end(), 0.0);
        for (std::int64_t t = 0; t < t_count; ++t) {
          const auto krow = usize(t * channels) + base;
          std::copy(scratch.begin(), scratch.end(),
                    states.begin() +
                        static_cast<std::ptrdiff_t>(usize(t) * scratch.size()));
          for (std::int64_t i = 0; i < head_dim; ++i) {
            const double decay = wd[base + usize(i)];
            const double ki = kd[krow + usize(i)];
            const auto srow = usize(i * head_dim);
            for (std::int64_t j = 0; j < head_dim; ++j) {
              scratch[srow + usize(j)] = decay * scratch[srow + usize(j)] +
                                         ki * vd[krow + usize(j)];
            }
          }
        }
        // scratch now becomes S, reused as the reverse accumulator.
        std::fill(scratch.begin(), scratch.end(), 0.0);
        for (std::int64_t t = t_count - 1; t >= 0; --t) {
          const auto krow = usize(t * channels) + base;
          const double* a_t = states.data() + usize(t) * scratch.size();
          for (std::int64_t i = 0; i < head_dim; ++i) {
            const double bonus = ud[base + usize(i)];
            const double decay = wd[base + usize(i)];
            const double ki = kd[krow + usize(i)];
            const auto srow = usize(i * head_dim);
            const auto grow =
                usize(((hd * t_count + t) * head_dim + i) * head_dim);
            double dk_acc = 0.0;
            double du_acc = 0.0;
            double dw_acc = 0.0;
            for (std::int64_t j = 0; j < head_dim; ++j) {
              const double gt = g[grow + usize(j)];
              const double vj = vd[krow + usize(j)];
              const double s_next = scratch[srow + usize(j)];
              const double d_outer = bonus * gt + s_next;
              dk_acc += d_outer * vj;
              if (vn->requires_grad) {
                vn->grad[krow + usize(j)] += d_outer * ki;
              }
              du_acc += gt * ki * vj;
              dw_acc += s_next * a_t[srow + usize(j)];
              scratch[srow + usize(j)] = gt + decay * s_next;
            }
            if (kn->requires_grad) kn->grad[krow + usize(i)] += dk_acc;
            if (un->requires_grad) un->grad[base + usize(i)] += du_acc;
            if (wn->requires_grad) wn->grad[base + usize(i)] += dw_acc;
          }
        }
      }
    });
  }
  return result;
}

Tensor multihead_gate(const Tensor& r, const Tensor& wkv, const Tensor& w_o) {
  if (r.rank() != 2 || wkv.rank() != 4) {
    throw DimensionError("multihead_gate: r must be (T,C) and wkv (h,T,d_h,d_h)");
  }
  const auto t_count = r.dim(0);
  const auto channels = r.dim(1);
  const auto heads = wkv.dim(0);
  const auto head_dim = wkv.dim(2);
  if (wkv.dim(1) != t_count || wkv.dim(3) != head_dim ||
      heads * head_dim != channels) {
    throw DimensionError("multihead_gate: wkv " + shape_str(wkv.shape()) +
                         " does not match r " + shape_str(r.shape()));
  }
  Tensor gate = sigmoid(r);
  detail::guard_finite(wkv, "multihead_gate");

  std::vector<double> mixed(usize(t_count * channels), 0.0);
  const auto& gd = gate.data();
  const auto& wd = wkv.data();
  for (std::int64_t hd = 0; hd < heads; ++hd) {
    const auto base = usize(hd * head_dim);
    for (std::int64_t t = 0; t < t_count; ++t) {
      const auto rrow = usize(t * channels) + base;
      for (std::int64_t i = 0; i < head_dim; ++i) {
        const double gi = gd[rrow + usize(i)];
        if (gi == 0.0) continue;
        const auto wrow =
            usize(((hd * t_count + t) * head_dim + i) * head_dim);
        for (std::int64_t j = 0; j < head_dim; ++j) {
          mixed[rrow + usize(j)] += gi * wd[wrow + usize(j)];
        }
      }
    }
  }
  Tensor combined = detail::plain_result({t_count, channels}, std::move(mixed));
  detail::guard_finite(combined, "multihead_gate");
  if (detail::tracing({&gate, &wkv})) {
    auto gn = gate.node();
    auto wn = wkv.node();
    auto on = combined.node();
    detail::track(combined, [gn, wn, on, t_count, channels, heads, head_dim]() {
      const auto& g = on->grad;
      for (std::int64_t hd = 0; hd < heads; ++hd) {
        const auto base = usize(hd * head_dim);
        for (std::int64_t t = 0; t < t_count; ++t) {
          const auto rrow = usize(t * channels) + base;
          for (std::int64_t i = 0; i < head_dim; ++i) {
            const auto wrow =
                usize(((hd * t_count + t) * head_dim + i) * head_dim);
            double dg = 0.0;
            for (std::int64_t j = 0; j < head_dim; ++j) {
              dg += g[rrow + usize(j)] * wn->data[wrow + usize(j)];
              if (wn->requires_grad) {
                wn->grad[wrow + usize(j)] +=
                    gn->data[rrow + usize(i)] * g[rrow + usize(j)];
              }
            }
            if (gn->requires_grad) gn->grad[rrow + usize(i)] += dg;
          }
        }
      }
    });
  }
  return matmul(combined, w_o);
}

Tensor channel_mix(const Tensor& x, const Tensor& shifted, const Tensor& mu_k,
                   const Tensor& mu_r, const Tensor& w_g, const Tensor& w_r,
                   const Tensor& w_v) {
  Tensor key = matmul(lerp(mu_k, x, shifted), w_g);
  Tensor receptance = matmul(lerp(mu_r, x, shifted), w_r);
  Tensor value = matmul(relu_squared(key), w_v);
  return mul(sigmoid(receptance), value);
}

Tensor rwkv_block(const Tensor& x, const RwkvBlockParams& params, int heads,
                  double dropout_rate, std::mt19937_64* dropout_rng) {
  const auto& tm = params.time_mix;
  if (tm.decay_raw.dim(0) != heads) {
    throw ContractError("rwkv_block: params built for " +
                        std::to_string(tm.decay_raw.dim(0)) +
                        " heads, asked to run with " + std::to_string(heads));
  }
  Tensor normed = layer_norm(x, params.ln_time.gain, params.ln_time.bias);
  Tensor shifted = time_shift(normed);
  RkvProjections rkv = rkv_projections(
      normed, shifted, sigmoid(tm.mu_r_raw), sigmoid(tm.mu_k_raw),
      sigmoid(tm.mu_v_raw), tm.w_r, tm.w_k, tm.w_v);
  Tensor wkv = wkv_recurrent(rkv.k, rkv.v, sigmoid(tm.decay_raw), tm.bonus);
  Tensor attn = multihead_gate(rkv.r, wkv, tm.w_o);
  if (dropout_rate > 0.0 && dropout_rng != nullptr) {
    attn = dropout(attn, dropout_rate, *dropout_rng);
  }
  Tensor mid = add(x, attn);

  const auto& cm = params.channel_mix;
  Tensor normed2 =
      layer_norm(mid, params.ln_channel.gain, params.ln_channel.bias);
  Tensor shifted2 = time_shift(normed2);
  Tensor ffn = channel_mix(normed2, shifted2, sigmoid(cm.mu_k_raw),
                           sigmoid(cm.mu_r_raw), cm.w_g, cm.w_r, cm.w_v);
  if (dropout_rate > 0.0 && dropout_rng != nullptr) {
    ffn = dropout(ffn, dropout_rate, *dropout_rng);
  }
  return add(mid, ffn);
}

Tensor encode(const Tensor& tokens, const EncoderConfig& config,
              const EncoderParams& params, std::mt19937_64* dropout_rng) {
  if (tokens.rank() != 4) {
    throw DimensionError("encode: tokens must be (B,N,T,C), got " +
                         shape_str(tokens.shape()));
  }
  if (tokens.dim(3) != config.embed_dim) {
    throw DimensionError("encode: token width " + std::to_string(tokens.dim(3)) +
                         " does not match embed_dim " +
                         std::to_string(config.embed_dim));
  }
  if (static_cast<int>(params.blocks.size()) != config.layers) {
    throw ContractError("encode: " + std::to_string(params.blocks.size()) +
                        " blocks for " + std::to_string(config.layers) +
                        " configured layers");
  }
  if (config.embed_dim % config.heads != 0) {
    throw ContractError("encode: heads must divide embed_dim");
  }
  const auto b_count = tokens.dim(0);
  const auto n_count = tokens.dim(1);
  const auto t_count = tokens.dim(2);
  const auto width = tokens.dim(3);
  std::vector<Tensor> encoded;
  encoded.reserve(usize(b_count * n_count));
  for (std::int64_t b = 0; b < b_count; ++b) {
    for (std::int64_t n = 0; n < n_count; ++n) {
      Tensor x = slice_block(tokens, (b * n_count + n) * t_count * width,
                             {t_count, width});
      for (const auto& block : params.blocks) {
        x = rwkv_block(x, block, config.heads, config.dropout, dropout_rng);
      }
      encoded.push_back(std::move(x));
    }
  }
  return stack_blocks(encoded, {b_count, n_count, t_count, width});
}

EncoderParams EncoderParams::init(const EncoderConfig& config,
                                  std::mt19937_64& rng) {
  if (config.embed_dim % config.heads != 0) {
    throw ContractError("EncoderParams::init: heads must divide embed_dim");
  }
  const auto width = config.embed_dim;
  const auto heads = static_cast<std::int64_t>(config.heads);
  const auto head_dim = width / heads;
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));

  EncoderParams params;
  params.blocks.reserve(static_cast<std::size_t>(config.layers));
  for (int layer = 0; layer < config.layers; ++layer) {
    RwkvBlockParams block;
    block.ln_time = {Tensor::full({width}, 1.0, true),
                     Tensor::zeros({width}, true)};
    block.ln_channel = {Tensor::full({width}, 1.0, true),
                        Tensor::zeros({width}, true)};

    auto& tm = block.time_mix;
    tm.mu_r_raw = Tensor::zeros({width}, true);
    tm.mu_k_raw = Tensor::zeros({width}, true);
    tm.mu_v_raw = Tensor::zeros({width}, true);
    tm.w_r = Tensor::uniform({width, width}, -bound, bound, rng, true);
    tm.w_k = Tensor::uniform({width, width}, -bound, bound, rng, true);
    tm.w_v = Tensor::uniform({width, width}, -bound, bound, rng, true);
    tm.w_o = Tensor::zeros({width, width}, true);
    // Decay log-spaced over [0.3, 0.95] across the flattened head dims,
    // stored as logits.
    std::vector<double> decay(usize(width));
    const double lo = std::log(0.3);
    const double hi = std::log(0.95);
    for (std::int64_t i = 0; i < width; ++i) {
      const double frac =
          width == 1 ? 0.0
                     : static_cast<double>(i) / static_cast<double>(width - 1);
      const double value = std::exp(lo + (hi - lo) * frac);
      decay[usize(i)] = std::log(value / (1.0 - value));
    }
    tm.decay_raw = Tensor({heads, head_dim}, std::move(decay), true);
    tm.bonus = Tensor::full({heads, head_dim}, 1.0, true);

    auto& cm = block.channel_mix;
    cm.mu_k_raw = Tensor::zeros({width}, true);
    cm.mu_r_raw = Tensor::zeros({width}, true);
    cm.w_g = Tensor::uniform({width, width}, -bound, bound, rng, true);
    cm.w_r = Tensor::uniform({width, width}, -bound, bound, rng, true);
    cm.w_v = Tensor::zeros({width, width}, true);
    params.blocks.push_back(std::move(block));
  }
  return params;
}

void EncoderParams::collect(std::vector<std::pair<std::string, Tensor>>& out,
                            const std::string& prefix) const {
  for (std::size_t layer = 0; layer < blocks.size(); ++layer) {
    const auto& block = blocks[layer];
    const std::string base = prefix + std::to_string(layer) + ".";
    out.emplace_back(base + "ln_time.gain", block.ln_time.gain);
    out.emplace_back(base + "ln_time.bias", block.ln_time.bias);
    out.emplace_back(base + "ln_channel.gain", block.ln_channel.gain);
    out.emplace_back(base + "ln_channel.bias", block.ln_channel.bias);
    const auto& tm = block.time_mix;
    out.emplace_back(base + "time.mu_r", tm.mu_r_raw);
    out.emplace_back(base + "time.mu_k", tm.mu_k_raw);
    out.emplace_back(base + "time.mu_v", tm.mu_v_raw);
    out.emplace_back(base + "time.w_r", tm.w_r);
    out.emplace_back(base + "time.w_k", tm.w_k);
    out.emplace_back(base + "time.w_v", tm.w_v);
    out.emplace_back(base + "time.w_o", tm.w_o);
    out.emplace_back(base + "time.decay", tm.decay_raw);
    out.emplace_back(base + "time.bonus", tm.bonus);
    const auto& cm = block.channel_mix;
    out.emplace_back(base + "channel.mu_k", cm.mu_k_raw);
    out.emplace_back(base + "channel.mu_r", cm.mu_r_raw);
    out.emplace_back(base + "channel.w_g", cm.w_g);
    out.emplace_back(base + "channel.w_r", cm.w_r);
    out.emplace_back(base + "channel.w_v", cm.w_v);
  }
}

}  // namespace tabulatime
