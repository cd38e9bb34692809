#include "tabulatime/model.hpp"

#include <cmath>

#include "tabulatime/errors.hpp"
#include "tabulatime/rand.hpp"
#include "tabulatime/series.hpp"

namespace tabulatime {

namespace {

Tensor linear_init(const Shape& shape, std::mt19937_64& rng) {
  double fan_in = static_cast<double>(shape[0]);
  double bound = 1.0 / std::sqrt(fan_in > 0 ? fan_in : 1.0);
  return Tensor::uniform(shape, -bound, bound, rng);
}

}  // namespace

Model::Model(const ModelConfig& config, std::int64_t channels,
             std::int64_t patches, std::int64_t tab_features,
             std::uint64_t seed)
    : config_(config),
      channels_(channels),
      patches_(patches),
      tab_features_(tab_features) {
  if (config.mode != "full" && config.mode != "tabular_only" &&
      config.mode != "series_only") {
    throw ContractError("unknown model mode '" + config.mode + "'");
  }
  if (config.task != "classification" && config.task != "forecasting") {
    throw ContractError("unknown model task '" + config.task + "'");
  }
  uses_series_ = config.mode != "tabular_only";
  uses_tabular_ = config.mode != "series_only" &&
                  config.task == "classification";
  if (config.task == "forecasting" && config.mode != "series_only" &&
      config.mode != "full") {
    throw ContractError("forecasting requires series input");
  }
  if (uses_series_) {
    if (channels_ <= 0 || patches_ <= 0) {
      throw ContractError("series modes need positive channels and patches");
    }
    std::mt19937_64 proj_rng(derive_seed(seed, "patch_proj"));
    patch_proj_ =
        linear_init({config.patch_size, config.embed_dim}, proj_rng);
    patch_proj_.set_requires_grad(true);
    encoder_config_.layers = config.layers;
    encoder_config_.embed_dim = config.embed_dim;
    encoder_config_.heads = config.heads;
    encoder_config_.dropout = config.dropout;
    std::mt19937_64 enc_rng(derive_seed(seed, "encoder"));
    encoder_ = EncoderParams::init(encoder_config_, enc_rng);
  }
  if (uses_tabular_) {
    if (tab_features_ <= 0) {
      throw ContractError("tabular modes need encoded features");
    }
    std::mt19937_64 tab_rng(derive_seed(seed, "tab_embed"));
    tab_embed_ = MlpHead::init(tab_features_, 2 * config.tabular_dim,
                               config.tabular_dim, tab_rng);
  }
  if (config.task == "classification") {
    std::int64_t fused = fused_width();
    if (config.mode == "full") {
      std::int64_t bottleneck = config.bottleneck;
      if (bottleneck <= 0) bottleneck = (fused + 3) / 4;
      std::mt19937_64 gate_rng(derive_seed(seed, "gate"));
      gate_ = AttentionGateParams::init(fused, bottleneck, gate_rng);
    }
    std::mt19937_64 head_rng(derive_seed(seed, "class_head"));
    class_head_ =
        MlpHead::init(fused, config.head_hidden, config.classes, head_rng);
  } else {
    std::mt19937_64 head_rng(derive_seed(seed, "forecast_head"));
    forecast_head_ = ForecastHead::init(patches_ * config.embed_dim,
                                        config.horizon, head_rng);
  }
}

std::int64_t Model::fused_width() const {
  std::int64_t width = 0;
  if (uses_tabular_) width += config_.tabular_dim;
  if (uses_series_) width += channels_ * patches_;
  return width;
}

Tensor Model::series_features(const Tensor& windows,
                              std::mt19937_64* dropout_rng) {
  if (windows.rank() != 4) {
    throw DimensionError("windows must be (batch, channels, patches, patch)");
  }
  if (windows.shape()[1] != channels_ || windows.shape()[2] != patches_ ||
      windows.shape()[3] != config_.patch_size) {
    throw DimensionError("window geometry does not match the model");
  }
  Tensor tokens = embed_patches(windows, patch_proj_);
  return encode(tokens, encoder_config_, encoder_, dropout_rng);
}

Tensor Model::class_logits(const Tensor& windows, const Tensor& tab,
                           std::mt19937_64* dropout_rng) {
  if (config_.task != "classification") {
    throw StateError("class_logits called on a forecasting model");
  }
  Tensor features;
  if (config_.mode == "tabular_only") {
    features = tab_embed_.forward(tab);
  } else if (config_.mode == "series_only") {
    features = pool_series(series_features(windows, dropout_rng));
  } else {
    Tensor tab_emb = tab_embed_.forward(tab);
    Tensor series = pool_series(series_features(windows, dropout_rng));
    Tensor joint = concat_cols({tab_emb, series});
    FuseResult fused = fuse(joint, gate_);
    last_gate_ = fused.gate;
    features = fused.fused;
  }
  return class_head_.forward(features);
}

Tensor Model::forecast(const Tensor& windows, std::mt19937_64* dropout_rng) {
  if (config_.task != "forecasting") {
    throw StateError("forecast called on a classification model");
  }
  Tensor encoded = series_features(windows, dropout_rng);
  return forecast_outputs(encoded, forecast_head_);
}

const Tensor& Model::last_gate() const {
  if (!last_gate_.defined()) {
    throw StateError("no fusion gate recorded; run a full-mode forward first");
  }
  return last_gate_;
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  if (uses_series_) {
    out.emplace_back("patch_proj.w", patch_proj_);
    encoder_.collect(out, "encoder.block");
  }
  if (uses_tabular_) {
    out.emplace_back("tab_embed.w1", tab_embed_.w1);
    out.emplace_back("tab_embed.b1", tab_embed_.b1);
    out.emplace_back("tab_embed.w2", tab_embed_.w2);
    out.emplace_back("tab_embed.b2", tab_embed_.b2);
  }
  if (config_.task == "classification") {
    if (config_.mode == "full") {
      out.emplace_back("gate.w1", gate_.w1);
      out.emplace_back("gate.w2", gate_.w2);
    }
    out.emplace_back("class_head.w1", class_head_.w1);
    out.emplace_back("class_head.b1", class_head_.b1);
    out.emplace_back("class_head.w2", class_head_.w2);
    out.emplace_back("class_head.b2", class_head_.b2);
  } else {
    out.emplace_back("forecast_head.w", forecast_head_.w);
    out.emplace_back("forecast_head.b", forecast_head_.b);
  }
  return out;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, tensor] : named_parameters()) out.push_back(tensor);
  return out;
}

void Model::load_parameters(
    const std::vector<std::pair<std::string, Tensor>>& values) {
  auto params = named_parameters();
  for (auto& [name, tensor] : params) {
    const Tensor* found = nullptr;
    for (const auto& [vname, vtensor] : values) {
      if (vname == name) {
        found = &vtensor;
        break;
      }
    }
    if (!found) throw FormatError("missing parameter '" + name + "'");
    if (found->shape() != tensor.shape()) {
      throw FormatError("parameter '" + name + "' has the wrong shape");
    }
    tensor.raw() = found->data();
  }
}

}  // namespace tabulatime
