#include "tabulatime/fusion.hpp"

#include <cmath>

#include "tabulatime/errors.hpp"

namespace tabulatime {

Tensor pool_series(const Tensor& features) {
  if (features.rank() != 4) {
    throw DimensionError("pool_series: expected (B,N,T,C), got " +
                         shape_str(features.shape()));
  }
  const auto b_count = features.dim(0);
  const auto n_count = features.dim(1);
  const auto t_count = features.dim(2);
  Tensor pooled = mean_last(features);  // (B,N,T)
  return reshape(pooled, {b_count, n_count * t_count});
}

AttentionGateParams AttentionGateParams::init(std::int64_t features,
                                              std::int64_t bottleneck,
                                              std::mt19937_64& rng) {
  if (features <= 0) {
    throw ContractError("AttentionGateParams: features must be positive");
  }
  if (bottleneck <= 0) bottleneck = (features + 3) / 4;
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(features));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(bottleneck));
  AttentionGateParams params;
  params.w1 =
      Tensor::uniform({features, bottleneck}, -bound1, bound1, rng, true);
  params.w2 =
      Tensor::uniform({bottleneck, features}, -bound2, bound2, rng, true);
  return params;
}

FuseResult fuse(const Tensor& features, const AttentionGateParams& params) {
  if (features.rank() != 2) {
    throw DimensionError("fuse: expected (B,F), got " +
                         shape_str(features.shape()));
  }
  if (features.dim(1) != params.w1.dim(0)) {
    throw DimensionError("fuse: " + std::to_string(features.dim(1)) +
                         " features, gate built for " +
                         std::to_string(params.w1.dim(0)));
  }
  FuseResult out;
  out.gate = sigmoid(matmul(relu(matmul(features, params.w1)), params.w2));
  out.fused = mul(out.gate, features);
  return out;
}

MlpHead MlpHead::init(std::int64_t in, std::int64_t hidden, std::int64_t out,
                      std::mt19937_64& rng) {
  if (in <= 0 || hidden <= 0 || out <= 0) {
    throw ContractError("MlpHead: all widths must be positive");
  }
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  MlpHead head;
  head.w1 = Tensor::uniform({in, hidden}, -bound1, bound1, rng, true);
  head.b1 = Tensor::zeros({hidden}, true);
  head.w2 = Tensor::uniform({hidden, out}, -bound2, bound2, rng, true);
  head.b2 = Tensor::zeros({out}, true);
  return head;
}

Tensor MlpHead::forward(const Tensor& x) const {
  Tensor hidden = relu(add(matmul(x, w1), b1));
  return add(matmul(hidden, w2), b2);
}

ForecastHead ForecastHead::init(std::int64_t flat_features,
                                std::int64_t horizon, std::mt19937_64& rng) {
  if (flat_features <= 0 || horizon <= 0) {
    throw ContractError("ForecastHead: widths must be positive");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(flat_features));
  ForecastHead head;
  head.w = Tensor::uniform({flat_features, horizon}, -bound, bound, rng, true);
  head.b = Tensor::zeros({horizon}, true);
  return head;
}

Tensor forecast_outputs(const Tensor& features, const ForecastHead& head) {
  if (features.rank() != 4) {
    throw DimensionError("forecast_outputs: expected (B,N,T,C), got " +
                         shape_str(features.shape()));
  }
  const auto b_count = features.dim(0);
  const auto n_count = features.dim(1);
  const auto t_count = features.dim(2);
  const auto width = features.dim(3);
  if (t_count * width != head.w.dim(0)) {
    throw DimensionError("forecast_outputs: flattened features " +
                         std::to_string(t_count * width) +
                         " do not match head input " +
                         std::to_string(head.w.dim(0)));
  }
  Tensor flat = reshape(features, {b_count * n_count, t_count * width});
  Tensor projected = add(matmul(flat, head.w), head.b);
  return reshape(projected, {b_count, n_count, head.w.dim(1)});
}

}  // namespace tabulatime
