#include "tabulatime/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tabulatime/errors.hpp"
#include "tabulatime/rand.hpp"

namespace tabulatime {

SplitIndices split_dataset(std::int64_t rows, const TrainConfig& config,
                           const std::vector<double>* order_keys) {
  if (rows <= 0) throw DataError("split_dataset: no rows");
  if (config.train_frac <= 0.0 || config.train_frac >= 1.0) {
    throw ContractError("split_dataset: train_frac must be in (0,1)");
  }
  if (config.val_frac_of_train < 0.0 || config.val_frac_of_train >= 1.0) {
    throw ContractError("split_dataset: val_frac_of_train must be in [0,1)");
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), 0);
  if (order_keys != nullptr) {
    if (static_cast<std::int64_t>(order_keys->size()) != rows) {
      throw DimensionError("split_dataset: " +
                           std::to_string(order_keys->size()) +
                           " keys for " + std::to_string(rows) + " rows");
    }
    std::stable_sort(order.begin(), order.end(),
                     [order_keys](std::int64_t a, std::int64_t b) {
                       return (*order_keys)[static_cast<std::size_t>(a)] <
                              (*order_keys)[static_cast<std::size_t>(b)];
                     });
  } else {
    std::mt19937_64 rng(derive_seed(config.seed, "split"));
    order = random_permutation(rows, rng);
  }

  const auto fit_rows = std::llround(config.train_frac *
                                     static_cast<double>(rows));
  const auto val_rows = std::llround(config.val_frac_of_train *
                                     static_cast<double>(fit_rows));
  const auto train_rows = fit_rows - val_rows;
  const auto test_rows = rows - fit_rows;
  if (train_rows <= 0 || test_rows <= 0 ||
      (config.val_frac_of_train > 0.0 && val_rows <= 0)) {
    throw DataError("split_dataset: " + std::to_string(rows) +
                    " rows are too few for train/val/test fractions");
  }
  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + train_rows);
  split.val.assign(order.begin() + train_rows, order.begin() + fit_rows);
  split.test.assign(order.begin() + fit_rows, order.end());
  return split;
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (params_.empty()) throw ContractError("Adam: no parameters");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.requires_grad()) {
      throw ContractError("Adam: parameter without requires_grad");
    }
    m_.emplace_back(p.data().size(), 0.0);
    v_.emplace_back(p.data().size(), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double bc1 =
      1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 =
      1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& param = params_[k];
    const auto& grad = param.grad();
    if (grad.size() != m_[k].size()) {
      throw ContractError("Adam: parameter shape changed mid-run");
    }
    auto& values = param.raw();
    for (std::size_t i = 0; i < values.size(); ++i) {
      m_[k][i] = config_.beta1 * m_[k][i] + (1.0 - config_.beta1) * grad[i];
      v_[k][i] =
          config_.beta2 * v_[k][i] + (1.0 - config_.beta2) * grad[i] * grad[i];
      const double m_hat = m_[k][i] / bc1;
      const double v_hat = v_[k][i] / bc2;
      values[i] -=
          config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

TrainHistory fit(
    std::vector<Tensor> params, std::int64_t train_rows,
    const std::function<Tensor(std::span<const std::int64_t>)>& batch_loss,
    const std::function<double()>& val_loss, const TrainConfig& config) {
  if (train_rows <= 0) throw DataError("fit: no training rows");
  if (config.batch_size <= 0) throw ContractError("fit: batch_size must be positive");
  if (config.max_epochs <= 0) throw ContractError("fit: max_epochs must be positive");
  if (config.patience <= 0) throw ContractError("fit: patience must be positive");

  Adam optimizer(params, AdamConfig{.learning_rate = config.learning_rate});
  TrainHistory history;
  history.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_weights;
  int stale_epochs = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::mt19937_64 rng(
        derive_seed(config.seed, "epoch", static_cast<std::uint64_t>(epoch)));
    const auto order = random_permutation(train_rows, rng);
    double train_total = 0.0;
    for (std::int64_t start = 0; start < train_rows;
         start += config.batch_size) {
      const auto count =
          std::min<std::int64_t>(config.batch_size, train_rows - start);
      std::span<const std::int64_t> batch(
          order.data() + static_cast<std::size_t>(start),
          static_cast<std::size_t>(count));
      optimizer.zero_grad();
      GradTape tape;
      Tensor loss = batch_loss(batch);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw TrainingError("loss became non-finite at epoch " +
                            std::to_string(epoch));
      }
      tape.backward(loss);
      optimizer.step();
      train_total += value * static_cast<double>(count);
    }
    const double train_mean = train_total / static_cast<double>(train_rows);
    const double val_value = val_loss();
    if (!std::isfinite(val_value)) {
      throw TrainingError("validation loss became non-finite at epoch " +
                          std::to_string(epoch));
    }
    history.epochs.push_back({epoch, train_mean, val_value});

    if (val_value < history.best_val_loss) {
      history.best_val_loss = val_value;
      history.best_epoch = epoch;
      stale_epochs = 0;
      best_weights.clear();
      best_weights.reserve(params.size());
      for (const auto& p : params) best_weights.push_back(p.data());
    } else {
      ++stale_epochs;
      if (stale_epochs >= config.patience) {
        history.early_stopped = true;
        break;
      }
    }
  }
  if (!best_weights.empty()) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      params[k].raw() = best_weights[k];
    }
  }
  return history;
}

}  // namespace tabulatime
