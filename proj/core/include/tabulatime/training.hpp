#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tabulatime/tensor.hpp"

namespace tabulatime {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::int64_t batch_size = 16;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 42;
  double train_frac = 0.8;
  double val_frac_of_train = 0.1;
  bool temporal_split = true;
};

struct SplitIndices {
  std::vector<std::int64_t> train, val, test;
};

// Carves rows into train/val/test. With order_keys the split is contiguous in
// key order (train earliest, test latest) and validation takes the train
// tail, so it directly precedes the test block. Without keys the order is a
// seeded shuffle. Counts: round(train_frac * n) rows stay out of test, and
// round(val_frac_of_train * that) of them form validation. Any empty part is
// a DataError.
SplitIndices split_dataset(std::int64_t rows, const TrainConfig& config,
                           const std::vector<double>* order_keys = nullptr);

// Bias-corrected Adam over shared-storage parameter handles.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);
  void step();  // consumes current grads; ContractError on shape drift
  void zero_grad();
  std::int64_t steps_taken() const { return steps_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig config_;
  std::int64_t steps_ = 0;
};

struct EpochRecord {
  int epoch;  // 1-based
  double train_loss;
  double val_loss;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based, 0 = never improved
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

// Minibatch training with early stopping on validation loss.
//  - batch_loss builds a tracked scalar loss over the given train-row subset
//    (indices into 0..train_rows); it runs under an active tape.
//  - val_loss evaluates the full validation split without tracking.
// Epoch order reshuffles each epoch from the config seed. Improvement means
// strictly lower validation loss; after `patience` stale epochs training
// stops and the best epoch's weights are restored. A non-finite loss raises
// TrainingError naming the epoch.
TrainHistory fit(
    std::vector<Tensor> params, std::int64_t train_rows,
    const std::function<Tensor(std::span<const std::int64_t>)>& batch_loss,
    const std::function<double()>& val_loss, const TrainConfig& config);

}  // namespace tabulatime
