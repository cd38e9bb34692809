#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "tabulatime/errors.hpp"
#include "tabulatime/tensor.hpp"
#include "tabulatime/training.hpp"

using namespace tabulatime;

namespace {

std::set<std::int64_t> as_set(const std::vector<std::int64_t>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("split sizes follow the nested fractions") {
  TrainConfig config;  // 0.8 train_frac, 0.1 of that for validation
  auto split = split_dataset(100, config);
  CHECK(split.train.size() == 72);
  CHECK(split.val.size() == 8);
  CHECK(split.test.size() == 20);
  // Disjoint cover of every row.
  std::set<std::int64_t> seen;
  for (auto part : {&split.train, &split.val, &split.test}) {
    for (auto row : *part) {
      CHECK(seen.insert(row).second);
    }
  }
  CHECK(seen.size() == 100);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 99);
}

TEST_CASE("ordering keys make the split contiguous in time") {
  TrainConfig config;
  std::vector<double> keys(100);
  for (int i = 0; i < 100; ++i) keys[static_cast<std::size_t>(i)] = 99.0 - i;
  auto split = split_dataset(100, config, &keys);
  auto key_of = [&](std::int64_t row) {
    return keys[static_cast<std::size_t>(row)];
  };
  double train_max = -1e300, val_min = 1e300, val_max = -1e300,
         test_min = 1e300;
  for (auto r : split.train) train_max = std::max(train_max, key_of(r));
  for (auto r : split.val) {
    val_min = std::min(val_min, key_of(r));
    val_max = std::max(val_max, key_of(r));
  }
  for (auto r : split.test) test_min = std::min(test_min, key_of(r));
  CHECK(train_max < val_min);   // validation directly precedes test
  CHECK(val_max < test_min);    // test is the latest block
}

TEST_CASE("identity keys produce the identity split") {
  TrainConfig config;
  std::vector<double> keys(100);
  for (int i = 0; i < 100; ++i) keys[static_cast<std::size_t>(i)] = i;
  auto split = split_dataset(100, config, &keys);
  for (std::int64_t i = 0; i < 72; ++i) CHECK(split.train[static_cast<std::size_t>(i)] == i);
  for (std::int64_t i = 0; i < 8; ++i) CHECK(split.val[static_cast<std::size_t>(i)] == 72 + i);
  for (std::int64_t i = 0; i < 20; ++i) CHECK(split.test[static_cast<std::size_t>(i)] == 80 + i);
}

TEST_CASE("tied keys keep row order") {
  TrainConfig config;
  std::vector<double> keys(10, 1.0);
  config.train_frac = 0.8;
  config.val_frac_of_train = 0.25;
  auto split = split_dataset(10, config, &keys);
  // fit 8, val 2, train 6, test 2; stable sort leaves ties in place.
  CHECK(split.train == std::vector<std::int64_t>({0, 1, 2, 3, 4, 5}));
  CHECK(split.val == std::vector<std::int64_t>({6, 7}));
  CHECK(split.test == std::vector<std::int64_t>({8, 9}));
}

TEST_CASE("shuffled splits are seed-deterministic") {
  TrainConfig config;
  auto a = split_dataset(100, config);
  auto b = split_dataset(100, config);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  config.seed += 1;
  auto c = split_dataset(100, config);
  CHECK(a.train != c.train);
  // Every variant still covers the same row set.
  std::set<std::int64_t> all = as_set(a.train);
  for (auto r : a.val) all.insert(r);
  for (auto r : a.test) all.insert(r);
  CHECK(all.size() == 100);
}

TEST_CASE("split rejects degenerate partitions") {
  TrainConfig config;
  CHECK_THROWS_AS(split_dataset(0, config), DataError);
  CHECK_THROWS_AS(split_dataset(3, config), DataError);  // validation empty
  TrainConfig bad = config;
  bad.train_frac = 1.0;
  CHECK_THROWS_AS(split_dataset(100, bad), ContractError);
  std::vector<double> short_keys(5, 0.0);
  CHECK_THROWS_AS(split_dataset(100, config, &short_keys), DimensionError);
}

TEST_CASE("adam first step has a closed form") {
  Tensor theta = Tensor::zeros({3});
  theta.raw() = {1.0, 2.0, -3.0};
  theta.set_requires_grad(true);
  Tensor c = Tensor::zeros({3});
  c.raw() = {3.0, -4.0, 0.5};
  AdamConfig config;  // lr 1e-3, eps 1e-8
  Adam adam({theta}, config);
  {
    GradTape tape;
    Tensor loss = sum(mul(theta, c));
    tape.backward(loss);
  }
  adam.step();
  // Bias correction makes step one exactly lr * g / (|g| + eps).
  double expected[3];
  const double start[] = {1.0, 2.0, -3.0}, g[] = {3.0, -4.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    expected[i] = start[i] - config.learning_rate * g[i] /
                                (std::fabs(g[i]) + config.eps);
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(theta.data()[static_cast<std::size_t>(i)] ==
          doctest::Approx(expected[i]).epsilon(1e-14));
  }
  CHECK(adam.steps_taken() == 1);
  adam.zero_grad();
  for (double gv : theta.grad()) CHECK(gv == 0.0);
}

TEST_CASE("adam rejects unusable parameter lists") {
  CHECK_THROWS_AS(Adam({}, AdamConfig{}), ContractError);
  Tensor frozen = Tensor::zeros({2});
  CHECK_THROWS_AS(Adam({frozen}, AdamConfig{}), ContractError);
}

TEST_CASE("adam drives a quadratic to its minimum") {
  Tensor theta = Tensor::scalar(0.0);
  theta.set_requires_grad(true);
  AdamConfig config;
  config.learning_rate = 0.05;
  Adam adam({theta}, config);
  for (int i = 0; i < 3000; ++i) {
    adam.zero_grad();
    GradTape tape;
    Tensor diff = add_scalar(theta, -5.0);
    Tensor loss = mul(diff, diff);
    tape.backward(loss);
    adam.step();
  }
  CHECK(theta.item() == doctest::Approx(5.0).epsilon(1e-3));
}

TEST_CASE("fit trains to convergence and restores the best weights") {
  Tensor w = Tensor::scalar(0.0);
  w.set_requires_grad(true);
  TrainConfig config;
  config.learning_rate = 0.05;
  config.max_epochs = 200;
  config.patience = 25;
  auto batch_loss = [&](std::span<const std::int64_t>) {
    Tensor diff = add_scalar(w, -3.0);
    return mul(diff, diff);
  };
  auto val_loss = [&]() { return (w.item() - 3.0) * (w.item() - 3.0); };
  auto history = fit({w}, 20, batch_loss, val_loss, config);
  CHECK(std::fabs(w.item() - 3.0) < 1e-2);
  CHECK(history.best_val_loss < 1e-4);
  REQUIRE(!history.epochs.empty());
  CHECK(history.epochs.front().train_loss > history.epochs.back().train_loss);
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    CHECK(history.epochs[i].epoch == static_cast<int>(i) + 1);
  }
  CHECK(history.best_epoch >= 1);
  CHECK(history.best_epoch <= static_cast<int>(history.epochs.size()));
}

TEST_CASE("patience stops training and rolls weights back") {
  Tensor w = Tensor::scalar(1.0);
  w.set_requires_grad(true);
  TrainConfig config;
  config.learning_rate = 0.1;
  config.max_epochs = 50;
  config.patience = 1;
  config.batch_size = 4;
  auto batch_loss = [&](std::span<const std::int64_t>) {
    return mul(w, w);  // keeps pushing w toward zero
  };
  int calls = 0;
  double w_at_first_val = std::numeric_limits<double>::quiet_NaN();
  auto val_loss = [&]() {
    ++calls;
    if (calls == 1) {
      w_at_first_val = w.item();
      return 1.0;
    }
    return 2.0;  // never improves again
  };
  auto history = fit({w}, 4, batch_loss, val_loss, config);
  CHECK(history.early_stopped);
  CHECK(history.best_epoch == 1);
  CHECK(history.epochs.size() == 2);
  CHECK(history.best_val_loss == 1.0);
  // The second epoch moved w further, but fit hands back epoch one's value.
  CHECK(w.item() == doctest::Approx(w_at_first_val).epsilon(1e-15));
}

TEST_CASE("each epoch visits every row once in a reshuffled order") {
  Tensor w = Tensor::scalar(0.5);
  w.set_requires_grad(true);
  TrainConfig config;
  config.max_epochs = 2;
  config.patience = 10;
  config.batch_size = 16;
  std::vector<std::vector<std::int64_t>> epochs_seen(1);
  auto batch_loss = [&](std::span<const std::int64_t> batch) {
    auto& current = epochs_seen.back();
    current.insert(current.end(), batch.begin(), batch.end());
    if (current.size() == 20) epochs_seen.emplace_back();
    return mul(w, Tensor::scalar(0.0));
  };
  int vals = 0;
  auto val_loss = [&]() { return 1.0 / static_cast<double>(++vals); };
  fit({w}, 20, batch_loss, val_loss, config);
  REQUIRE(epochs_seen.size() >= 3);  // two full epochs plus the fresh tail
  for (int e = 0; e < 2; ++e) {
    CHECK(epochs_seen[static_cast<std::size_t>(e)].size() == 20);
    CHECK(as_set(epochs_seen[static_cast<std::size_t>(e)]).size() == 20);
  }
  CHECK(epochs_seen[0] != epochs_seen[1]);  // reshuffled between epochs
}

TEST_CASE("non-finite losses stop training with the failing epoch") {
  Tensor w = Tensor::scalar(1.0);
  w.set_requires_grad(true);
  TrainConfig config;
  auto batch_loss = [&](std::span<const std::int64_t>) {
    return mul(w, Tensor::scalar(std::numeric_limits<double>::quiet_NaN()));
  };
  auto val_loss = [&]() { return 1.0; };
  CHECK_THROWS_WITH_AS(fit({w}, 8, batch_loss, val_loss, config),
                       "loss became non-finite at epoch 1", TrainingError);
}
