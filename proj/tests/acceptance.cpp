// Acceptance gate: each numbered criterion prints exactly one [PASS] or
// [FAIL] line with the measured quantities, and the binary exits with the
// number of failed criteria. Criterion 10 (public weather benchmark) needs a
// dataset that is not bundled, so it prints [SKIP] and never gates.
//
// With no arguments every criterion runs in order. Passing numbers runs a
// subset (handy when tuning one check); criterion 6 reuses the model trained
// by criterion 5, so it only works in an invocation that also runs 5.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tabulatime/importance.hpp"
#include "tabulatime/io.hpp"
#include "tabulatime/metrics.hpp"
#include "tabulatime/model.hpp"
#include "tabulatime/pipeline.hpp"
#include "tabulatime/rwkv.hpp"
#include "tabulatime/synth.hpp"
#include "tabulatime/tensor.hpp"

using namespace tabulatime;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double value) {
  std::ostringstream out;
  out.precision(4);
  out << value;
  return out.str();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw CheckFailure(message);
}

void require_budget(Clock::time_point start, double limit_seconds) {
  const double elapsed = seconds_since(start);
  require(elapsed < limit_seconds, "runtime " + num(elapsed) +
                                       " s exceeds the " + num(limit_seconds) +
                                       " s budget");
}

const std::filesystem::path& scratch_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / "tabulatime_acceptance";
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = scratch_dir() / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw CheckFailure("cannot write " + path.string());
  return path.string();
}

// ---- criterion 1: the linear-time WKV route matches the quadratic one -----

std::string check_wkv_equivalence() {
  const auto start = Clock::now();
  std::mt19937_64 rng(0x5eed0001ULL);
  const int instances = 240;
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const auto tokens = static_cast<std::int64_t>(1 + rng() % 64);
    const auto head_dim = static_cast<std::int64_t>(1 + rng() % 16);
    const auto heads = static_cast<std::int64_t>(1 + rng() % 4);
    const std::int64_t width = heads * head_dim;
    const Tensor k = Tensor::uniform({tokens, width}, -2.0, 2.0, rng);
    const Tensor v = Tensor::uniform({tokens, width}, -2.0, 2.0, rng);
    const Tensor w = Tensor::uniform({heads, head_dim}, 0.05, 0.99, rng);
    const Tensor u = Tensor::uniform({heads, head_dim}, -1.0, 1.0, rng);
    const Tensor direct = wkv_direct(k, v, w, u);
    const Tensor recurrent = wkv_recurrent(k, v, w, u);
    for (std::size_t f = 0; f < direct.data().size(); ++f) {
      worst = std::max(worst,
                       std::abs(direct.data()[f] - recurrent.data()[f]));
    }
  }
  require(worst < 1e-9, "max |direct - recurrent| = " + num(worst) +
                            " is not under 1e-9");
  require_budget(start, 30.0);
  return "max |direct - recurrent| = " + num(worst) + " across " +
         std::to_string(instances) +
         " randomized instances (T <= 64, head dim <= 16)";
}

// ---- criterion 2: encoder cost grows linearly in the token count -----------

std::string check_linear_scaling() {
  const auto start = Clock::now();
  EncoderConfig config;
  config.layers = 2;
  config.embed_dim = 64;
  config.heads = 4;
  std::mt19937_64 rng(0x5eed0002ULL);
  const EncoderParams params = EncoderParams::init(config, rng);
  const Tensor short_tokens = Tensor::uniform({1, 4, 64, 64}, -1.0, 1.0, rng);
  const Tensor long_tokens = Tensor::uniform({1, 4, 256, 64}, -1.0, 1.0, rng);
  (void)encode(short_tokens, config, params);
  (void)encode(long_tokens, config, params);

  std::vector<double> short_times, long_times;
  for (int trial = 0; trial < 20; ++trial) {
    auto t0 = Clock::now();
    (void)encode(short_tokens, config, params);
    short_times.push_back(seconds_since(t0));
    t0 = Clock::now();
    (void)encode(long_tokens, config, params);
    long_times.push_back(seconds_since(t0));
  }
  const auto median = [](std::vector<double> xs) {
    std::nth_element(xs.begin(), xs.begin() + xs.size() / 2, xs.end());
    return xs[xs.size() / 2];
  };
  const double ratio = median(long_times) / median(short_times);
  require(ratio >= 3.0 && ratio <= 6.0,
          "time(T=256)/time(T=64) = " + num(ratio) + " lies outside [3, 6]");
  require_budget(start, 120.0);
  return "time(T=256)/time(T=64) = " + num(ratio) +
         " (median of 20 trials, token width 64): a quadratic encoder would "
         "sit near 16";
}

// ---- criterion 3: analytic gradients match central finite differences ------

std::string check_gradient_integrity() {
  const auto start = Clock::now();
  ModelConfig config;
  config.task = "classification";
  config.mode = "full";
  config.layers = 1;
  config.embed_dim = 8;
  config.heads = 2;
  config.patch_size = 6;
  config.stride = 6;
  config.tabular_dim = 4;
  config.head_hidden = 8;
  config.classes = 2;
  Model model(config, /*channels=*/3, /*patches=*/4, /*tab_features=*/3,
              /*seed=*/0x5eed0003ULL);

  std::mt19937_64 rng(0x5eed0004ULL);
  const Tensor windows = Tensor::uniform({3, 3, 4, 6}, -1.5, 1.5, rng);
  const Tensor tab = Tensor::uniform({3, 3}, -1.0, 1.0, rng);
  const std::vector<int> labels = {1, 0, 1};

  auto params = model.named_parameters();
  std::vector<std::vector<double>> analytic;
  {
    GradTape tape;
    Tensor loss = cross_entropy_with_logits(model.class_logits(windows, tab),
                                            labels);
    tape.backward(loss);
  }
  for (const auto& [name, p] : params) analytic.push_back(p.grad());

  const auto loss_value = [&] {
    return cross_entropy_with_logits(model.class_logits(windows, tab), labels)
        .item();
  };
  const double eps = 1e-5;
  std::int64_t total = 0, off = 0;
  double worst = 0.0;
  std::string worst_name = "-";
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi].second;
    for (std::size_t f = 0; f < p.raw().size(); ++f) {
      const double saved = p.raw()[f];
      p.raw()[f] = saved + eps;
      const double up = loss_value();
      p.raw()[f] = saved - eps;
      const double down = loss_value();
      p.raw()[f] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double ga = analytic[pi][f];
      const double rel =
          std::abs(fd - ga) / std::max(1e-8, std::abs(fd) + std::abs(ga));
      ++total;
      if (rel >= 1e-3) ++off;
      if (rel > worst) {
        worst = rel;
        worst_name = params[pi].first;
      }
    }
  }
  const double good = 1.0 - static_cast<double>(off) / total;
  require(good >= 0.99, num(100.0 * good) + "% of " + std::to_string(total) +
                            " parameters within 1e-3 (need 99%)");
  require(worst < 1e-2, "worst relative error " + num(worst) + " (" +
                            worst_name + ") is not under 1e-2");
  require_budget(start, 120.0);
  return num(100.0 * good) + "% of " + std::to_string(total) +
         " parameters within 1e-3 of central differences; worst " +
         num(worst) + " (" + worst_name + ")";
}

// ---- criterion 4: perturbations never travel backwards in time -------------

std::string check_causality() {
  const auto start = Clock::now();
  EncoderConfig config;
  config.layers = 2;
  config.embed_dim = 8;
  config.heads = 2;
  std::mt19937_64 rng(0x5eed0005ULL);
  EncoderParams params = EncoderParams::init(config, rng);
  // The identity-at-init output projections would make this vacuous, so
  // randomize every trainable and let information actually flow forward.
  std::vector<std::pair<std::string, Tensor>> named;
  params.collect(named, "block");
  for (auto& [name, tensor] : named) {
    for (double& x : tensor.raw()) {
      x = -0.8 + 1.6 * static_cast<double>(rng() % 10000) / 10000.0;
    }
  }

  const std::int64_t tokens = 8, width = 8;
  const Tensor base_tokens =
      Tensor::uniform({1, 1, tokens, width}, -1.0, 1.0, rng);
  const Tensor base = encode(base_tokens, config, params);
  for (std::int64_t perturbed_at = 0; perturbed_at < tokens; ++perturbed_at) {
    Tensor tweaked = base_tokens.detached();
    // One channel only: a uniform bump across the token would be swallowed
    // by the shift-invariance of layer normalization.
    tweaked.raw()[perturbed_at * width + 2] += 0.25;
    const Tensor out = encode(tweaked, config, params);
    for (std::int64_t t = 0; t < tokens; ++t) {
      double diff = 0.0;
      for (std::int64_t c = 0; c < width; ++c) {
        diff = std::max(diff, std::abs(out.at({0, 0, t, c}) -
                                       base.at({0, 0, t, c})));
      }
      if (t < perturbed_at) {
        require(diff == 0.0, "perturbing position " +
                                 std::to_string(perturbed_at) +
                                 " leaked backwards to position " +
                                 std::to_string(t) + " (diff " + num(diff) +
                                 ")");
      } else {
        require(diff > 0.0, "perturbing position " +
                                std::to_string(perturbed_at) +
                                " left position " + std::to_string(t) +
                                " unchanged; the check is vacuous");
      }
    }
  }
  require_budget(start, 30.0);
  return "all 8 perturbation positions: outputs before the edit are "
         "bit-identical, outputs at and after it move";
}

// ---- criteria 5 and 6 share one trained multimodal model -------------------

struct JointState {
  RunConfig run;
  ClassificationDataset data;
  Model model;
};
std::optional<JointState> g_joint;

std::string check_multimodal_gain() {
  const auto start = Clock::now();
  // Enough events that the encoder settles on the planted day-2 anomaly
  // instead of memorizing the training windows; a heavier environment weight
  // keeps the series signal out of the tabular branch's reach.
  ClassificationSynthConfig synth_config;
  synth_config.events = 8000;
  synth_config.env_weight = 2.0;
  synth_config.label_noise = 0.02;
  synth_config.marker_correlation = 0.7;
  SynthDataset synth = synth_classification(synth_config);
  RunConfig run = synth.run;
  run.events_path = write_file("c5_events.csv", synth.events_csv);
  run.environment_path =
      write_file("c5_environment.csv", synth.environment_csv);
  run.model.layers = 1;
  run.model.embed_dim = 16;
  run.model.heads = 4;
  run.model.head_hidden = 64;
  run.model.dropout = 0.1;
  run.train.learning_rate = 3e-3;
  run.train.batch_size = 32;
  run.train.max_epochs = 60;
  run.train.patience = 6;
  run.train.seed = synth_config.seed;

  ClassificationDataset data = load_classification(run);
  const auto test_rows = data.split.test.size();
  ClassifierRun joint = train_classifier(run, data);

  RunConfig tabular_run = run;
  tabular_run.model.mode = "tabular_only";
  ClassifierRun tabular = train_classifier(tabular_run, data);

  const double joint_acc = joint.test_metrics.accuracy;
  const double tabular_acc = tabular.test_metrics.accuracy;
  g_joint = JointState{std::move(run), std::move(data),
                       std::move(joint.model)};
  require(joint_acc >= 0.95,
          "joint test accuracy " + num(joint_acc) + " is under 0.95");
  require(tabular_acc <= 0.8, "tabular-only test accuracy " +
                                  num(tabular_acc) +
                                  " exceeds 0.8; the planted series signal "
                                  "leaked into the tabular branch");
  require_budget(start, 600.0);
  return "joint test accuracy " + num(joint_acc) + " vs tabular-only " +
         num(tabular_acc) + " on " + std::to_string(test_rows) +
         " held-out events";
}

std::string check_importance_recovery() {
  const auto start = Clock::now();
  require(g_joint.has_value(),
          "needs the model trained by criterion 5 in this invocation");
  JointState& st = *g_joint;
  const auto& val = st.data.split.val;
  const std::vector<int> val_labels = take_ints(st.data.labels, val);
  const Tensor val_windows = take_rows(st.data.windows, val);
  const Tensor val_tab = take_rows(st.data.tabular.matrix, val);

  const auto accuracy_of = [&](const Tensor& windows, const Tensor& tab) {
    const Tensor probs = softmax_rows(st.model.class_logits(windows, tab));
    std::vector<double> scores(val.size());
    for (std::size_t r = 0; r < val.size(); ++r) {
      scores[r] = probs.data()[2 * r + 1];
    }
    return classification_metrics(val_labels, scores).accuracy;
  };
  const auto tab_metric = [&](const Tensor& matrix) {
    return accuracy_of(val_windows, take_rows(matrix, val));
  };
  const auto step_metric = [&](const Tensor& windows) {
    return accuracy_of(take_rows(windows, val), val_tab);
  };

  const auto groups = feature_groups(st.data.tabular);
  int feature_hits = 0, day_hits = 0;
  for (int s = 0; s < 5; ++s) {
    const ImportanceReport features = permutation_importance(
        tab_metric, st.data.tabular.matrix, groups, /*repeats=*/3,
        /*seed=*/9000 + s, /*higher_is_better=*/true, "accuracy");
    const ImportanceReport days = step_importance(
        step_metric, st.data.windows, /*repeats=*/3, /*seed=*/9100 + s,
        /*higher_is_better=*/true, "accuracy");
    if (!features.entries.empty() && features.entries[0].name == "RiskScore") {
      ++feature_hits;
    }
    if (!days.entries.empty() && days.entries[0].name == "day_2") ++day_hits;
  }
  require(feature_hits >= 4, "RiskScore ranked first in only " +
                                 std::to_string(feature_hits) + "/5 runs");
  require(day_hits >= 4,
          "day_2 ranked first in only " + std::to_string(day_hits) +
              "/5 runs");
  require_budget(start, 600.0);
  return "RiskScore first among tabular features in " +
         std::to_string(feature_hits) + "/5 seeded runs, day_2 first among "
         "days in " +
         std::to_string(day_hits) + "/5";
}

// ---- criterion 7: forecaster beats the repeat-last baseline ----------------

std::string check_forecast_beats_persistence() {
  const auto start = Clock::now();
  ForecastSynthConfig synth_config;  // AR(2) + daily season, 3 channels
  SynthDataset synth = synth_forecast(synth_config);
  RunConfig run = synth.run;
  run.environment_path =
      write_file("c7_environment.csv", synth.environment_csv);
  run.model.layers = 2;
  run.model.embed_dim = 32;
  run.model.heads = 4;
  run.train.learning_rate = 1e-3;
  run.train.batch_size = 16;
  run.train.max_epochs = 40;
  run.train.patience = 6;
  run.train.seed = synth_config.seed;

  const EnvTable env = ingest_environment(run.environment_path);
  const ForecastDataset data = prepare_forecast(run, env);
  const ForecastRun trained = train_forecaster(run, data);
  const double model_mse = trained.test_normalized.mse;
  const double baseline_mse = trained.persistence_normalized.mse;
  const double improvement = 1.0 - model_mse / baseline_mse;
  require(improvement >= 0.20,
          "normalized MSE " + num(model_mse) + " only improves on the " +
              num(baseline_mse) + " persistence baseline by " +
              num(100.0 * improvement) + "% (need 20%)");
  require_budget(start, 600.0);
  return "240 -> 48 hour windows: normalized MSE " + num(model_mse) +
         " vs persistence " + num(baseline_mse) + " (" +
         num(100.0 * improvement) + "% better)";
}

// ---- criterion 8: metrics against hand-computed fixtures -------------------

struct ConfusionFixture {
  const char* name;
  std::vector<int> labels;
  std::vector<double> scores;
  double threshold;
  std::int64_t tp, fp, tn, fn;
  bool auc_defined;
};

std::string check_metrics_oracle() {
  const auto start = Clock::now();
  // Hand-worked fixtures; predicted positive means score >= threshold.
  const std::vector<ConfusionFixture> fixtures = {
      {"perfect", {1, 1, 0, 0}, {0.9, 0.8, 0.1, 0.2}, 0.5, 2, 0, 2, 0, true},
      {"inverted", {1, 0}, {0.2, 0.9}, 0.5, 0, 1, 0, 1, true},
      {"boundary scores predict positive",
       {1, 0},
       {0.5, 0.5},
       0.5,
       1, 1, 0, 0,
       true},
      {"mixed ten",
       {1, 1, 1, 1, 0, 0, 0, 0, 0, 0},
       {0.9, 0.7, 0.6, 0.3, 0.8, 0.55, 0.2, 0.1, 0.4, 0.45},
       0.5,
       3, 2, 4, 1,
       true},
      {"nothing predicted positive",
       {1, 1, 0},
       {0.1, 0.2, 0.3},
       0.5,
       0, 0, 1, 2,
       true},
      {"everything predicted positive",
       {1, 0, 0},
       {0.9, 0.8, 0.7},
       0.5,
       1, 2, 0, 0,
       true},
      {"single positive sample", {1}, {0.6}, 0.5, 1, 0, 0, 0, false},
      {"single negative sample", {0}, {0.6}, 0.5, 0, 1, 0, 0, false},
      {"skewed one-in-ten",
       {1, 0, 0, 0, 0, 0, 0, 0, 0, 0},
       {0.9, 0.6, 0.55, 0.4, 0.3, 0.2, 0.45, 0.1, 0.25, 0.15},
       0.5,
       1, 2, 7, 0,
       true},
      {"custom threshold 0.3",
       {1, 1, 0, 0, 0},
       {0.35, 0.25, 0.31, 0.1, 0.2},
       0.3,
       1, 1, 2, 1,
       true},
  };

  for (const auto& fx : fixtures) {
    const ClassificationMetrics m =
        classification_metrics(fx.labels, fx.scores, fx.threshold);
    const auto& c = m.confusion;
    require(c.tp == fx.tp && c.fp == fx.fp && c.tn == fx.tn && c.fn == fx.fn,
            std::string(fx.name) + ": confusion (" + std::to_string(c.tp) +
                "," + std::to_string(c.fp) + "," + std::to_string(c.tn) +
                "," + std::to_string(c.fn) + ") != hand counts");
    const double n = static_cast<double>(fx.tp + fx.fp + fx.tn + fx.fn);
    const double accuracy = static_cast<double>(fx.tp + fx.tn) / n;
    const double precision =
        (fx.tp + fx.fp) > 0
            ? static_cast<double>(fx.tp) / static_cast<double>(fx.tp + fx.fp)
            : 0.0;
    const double recall =
        (fx.tp + fx.fn) > 0
            ? static_cast<double>(fx.tp) / static_cast<double>(fx.tp + fx.fn)
            : 0.0;
    const double f1 = (precision + recall) > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    require(m.accuracy == accuracy,
            std::string(fx.name) + ": accuracy " + num(m.accuracy) +
                " != hand value " + num(accuracy));
    require(m.precision == precision,
            std::string(fx.name) + ": precision " + num(m.precision) +
                " != hand value " + num(precision));
    require(m.recall == recall, std::string(fx.name) + ": recall " +
                                    num(m.recall) + " != hand value " +
                                    num(recall));
    require(m.f1 == f1, std::string(fx.name) + ": F1 " + num(m.f1) +
                            " != hand value " + num(f1));
    require(m.auc.has_value() == fx.auc_defined,
            std::string(fx.name) + ": AUC definedness is wrong");
    if (!fx.auc_defined) {
      require(m.warning == "AUC undefined: only one class present",
              std::string(fx.name) + ": missing one-class warning");
    }
  }

  // Six-point ROC walked by hand. Sweeping thresholds down the distinct
  // scores gives (FPR, TPR) points
  //   (0,0) (0,1/3) (0,2/3) (1/3,2/3) (1/3,1) (2/3,1) (1,1)
  // and the trapezoids sum to (1/3)(2/3) + (1/3)(1) + (1/3)(1) = 8/9.
  const std::vector<int> auc_labels = {1, 1, 0, 1, 0, 0};
  const std::vector<double> auc_scores = {0.9, 0.8, 0.7, 0.6, 0.4, 0.2};
  const ClassificationMetrics roc =
      classification_metrics(auc_labels, auc_scores);
  require(roc.auc.has_value(), "six-point fixture: AUC missing");
  const double auc_error = std::abs(*roc.auc - 8.0 / 9.0);
  require(auc_error <= 1e-12, "six-point AUC off the hand value by " +
                                  num(auc_error));
  require_budget(start, 30.0);
  return std::to_string(fixtures.size()) +
         " confusion fixtures exact; six-point AUC within " + num(auc_error) +
         " of the hand-computed 8/9";
}

// ---- criterion 9: imputation choice comparison on MCAR gaps ----------------

std::string check_imputation_sensitivity() {
  const auto start = Clock::now();
  // A label dominated by the one clinical score makes imputation quality
  // visible: the trained model leans on RiskScore (the markers are redundant
  // beside it), so a mean-filled gap costs real accuracy while KNN rebuilds
  // the score from the correlated markers. Lots of events keep the
  // comparison above retraining noise at only 2% missingness.
  ClassificationSynthConfig synth_config;
  synth_config.events = 12000;
  synth_config.window_days = 2;
  synth_config.missing_rate = 0.02;
  synth_config.seed = 31;
  synth_config.tab_weight = 2.0;
  synth_config.env_weight = 0.3;
  synth_config.marker_correlation = 0.9;
  SynthDataset synth = synth_classification(synth_config);
  RunConfig base = synth.run;
  base.events_path = write_file("c9_events.csv", synth.events_csv);
  base.environment_path =
      write_file("c9_environment.csv", synth.environment_csv);
  // The tabular-only mode isolates what imputation changes; the series
  // branch never sees the clinical columns.
  base.model.mode = "tabular_only";
  base.model.head_hidden = 64;
  base.train.learning_rate = 1e-3;
  base.train.batch_size = 128;
  base.train.max_epochs = 15;
  base.train.patience = 15;
  base.train.seed = 7;

  const EventTable events =
      load_events(base.events_path, base.schema, base.label_column);
  const EnvTable env = ingest_environment(base.environment_path);

  std::vector<std::pair<std::string, double>> accuracy;
  for (const std::string method : {"mean", "knn", "mice"}) {
    RunConfig run = base;
    run.imputation.method = method;
    const ClassificationDataset data =
        prepare_classification(run, events, env);
    const ClassifierRun trained = train_classifier(run, data);
    accuracy.emplace_back(method, trained.test_metrics.accuracy);
  }
  const double mean_acc = accuracy[0].second;
  const double knn_acc = accuracy[1].second;
  const double mice_acc = accuracy[2].second;
  require(knn_acc >= mean_acc, "knn accuracy " + num(knn_acc) +
                                   " fell below mean imputation " +
                                   num(mean_acc));
  require_budget(start, 600.0);
  return "2% MCAR test accuracy: mean " + num(mean_acc) + ", knn " +
         num(knn_acc) + ", mice " + num(mice_acc);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  const auto wanted = [&](int id) {
    return selected.empty() || selected.count(id) > 0;
  };

  const std::vector<std::pair<std::string, std::function<std::string()>>>
      criteria = {
          {"wkv dual-route equivalence", check_wkv_equivalence},
          {"linear-time encoder scaling", check_linear_scaling},
          {"full-model gradient check", check_gradient_integrity},
          {"strict causality", check_causality},
          {"multimodal gain over tabular-only", check_multimodal_gain},
          {"importance recovery", check_importance_recovery},
          {"forecasting beats persistence", check_forecast_beats_persistence},
          {"classification metrics oracle", check_metrics_oracle},
          {"imputation sensitivity harness", check_imputation_sensitivity},
      };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted(id)) continue;
    const auto start = Clock::now();
    try {
      const std::string detail = criteria[i].second();
      std::printf("[PASS] criterion %d (%s): %s [%.1f s]\n", id,
                  criteria[i].first.c_str(), detail.c_str(),
                  seconds_since(start));
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] criterion %d (%s): %s\n", id,
                  criteria[i].first.c_str(), e.what());
    }
    std::fflush(stdout);
  }
  if (wanted(10)) {
    std::printf(
        "[SKIP] criterion 10 (public weather benchmark): dataset not bundled "
        "in this environment; stretch goal recorded as skipped, not "
        "gating\n");
  }
  if (failures > 0) {
    std::printf("acceptance: %d criterion(s) failed\n", failures);
  }
  return failures;
}
