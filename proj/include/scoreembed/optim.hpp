#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scoreembed/corpus.hpp"
#include "scoreembed/model.hpp"
#include "scoreembed/scorerep.hpp"

namespace scoreembed {

// --------------------------------------------------------------- AdaGrad

// G += g^2; theta -= lr * g / (sqrt(G) + eps), element-wise.
void adagrad_step(std::span<double> params, std::span<const double> grads, std::span<double> accum, double lr,
                  double epsilon);

struct AdaGradState {
  Parameters accum;
  double lr = 0.05;
  double epsilon = 1e-8;

  AdaGradState(const Parameters& like, double lr, double epsilon);
};

// Applies one step to every trainable block (PAD row excluded). Throws
// NumericError naming the block when a gradient is not finite; nothing is
// updated in that case.
void adagrad_update(AdaGradState& state, Parameters& params, const Parameters& grads);

// ---------------------------------------------------------------- config

struct TrainConfig {
  double lr = 0.05;
  double epsilon = 1e-8;
  std::size_t batch_size = 50;
  std::size_t epochs = 25;
  double dropout = 0.5;
  std::uint64_t seed = 1;
  std::int64_t min_freq = 1;
  double smoothing = 0.0;
  CountMode count_mode = CountMode::token_occurrences;
  Aggregation aggregation = Aggregation::mean;
  std::vector<std::size_t> widths{3, 4, 5};
  std::size_t filters = 128;
  Activation activation = Activation::relu;
  double dev_fraction = 0.1;
  std::size_t patience = 5;
  bool twitter = true;
  double nb_beta = 1.0;
  double linear_lr = 0.5;
  std::size_t linear_epochs = 500;

  ModelConfig model_config(std::size_t classes) const;
  TokenizerOptions tokenizer() const { return {twitter}; }

  // Sets one key from its text form. Throws ConfigError.
  void set(const std::string& key, const std::string& value);
  // Every key with its resolved value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  void validate() const;
};

// `key=value` lines; blank lines and `#` comments ignored.
void apply_config_file(const std::filesystem::path& path, TrainConfig& cfg);

// --------------------------------------------------------------- metrics

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::size_t n = 0;
};

// Per-class F1 = 2TP / (2TP + FP + FN); a class with no support and no
// predictions scores 0. Throws DataError on empty or mismatched input.
Metrics compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                        std::size_t num_classes);

// Chance-corrected agreement; p_e == 1 gives 1 when p_o == 1, else 0.
double cohen_kappa(std::span<const std::size_t> a, std::span<const std::size_t> b);

// -------------------------------------------------------------- training

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainResult {
  Model model;  // parameters of the best dev epoch (earliest on ties)
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

// Mini-batch AdaGrad on the mean negative log-likelihood. Per-example work is
// spread over `threads` workers; gradients are summed in example order so the
// result does not depend on the thread count.
TrainResult train(const Dataset& train_data, const Dataset& dev_data, const Vocabulary& vocab,
                  const ScoreTable& table, const TrainConfig& cfg, std::size_t threads = 1);
TrainResult train_from(Model initial, const Dataset& train_data, const Dataset& dev_data, const Vocabulary& vocab,
                       const TrainConfig& cfg, std::size_t threads = 1);

// Mean eval-mode negative log-likelihood.
double mean_loss(const Model& model, const Dataset& data, const Vocabulary& vocab, std::size_t threads = 1);

std::vector<double> predict_proba(const Model& model, const TokenSeq& tokens, const Vocabulary& vocab);
std::size_t predict(const Model& model, const TokenSeq& tokens, const Vocabulary& vocab);
std::vector<std::size_t> predict_all(const Model& model, const Dataset& data, const Vocabulary& vocab,
                                     std::size_t threads = 1);

Metrics evaluate(const Model& model, const Dataset& data, const Vocabulary& vocab, std::size_t threads = 1);

std::string history_csv(const std::vector<EpochRecord>& history);

// ------------------------------------------------------ cross-validation

struct FoldResult {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  Metrics metrics;
};

struct CvReport {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double stdev_accuracy = 0.0;  // sample standard deviation
  double mean_macro_f1 = 0.0;
  double stdev_macro_f1 = 0.0;
};

// Trains on `train`, returns one predicted class per example of `test`.
using FoldPredictor = std::function<std::vector<std::size_t>(std::size_t fold, const Dataset& train,
                                                             const Dataset& test)>;

// Stratified k-fold driver shared by every method.
CvReport kfold_evaluate(const Dataset& data, std::size_t k, std::uint64_t seed, const FoldPredictor& predictor);

struct FoldContext {
  std::size_t fold;
  const Dataset& train;
  const Dataset& dev;
  const Dataset& test;
  const Vocabulary& vocab;
  const ScoreTable& table;
};

using FoldObserver = std::function<void(const FoldContext&)>;

// Score-embedding cross-validation. Per fold: a dev split is carved from the
// training folds, vocabulary and scores are learned from the remainder only,
// the network is trained and the held-out fold evaluated.
CvReport cross_validate(const Dataset& data, const TrainConfig& cfg, std::size_t k = 5, std::size_t threads = 1,
                        const FoldObserver& observer = {});

// `fold,n_train,n_test,accuracy,macro_f1,accuracy_stdev,macro_f1_stdev`
// with one row per fold and a `summary` row. Resolved config entries, when
// given, precede the header as `# key=value` lines.
std::string cv_report_csv(const CvReport& report, const TrainConfig* cfg = nullptr);

}  // namespace scoreembed
