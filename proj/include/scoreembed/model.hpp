#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scoreembed/corpus.hpp"
#include "scoreembed/matrix.hpp"
#include "scoreembed/scorerep.hpp"

namespace scoreembed {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation parse_activation(std::string_view s);

struct ModelConfig {
  std::size_t classes = 0;
  std::vector<std::size_t> widths{3, 4, 5};
  std::size_t filters = 128;  // per width
  Activation activation = Activation::relu;
  double dropout = 0.5;
  std::uint64_t seed = 1;

  std::size_t max_width() const;
  std::size_t pooled_size() const { return widths.size() * filters; }
  // Throws ConfigError on invalid values.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// F filters of one window width; row f of `weights` is filter f (length h*C).
struct ConvBank {
  std::size_t width = 0;
  Matrix weights;
  std::vector<double> bias;

  bool operator==(const ConvBank&) const = default;
};

// All trainable tensors. The same layout holds gradients and AdaGrad
// accumulators.
struct Parameters {
  Matrix embedding;  // vocab slots x C; row 0 (PAD) stays zero
  std::vector<ConvBank> conv;
  Matrix dense;  // pooled_size x C
  std::vector<double> dense_bias;

  // Named views over every trainable scalar. The embedding view starts after
  // the PAD row, so PAD is never exposed to optimisers or gradient checks.
  std::vector<std::pair<std::string, std::span<double>>> blocks();
  std::vector<std::pair<std::string, std::span<const double>>> blocks() const;

  bool operator==(const Parameters&) const = default;
};

Parameters zeros_like(const Parameters& p);

struct Model {
  ModelConfig config;
  Parameters params;

  std::size_t num_classes() const { return config.classes; }
  // Shortest admissible encoded length.
  std::size_t min_len() const { return config.max_width(); }
};

// Embedding rows copied from the score table (UNK uniform, PAD zero), conv and
// dense weights ~ U(-b, b) with b = sqrt(6 / (fan_in + fan_out)), biases zero.
Model init_model(const ScoreTable& table, const Vocabulary& vocab, ModelConfig config);

// n x C matrix whose row t is the embedding of indices[t].
Matrix embed_sentence(const Parameters& params, const IndexSeq& indices);

double activate(double z, Activation a);

// a(w . window + b)
double conv_feature(std::span<const double> weights, double bias, std::span<const double> window, Activation a);

// Stride-1 feature map of length n - h + 1. Throws DataError when n < h.
std::vector<double> feature_map(std::span<const double> weights, double bias, std::size_t width,
                                const Matrix& sentence, Activation a);

struct PoolResult {
  double value = 0.0;
  std::size_t position = 0;
};

// Maximum and its first position. Throws DataError on an empty map.
PoolResult max_over_time(std::span<const double> map);

struct ForwardMode {
  bool train = false;
  std::uint64_t dropout_seed = 0;

  static ForwardMode eval() { return {}; }
  static ForwardMode training(std::uint64_t seed) { return {true, seed}; }
};

struct ForwardTrace {
  IndexSeq indices;
  Matrix sentence;
  std::vector<std::vector<double>> maps;  // one per filter, bank-major
  std::vector<std::size_t> argmax;
  std::vector<double> mask;  // 0 or 1/(1-p) in training, 1 in eval
  std::vector<double> pooled;  // after dropout
  std::vector<double> logits;
};

ForwardTrace forward(const Model& model, const IndexSeq& indices, ForwardMode mode = ForwardMode::eval());

// dense^T pooled + bias
std::vector<double> dense_logits(const Parameters& params, std::span<const double> pooled);

std::vector<double> softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);
// log softmax(logits)[label]; always <= 0.
double log_likelihood(std::span<const double> logits, std::size_t label);
// Argmax with ties to the lowest index.
std::size_t argmax(std::span<const double> values);

// Gradient of -log_likelihood for one example. Embedding gradients are kept
// sparse: one row per distinct non-PAD index, in first-occurrence order.
struct Gradients {
  std::vector<std::int32_t> embedding_rows;
  Matrix embedding;  // embedding_rows.size() x C
  std::vector<ConvBank> conv;
  Matrix dense;
  std::vector<double> dense_bias;
};

Gradients backward(const Model& model, const ForwardTrace& trace, std::size_t label);

// into += scale * g
void accumulate(Parameters& into, const Gradients& g, double scale = 1.0);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_block;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Skip embedding rows that do not occur in the example (their analytic and
  // numeric gradients are both exactly zero).
  bool touched_rows_only = false;
  // Applied to the analytic gradient before comparison.
  std::function<void(Parameters&)> tamper;
};

// Central differences of the eval-mode loss against backward(), over every
// trainable scalar. Relative error is |ga - gn| / max(|ga|, |gn|, 1e-8).
GradCheckResult grad_check(const Model& model, const IndexSeq& indices, std::size_t label,
                           const GradCheckOptions& opts = {});

}  // namespace scoreembed

namespace scoreembed {

// A small fully random model with one labelled input, for gradient checks:
// 6 words, C = 3, widths {2, 3} with 2 filters each, no dropout, random
// non-zero biases.
struct TinyProblem {
  Vocabulary vocab;
  Model model;
  IndexSeq input;
  std::size_t label = 0;
};

TinyProblem make_tiny_problem(std::uint64_t seed, Activation activation = Activation::relu);

}  // namespace scoreembed
