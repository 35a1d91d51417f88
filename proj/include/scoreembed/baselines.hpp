#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "scoreembed/corpus.hpp"
#include "scoreembed/matrix.hpp"
#include "scoreembed/optim.hpp"
#include "scoreembed/scorerep.hpp"

namespace scoreembed {

// ----------------------------------------------------------------- lexicon

struct Lexicon {
  std::set<std::string, std::less<>> positive;
  std::set<std::string, std::less<>> negative;
  std::vector<std::string> warnings;
};

// One term per line, `;` comments. Terms present in both files are dropped
// from both with a warning.
Lexicon load_lexicon(const std::filesystem::path& positive_path, const std::filesystem::path& negative_path);
Lexicon make_lexicon(std::vector<std::string> positive, std::vector<std::string> negative);

enum class Polarity { negative, neutral, positive };

// Positive if more positive hits than negative, negative if the reverse,
// otherwise neutral.
Polarity lexicon_classify(const Lexicon& lex, const TokenSeq& tokens);

// Class indices used when scoring the lexicon rule against a dataset.
struct PolarityClasses {
  std::size_t negative = 0;
  std::size_t neutral = 1;
  std::size_t positive = 2;

  std::size_t of(Polarity p) const {
    return p == Polarity::negative ? negative : p == Polarity::positive ? positive : neutral;
  }
};

// -------------------------------------------------------------------- NB

struct NBModel {
  std::vector<double> class_log_priors;
  Matrix word_log_likelihoods;  // |V| x C; row r is vocabulary index r + kFirstWord
};

// p(w|c) = (count(w,c) + beta) / (sum_w count(w,c) + beta |V|)
NBModel train_nb(const Dataset& data, const Vocabulary& vocab, double beta = 1.0);
// Out-of-vocabulary tokens are skipped.
std::size_t predict_nb(const NBModel& model, const TokenSeq& tokens, const Vocabulary& vocab);
std::vector<double> nb_log_posterior(const NBModel& model, const TokenSeq& tokens, const Vocabulary& vocab);

// ----------------------------------------------------- linear on scores

struct LinearScoreModel {
  Matrix weights;  // C_feat x C
  std::vector<double> bias;
  Aggregation aggregation = Aggregation::mean;
};

struct LinearTrainConfig {
  double lr = 0.5;
  double epsilon = 1e-8;
  std::size_t max_epochs = 500;
  double tolerance = 1e-7;
  Aggregation aggregation = Aggregation::mean;

  static LinearTrainConfig from(const TrainConfig& cfg);
};

// Mean negative log-likelihood of a multinomial logistic model and its
// gradient (same layout as the model).
double linear_loss(const LinearScoreModel& model, std::span<const std::vector<double>> features,
                   std::span<const std::size_t> labels, LinearScoreModel* gradient = nullptr);

// Full-batch AdaGrad from zero weights until the loss changes by less than
// the tolerance or max_epochs is reached. Throws DataError on single-class data.
LinearScoreModel fit_linear(std::span<const std::vector<double>> features, std::span<const std::size_t> labels,
                            std::size_t num_classes, const LinearTrainConfig& cfg);
LinearScoreModel train_linear_on_scores(const Dataset& data, const ScoreTable& table, const Vocabulary& vocab,
                                        const LinearTrainConfig& cfg = {});

std::vector<double> linear_logits(const LinearScoreModel& model, std::span<const double> feature);
// argmax(W^T x + b), ties to the lowest index. Throws DataError on a
// dimension mismatch.
std::size_t predict_linear(const LinearScoreModel& model, std::span<const double> feature);

}  // namespace scoreembed
