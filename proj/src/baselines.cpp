#include "scoreembed/baselines.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "scoreembed/error.hpp"

namespace scoreembed {

namespace {

std::set<std::string, std::less<>> read_terms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon " + path.string());
  std::set<std::string, std::less<>> terms;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r\n");
    if (b == std::string::npos || line[b] == ';') continue;
    auto e = line.find_last_not_of(" \t\r\n");
    terms.insert(line.substr(b, e - b + 1));
  }
  return terms;
}

Lexicon make_disjoint(std::set<std::string, std::less<>> pos, std::set<std::string, std::less<>> neg) {
  Lexicon lex;
  for (const auto& t : pos) {
    if (neg.count(t)) {
      lex.warnings.push_back("term '" + t + "' listed as both positive and negative; dropped");
    } else {
      lex.positive.insert(t);
    }
  }
  for (const auto& t : neg) {
    if (!pos.count(t)) lex.negative.insert(t);
  }
  return lex;
}

}  // namespace

Lexicon load_lexicon(const std::filesystem::path& positive_path, const std::filesystem::path& negative_path) {
  return make_disjoint(read_terms(positive_path), read_terms(negative_path));
}

Lexicon make_lexicon(std::vector<std::string> positive, std::vector<std::string> negative) {
  return make_disjoint({positive.begin(), positive.end()}, {negative.begin(), negative.end()});
}

Polarity lexicon_classify(const Lexicon& lex, const TokenSeq& tokens) {
  std::size_t pos = 0, neg = 0;
  for (const auto& t : tokens) {
    if (lex.positive.count(t)) ++pos;
    if (lex.negative.count(t)) ++neg;
  }
  if (pos > neg) return Polarity::positive;
  if (neg > pos) return Polarity::negative;
  return Polarity::neutral;
}

// ---------------------------------------------------------------------- NB

NBModel train_nb(const Dataset& data, const Vocabulary& vocab, double beta) {
  if (data.empty()) throw DataError("cannot train naive Bayes on an empty dataset");
  if (!(beta > 0.0)) throw ConfigError("naive Bayes smoothing must be positive");
  const std::size_t C = data.num_classes();
  const std::size_t V = vocab.word_count();
  Matrix counts(V, C);
  std::vector<double> totals(C, 0.0);
  for (const auto& ex : data.examples) {
    for (const auto& tok : ex.tokens) {
      auto idx = vocab.find(tok);
      if (!idx) continue;
      counts(static_cast<std::size_t>(*idx - Vocabulary::kFirstWord), ex.label) += 1.0;
      totals[ex.label] += 1.0;
    }
  }
  NBModel m;
  auto class_n = data.class_counts();
  for (std::size_t c = 0; c < C; ++c) {
    m.class_log_priors.push_back(std::log(static_cast<double>(class_n[c]) / static_cast<double>(data.size())));
  }
  m.word_log_likelihoods = Matrix(V, C);
  for (std::size_t c = 0; c < C; ++c) {
    const double denom = totals[c] + beta * static_cast<double>(V);
    for (std::size_t w = 0; w < V; ++w) m.word_log_likelihoods(w, c) = std::log((counts(w, c) + beta) / denom);
  }
  return m;
}

std::vector<double> nb_log_posterior(const NBModel& model, const TokenSeq& tokens, const Vocabulary& vocab) {
  std::vector<double> score = model.class_log_priors;
  for (const auto& tok : tokens) {
    auto idx = vocab.find(tok);
    if (!idx) continue;
    auto row = model.word_log_likelihoods.row(static_cast<std::size_t>(*idx - Vocabulary::kFirstWord));
    for (std::size_t c = 0; c < score.size(); ++c) score[c] += row[c];
  }
  return score;
}

std::size_t predict_nb(const NBModel& model, const TokenSeq& tokens, const Vocabulary& vocab) {
  return argmax(nb_log_posterior(model, tokens, vocab));
}

// ------------------------------------------------------ linear on scores

LinearTrainConfig LinearTrainConfig::from(const TrainConfig& cfg) {
  LinearTrainConfig l;
  l.lr = cfg.linear_lr;
  l.epsilon = cfg.epsilon;
  l.max_epochs = cfg.linear_epochs;
  l.aggregation = cfg.aggregation;
  return l;
}

std::vector<double> linear_logits(const LinearScoreModel& model, std::span<const double> feature) {
  if (feature.size() != model.weights.rows) {
    throw DataError("feature has " + std::to_string(feature.size()) + " dimensions, model expects " +
                    std::to_string(model.weights.rows));
  }
  std::vector<double> z = model.bias;
  for (std::size_t i = 0; i < feature.size(); ++i) {
    auto w = model.weights.row(i);
    for (std::size_t c = 0; c < z.size(); ++c) z[c] += feature[i] * w[c];
  }
  return z;
}

std::size_t predict_linear(const LinearScoreModel& model, std::span<const double> feature) {
  return argmax(linear_logits(model, feature));
}

double linear_loss(const LinearScoreModel& model, std::span<const std::vector<double>> features,
                   std::span<const std::size_t> labels, LinearScoreModel* gradient) {
  if (gradient) {
    gradient->weights = Matrix(model.weights.rows, model.weights.cols);
    gradient->bias.assign(model.bias.size(), 0.0);
    gradient->aggregation = model.aggregation;
  }
  const double inv_n = 1.0 / static_cast<double>(features.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto z = linear_logits(model, features[i]);
    loss -= log_likelihood(z, labels[i]);
    if (!gradient) continue;
    auto p = softmax(z);
    p[labels[i]] -= 1.0;
    for (std::size_t c = 0; c < p.size(); ++c) gradient->bias[c] += inv_n * p[c];
    for (std::size_t f = 0; f < features[i].size(); ++f) {
      auto g = gradient->weights.row(f);
      for (std::size_t c = 0; c < p.size(); ++c) g[c] += inv_n * features[i][f] * p[c];
    }
  }
  return loss * inv_n;
}

LinearScoreModel fit_linear(std::span<const std::vector<double>> features, std::span<const std::size_t> labels,
                            std::size_t num_classes, const LinearTrainConfig& cfg) {
  if (features.empty() || features.size() != labels.size()) throw DataError("linear baseline needs labelled features");
  bool multi = false;
  for (auto l : labels) multi = multi || l != labels[0];
  if (!multi) throw DataError("linear baseline needs at least two distinct classes in the training data");

  LinearScoreModel m;
  m.weights = Matrix(features[0].size(), num_classes);
  m.bias.assign(num_classes, 0.0);
  m.aggregation = cfg.aggregation;
  Matrix accum_w(m.weights.rows, m.weights.cols);
  std::vector<double> accum_b(num_classes, 0.0);

  LinearScoreModel grad;
  double prev = linear_loss(m, features, labels, &grad);
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    adagrad_step(m.weights.data, grad.weights.data, accum_w.data, cfg.lr, cfg.epsilon);
    adagrad_step(m.bias, grad.bias, accum_b, cfg.lr, cfg.epsilon);
    double loss = linear_loss(m, features, labels, &grad);
    if (!std::isfinite(loss)) throw NumericError("linear baseline diverged at epoch " + std::to_string(epoch));
    if (std::abs(prev - loss) < cfg.tolerance) break;
    prev = loss;
  }
  return m;
}

LinearScoreModel train_linear_on_scores(const Dataset& data, const ScoreTable& table, const Vocabulary& vocab,
                                        const LinearTrainConfig& cfg) {
  if (table.num_classes() != data.num_classes()) throw DataError("score table class count does not match dataset");
  std::vector<std::vector<double>> features;
  std::vector<std::size_t> labels;
  for (const auto& ex : data.examples) {
    features.push_back(sentence_feature(table, ex.tokens, vocab, cfg.aggregation));
    labels.push_back(ex.label);
  }
  return fit_linear(features, labels, data.num_classes(), cfg);
}

}  // namespace scoreembed
