#include "scoreembed/optim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "parallel.hpp"
#include "scoreembed/error.hpp"
#include "scoreembed/format.hpp"
#include "scoreembed/rng.hpp"

namespace scoreembed {

// ----------------------------------------------------------------- AdaGrad

void adagrad_step(std::span<double> params, std::span<const double> grads, std::span<double> accum, double lr,
                  double epsilon) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (g == 0.0) continue;
    accum[i] += g * g;
    params[i] -= lr * g / (std::sqrt(accum[i]) + epsilon);
  }
}

AdaGradState::AdaGradState(const Parameters& like, double lr_, double epsilon_)
    : accum(zeros_like(like)), lr(lr_), epsilon(epsilon_) {}

void adagrad_update(AdaGradState& state, Parameters& params, const Parameters& grads) {
  auto p = params.blocks();
  auto g = grads.blocks();
  auto a = state.accum.blocks();
  if (p.size() != g.size() || p.size() != a.size()) throw DataError("gradient layout does not match parameters");
  for (std::size_t b = 0; b < p.size(); ++b) {
    if (p[b].second.size() != g[b].second.size() || p[b].second.size() != a[b].second.size()) {
      throw DataError("gradient shape mismatch in " + p[b].first);
    }
    for (double v : g[b].second) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + g[b].first);
    }
  }
  for (std::size_t b = 0; b < p.size(); ++b) {
    adagrad_step(p[b].second, g[b].second, a[b].second, state.lr, state.epsilon);
  }
}

// ------------------------------------------------------------------ config

namespace {

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const DataError&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ModelConfig TrainConfig::model_config(std::size_t classes) const {
  ModelConfig m;
  m.classes = classes;
  m.widths = widths;
  m.filters = filters;
  m.activation = activation;
  m.dropout = dropout;
  m.seed = seed;
  return m;
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "lr") lr = parse_real(key, value);
  else if (key == "epsilon") epsilon = parse_real(key, value);
  else if (key == "batch_size") batch_size = parse_size(key, value);
  else if (key == "epochs") epochs = parse_size(key, value);
  else if (key == "dropout") dropout = parse_real(key, value);
  else if (key == "seed") seed = parse_size(key, value);
  else if (key == "min_freq") min_freq = static_cast<std::int64_t>(parse_size(key, value));
  else if (key == "smoothing") smoothing = parse_real(key, value);
  else if (key == "count_mode") count_mode = parse_count_mode(value);
  else if (key == "aggregation") aggregation = parse_aggregation(value);
  else if (key == "widths") {
    std::vector<std::size_t> w;
    std::size_t start = 0;
    for (;;) {
      auto comma = value.find(',', start);
      w.push_back(parse_size(key, trim(value.substr(start, comma - start))));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    widths = std::move(w);
  } else if (key == "filters") filters = parse_size(key, value);
  else if (key == "activation") activation = parse_activation(value);
  else if (key == "dev_fraction") dev_fraction = parse_real(key, value);
  else if (key == "patience") patience = parse_size(key, value);
  else if (key == "twitter") twitter = parse_bool(key, value);
  else if (key == "nb_beta") nb_beta = parse_real(key, value);
  else if (key == "linear_lr") linear_lr = parse_real(key, value);
  else if (key == "linear_epochs") linear_epochs = parse_size(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
  return {
      {"lr", format_double(lr)},
      {"epsilon", format_double(epsilon)},
      {"batch_size", std::to_string(batch_size)},
      {"epochs", std::to_string(epochs)},
      {"dropout", format_double(dropout)},
      {"seed", std::to_string(seed)},
      {"min_freq", std::to_string(min_freq)},
      {"smoothing", format_double(smoothing)},
      {"count_mode", to_string(count_mode)},
      {"aggregation", to_string(aggregation)},
      {"widths", join_sizes(widths)},
      {"filters", std::to_string(filters)},
      {"activation", to_string(activation)},
      {"dev_fraction", format_double(dev_fraction)},
      {"patience", std::to_string(patience)},
      {"twitter", twitter ? "true" : "false"},
      {"nb_beta", format_double(nb_beta)},
      {"linear_lr", format_double(linear_lr)},
      {"linear_epochs", std::to_string(linear_epochs)},
  };
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (min_freq < 1) throw ConfigError("min_freq must be positive");
  if (!(smoothing >= 0.0)) throw ConfigError("smoothing must be non-negative");
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw ConfigError("dev_fraction must be in (0, 1)");
  if (!(nb_beta > 0.0)) throw ConfigError("nb_beta must be positive");
  if (!(linear_lr > 0.0)) throw ConfigError("linear_lr must be positive");
  model_config(2).validate();
}

void apply_config_file(const std::filesystem::path& path, TrainConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    cfg.set(trim(t.substr(0, eq)), t.substr(eq + 1));
  }
}

// ----------------------------------------------------------------- metrics

Metrics compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                        std::size_t num_classes) {
  if (truth.empty()) throw DataError("cannot compute metrics on an empty set");
  if (truth.size() != predicted.size()) throw DataError("truth and prediction lengths differ");
  Metrics m;
  m.n = truth.size();
  m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) throw DataError("class index out of range");
    ++m.confusion[truth[i]][predicted[i]];
    if (truth[i] == predicted[i]) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t tp = m.confusion[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fp += m.confusion[o][c];
      fn += m.confusion[c][o];
    }
    const std::size_t denom = 2 * tp + fp + fn;
    f1_sum += denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  }
  m.macro_f1 = f1_sum / static_cast<double>(num_classes);
  return m;
}

double cohen_kappa(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw DataError("kappa: label sequences differ in length");
  if (a.empty()) throw DataError("kappa: empty label sequences");
  std::size_t C = 0;
  for (std::size_t i = 0; i < a.size(); ++i) C = std::max({C, a[i] + 1, b[i] + 1});
  std::vector<double> ma(C, 0.0), mb(C, 0.0);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[a[i]] += 1.0;
    mb[b[i]] += 1.0;
    if (a[i] == b[i]) ++agree;
  }
  const double n = static_cast<double>(a.size());
  const double po = static_cast<double>(agree) / n;
  double pe = 0.0;
  for (std::size_t c = 0; c < C; ++c) pe += (ma[c] / n) * (mb[c] / n);
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

// ---------------------------------------------------------------- training

namespace {

std::vector<IndexSeq> encode_all(const Dataset& data, const Vocabulary& vocab, std::size_t min_len) {
  std::vector<IndexSeq> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples) out.push_back(encode(ex.tokens, vocab, min_len));
  return out;
}

double accuracy_of(const Model& model, const std::vector<IndexSeq>& inputs, const Dataset& data, std::size_t threads) {
  if (inputs.empty()) return 0.0;
  std::vector<std::size_t> pred(inputs.size());
  detail::parallel_for(inputs.size(), threads, [&](std::size_t i) { pred[i] = argmax(forward(model, inputs[i]).logits); });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.examples[i].label;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double loss_of(const Model& model, const std::vector<IndexSeq>& inputs, const Dataset& data, std::size_t threads) {
  std::vector<double> losses(inputs.size());
  detail::parallel_for(inputs.size(), threads, [&](std::size_t i) {
    losses[i] = -log_likelihood(forward(model, inputs[i]).logits, data.examples[i].label);
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(inputs.size());
}

}  // namespace

TrainResult train(const Dataset& train_data, const Dataset& dev_data, const Vocabulary& vocab,
                  const ScoreTable& table, const TrainConfig& cfg, std::size_t threads) {
  return train_from(init_model(table, vocab, cfg.model_config(train_data.num_classes())), train_data, dev_data, vocab,
                    cfg, threads);
}

TrainResult train_from(Model model, const Dataset& train_data, const Dataset& dev_data, const Vocabulary& vocab,
                       const TrainConfig& cfg, std::size_t threads) {
  cfg.validate();
  if (train_data.empty()) throw DataError("training set is empty");
  if (!(train_data.labels == dev_data.labels)) throw DataError("train and dev label sets differ");
  if (model.params.embedding.rows != vocab.slots()) throw DataError("model embedding does not match vocabulary");

  const std::size_t min_len = model.min_len();
  const auto train_inputs = encode_all(train_data, vocab, min_len);
  const auto dev_inputs = encode_all(dev_data, vocab, min_len);

  TrainResult result;
  result.history.push_back({0, loss_of(model, train_inputs, train_data, threads),
                            accuracy_of(model, dev_inputs, dev_data, threads)});
  result.model = model;
  double best_acc = result.history.back().dev_accuracy;
  std::size_t since_best = 0;

  AdaGradState state(model.params, cfg.lr, cfg.epsilon);
  std::vector<std::size_t> order(train_inputs.size());
  std::vector<Gradients> sample_grads;
  std::vector<double> sample_loss;
  Parameters batch_grad = zeros_like(model.params);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5EED, epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      sample_grads.assign(len, Gradients{});
      sample_loss.assign(len, 0.0);
      detail::parallel_for(len, threads, [&](std::size_t j) {
        const std::size_t ex = order[start + j];
        auto trace = forward(model, train_inputs[ex], ForwardMode::training(mix_seed(cfg.seed, epoch, ex)));
        sample_loss[j] = -log_likelihood(trace.logits, train_data.examples[ex].label);
        sample_grads[j] = backward(model, trace, train_data.examples[ex].label);
      });

      double batch_loss = 0.0;
      batch_grad = zeros_like(model.params);
      const double scale = 1.0 / static_cast<double>(len);
      for (std::size_t j = 0; j < len; ++j) {
        batch_loss += sample_loss[j];
        accumulate(batch_grad, sample_grads[j], scale);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      epoch_loss += batch_loss;
      try {
        adagrad_update(state, model.params, batch_grad);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
    }

    const double dev_acc = accuracy_of(model, dev_inputs, dev_data, threads);
    result.history.push_back({epoch, epoch_loss / static_cast<double>(order.size()), dev_acc});
    if (dev_acc > best_acc) {
      best_acc = dev_acc;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

double mean_loss(const Model& model, const Dataset& data, const Vocabulary& vocab, std::size_t threads) {
  if (data.empty()) throw DataError("cannot compute loss on an empty dataset");
  return loss_of(model, encode_all(data, vocab, model.min_len()), data, threads);
}

std::vector<double> predict_proba(const Model& model, const TokenSeq& tokens, const Vocabulary& vocab) {
  if (tokens.empty()) throw DataError("cannot classify an empty token sequence");
  return softmax(forward(model, encode(tokens, vocab, model.min_len())).logits);
}

std::size_t predict(const Model& model, const TokenSeq& tokens, const Vocabulary& vocab) {
  if (tokens.empty()) throw DataError("cannot classify an empty token sequence");
  return argmax(forward(model, encode(tokens, vocab, model.min_len())).logits);
}

std::vector<std::size_t> predict_all(const Model& model, const Dataset& data, const Vocabulary& vocab,
                                     std::size_t threads) {
  std::vector<std::size_t> pred(data.size());
  detail::parallel_for(data.size(), threads,
                       [&](std::size_t i) { pred[i] = predict(model, data.examples[i].tokens, vocab); });
  return pred;
}

Metrics evaluate(const Model& model, const Dataset& data, const Vocabulary& vocab, std::size_t threads) {
  if (data.empty()) throw DataError("cannot evaluate on an empty dataset");
  auto pred = predict_all(model, data, vocab, threads);
  std::vector<std::size_t> truth;
  truth.reserve(data.size());
  for (const auto& ex : data.examples) truth.push_back(ex.label);
  return compute_metrics(truth, pred, data.num_classes());
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,dev_accuracy\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.dev_accuracy) + "\n";
  }
  return out;
}

// -------------------------------------------------------- cross-validation

namespace {

std::pair<double, double> mean_stdev(const std::vector<double>& v) {
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

CvReport kfold_evaluate(const Dataset& data, std::size_t k, std::uint64_t seed, const FoldPredictor& predictor) {
  const auto fold_of = stratified_kfold(data, k, seed);
  CvReport report;
  std::vector<double> accs, f1s;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_pos, test_pos;
    for (std::size_t i = 0; i < data.size(); ++i) (fold_of[i] == f ? test_pos : train_pos).push_back(i);
    const Dataset train_part = data.subset(train_pos);
    const Dataset test_part = data.subset(test_pos);
    // Held-out labels are only read here, after prediction.
    Dataset unlabeled = test_part;
    for (auto& ex : unlabeled.examples) ex.label = 0;
    auto pred = predictor(f, train_part, unlabeled);
    std::vector<std::size_t> truth;
    for (const auto& ex : test_part.examples) truth.push_back(ex.label);
    FoldResult fr{f, train_part.size(), test_part.size(), compute_metrics(truth, pred, data.num_classes())};
    accs.push_back(fr.metrics.accuracy);
    f1s.push_back(fr.metrics.macro_f1);
    report.folds.push_back(std::move(fr));
  }
  std::tie(report.mean_accuracy, report.stdev_accuracy) = mean_stdev(accs);
  std::tie(report.mean_macro_f1, report.stdev_macro_f1) = mean_stdev(f1s);
  return report;
}

CvReport cross_validate(const Dataset& data, const TrainConfig& cfg, std::size_t k, std::size_t threads,
                        const FoldObserver& observer) {
  cfg.validate();
  return kfold_evaluate(data, k, cfg.seed, [&](std::size_t fold, const Dataset& train_part, const Dataset& test_part) {
    auto [fit, dev] = split_dev(train_part, cfg.dev_fraction, mix_seed(cfg.seed, 0xF01D, fold));
    auto vocab = Vocabulary::build(fit, cfg.min_freq);
    auto table = learn_scores(fit, vocab, cfg.smoothing, cfg.count_mode);
    if (observer) observer(FoldContext{fold, fit, dev, test_part, vocab, table});
    auto result = train(fit, dev, vocab, table, cfg, threads);
    return predict_all(result.model, test_part, vocab, threads);
  });
}

std::string cv_report_csv(const CvReport& report, const TrainConfig* cfg) {
  std::string out;
  if (cfg) {
    for (const auto& [k, v] : cfg->entries()) out += "# " + k + "=" + v + "\n";
  }
  out += "fold,n_train,n_test,accuracy,macro_f1,accuracy_stdev,macro_f1_stdev\n";
  std::size_t n_test = 0;
  for (const auto& f : report.folds) {
    out += std::to_string(f.fold) + "," + std::to_string(f.n_train) + "," + std::to_string(f.n_test) + "," +
           format_double(f.metrics.accuracy) + "," + format_double(f.metrics.macro_f1) + ",,\n";
    n_test += f.n_test;
  }
  out += "summary,," + std::to_string(n_test) + "," + format_double(report.mean_accuracy) + "," +
         format_double(report.mean_macro_f1) + "," + format_double(report.stdev_accuracy) + "," +
         format_double(report.stdev_macro_f1) + "\n";
  return out;
}

}  // namespace scoreembed
