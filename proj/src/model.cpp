#include "scoreembed/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scoreembed/error.hpp"
#include "scoreembed/rng.hpp"

namespace scoreembed {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

std::size_t ModelConfig::max_width() const {
  return widths.empty() ? 0 : *std::max_element(widths.begin(), widths.end());
}

void ModelConfig::validate() const {
  if (classes < 2) throw ConfigError("model needs at least 2 classes");
  if (widths.empty()) throw ConfigError("at least one filter width is required");
  for (auto w : widths) {
    if (w < 1) throw ConfigError("filter widths must be >= 1");
  }
  if (filters < 1) throw ConfigError("filters per width must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

std::vector<std::pair<std::string, std::span<double>>> Parameters::blocks() {
  std::vector<std::pair<std::string, std::span<double>>> out;
  out.emplace_back("embedding", std::span<double>(embedding.data).subspan(std::min(embedding.cols, embedding.data.size())));
  for (std::size_t b = 0; b < conv.size(); ++b) {
    auto prefix = "conv[" + std::to_string(b) + "]";
    out.emplace_back(prefix + ".weights", std::span<double>(conv[b].weights.data));
    out.emplace_back(prefix + ".bias", std::span<double>(conv[b].bias));
  }
  out.emplace_back("dense.weights", std::span<double>(dense.data));
  out.emplace_back("dense.bias", std::span<double>(dense_bias));
  return out;
}

std::vector<std::pair<std::string, std::span<const double>>> Parameters::blocks() const {
  auto mutable_blocks = const_cast<Parameters*>(this)->blocks();
  std::vector<std::pair<std::string, std::span<const double>>> out;
  out.reserve(mutable_blocks.size());
  for (auto& [name, span] : mutable_blocks) out.emplace_back(std::move(name), span);
  return out;
}

Parameters zeros_like(const Parameters& p) {
  Parameters z = p;
  z.embedding.fill(0.0);
  for (auto& bank : z.conv) {
    bank.weights.fill(0.0);
    std::fill(bank.bias.begin(), bank.bias.end(), 0.0);
  }
  z.dense.fill(0.0);
  std::fill(z.dense_bias.begin(), z.dense_bias.end(), 0.0);
  return z;
}

Model init_model(const ScoreTable& table, const Vocabulary& vocab, ModelConfig config) {
  if (config.classes == 0) config.classes = table.num_classes();
  config.validate();
  if (table.num_words() != vocab.word_count()) {
    throw DataError("score table has " + std::to_string(table.num_words()) + " rows but vocabulary has " +
                    std::to_string(vocab.word_count()) + " words");
  }
  if (table.num_classes() != config.classes) throw DataError("score table class count does not match model");

  const std::size_t C = config.classes;
  Model m;
  m.config = config;
  Parameters& p = m.params;

  p.embedding = Matrix(vocab.slots(), C);
  for (std::size_t c = 0; c < C; ++c) p.embedding(Vocabulary::kUnk, c) = 1.0 / static_cast<double>(C);
  for (std::size_t w = 0; w < table.num_words(); ++w) {
    auto src = table.scores.row(w);
    std::copy(src.begin(), src.end(), p.embedding.row(w + Vocabulary::kFirstWord).begin());
  }

  Rng rng(config.seed);
  for (auto h : config.widths) {
    ConvBank bank{h, Matrix(config.filters, h * C), std::vector<double>(config.filters, 0.0)};
    double bound = std::sqrt(6.0 / static_cast<double>(h * C + config.filters));
    for (auto& v : bank.weights.data) v = rng.uniform(-bound, bound);
    p.conv.push_back(std::move(bank));
  }
  p.dense = Matrix(config.pooled_size(), C);
  double bound = std::sqrt(6.0 / static_cast<double>(config.pooled_size() + C));
  for (auto& v : p.dense.data) v = rng.uniform(-bound, bound);
  p.dense_bias.assign(C, 0.0);
  return m;
}

Matrix embed_sentence(const Parameters& params, const IndexSeq& indices) {
  const std::size_t C = params.embedding.cols;
  Matrix s(indices.size(), C);
  for (std::size_t t = 0; t < indices.size(); ++t) {
    auto idx = indices[t];
    if (idx < 0 || static_cast<std::size_t>(idx) >= params.embedding.rows) {
      throw DataError("token index " + std::to_string(idx) + " out of range");
    }
    auto src = params.embedding.row(static_cast<std::size_t>(idx));
    std::copy(src.begin(), src.end(), s.row(t).begin());
  }
  return s;
}

double activate(double z, Activation a) { return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

namespace {

// Derivative expressed through the activated value.
double activation_grad(double activated, Activation a) {
  return a == Activation::relu ? (activated > 0.0 ? 1.0 : 0.0) : 1.0 - activated * activated;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double conv_feature(std::span<const double> weights, double bias, std::span<const double> window, Activation a) {
  if (weights.size() != window.size()) throw DataError("filter and window lengths differ");
  return activate(dot(weights, window) + bias, a);
}

std::vector<double> feature_map(std::span<const double> weights, double bias, std::size_t width,
                                const Matrix& sentence, Activation a) {
  const std::size_t n = sentence.rows;
  const std::size_t C = sentence.cols;
  if (width == 0 || n < width) {
    throw DataError("sentence length " + std::to_string(n) + " shorter than filter width " + std::to_string(width));
  }
  if (weights.size() != width * C) throw DataError("filter length does not match width * C");
  std::vector<double> map(n - width + 1);
  for (std::size_t t = 0; t < map.size(); ++t) {
    std::span<const double> window(sentence.data.data() + t * C, width * C);
    map[t] = activate(dot(weights, window) + bias, a);
  }
  return map;
}

PoolResult max_over_time(std::span<const double> map) {
  if (map.empty()) throw DataError("max_over_time of an empty feature map");
  PoolResult r{map[0], 0};
  for (std::size_t t = 1; t < map.size(); ++t) {
    if (map[t] > r.value) r = {map[t], t};
  }
  return r;
}

std::vector<double> dense_logits(const Parameters& params, std::span<const double> pooled) {
  const std::size_t C = params.dense.cols;
  if (pooled.size() != params.dense.rows) throw DataError("pooled vector does not match dense layer");
  std::vector<double> logits(params.dense_bias.begin(), params.dense_bias.end());
  for (std::size_t p = 0; p < pooled.size(); ++p) {
    double v = pooled[p];
    if (v == 0.0) continue;
    auto w = params.dense.row(p);
    for (std::size_t c = 0; c < C; ++c) logits[c] += v * w[c];
  }
  return logits;
}

ForwardTrace forward(const Model& model, const IndexSeq& indices, ForwardMode mode) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  if (indices.size() < cfg.max_width()) {
    throw DataError("input length " + std::to_string(indices.size()) + " below maximum filter width " +
                    std::to_string(cfg.max_width()));
  }
  ForwardTrace tr;
  tr.indices = indices;
  tr.sentence = embed_sentence(p, indices);

  const std::size_t P = cfg.pooled_size();
  tr.maps.reserve(P);
  tr.argmax.reserve(P);
  std::vector<double> pooled;
  pooled.reserve(P);
  for (const auto& bank : p.conv) {
    for (std::size_t f = 0; f < bank.weights.rows; ++f) {
      auto map = feature_map(bank.weights.row(f), bank.bias[f], bank.width, tr.sentence, cfg.activation);
      auto best = max_over_time(map);
      pooled.push_back(best.value);
      tr.argmax.push_back(best.position);
      tr.maps.push_back(std::move(map));
    }
  }

  tr.mask.assign(P, 1.0);
  if (mode.train && cfg.dropout > 0.0) {
    Rng rng(mode.dropout_seed);
    const double keep_scale = 1.0 / (1.0 - cfg.dropout);
    for (auto& m : tr.mask) m = rng.bernoulli(cfg.dropout) ? 0.0 : keep_scale;
  }
  for (std::size_t i = 0; i < P; ++i) pooled[i] *= tr.mask[i];
  tr.pooled = std::move(pooled);
  tr.logits = dense_logits(p, tr.pooled);
  return tr;
}

double log_sum_exp(std::span<const double> logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return mx + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    s += p[i];
  }
  for (auto& v : p) v /= s;
  return p;
}

double log_likelihood(std::span<const double> logits, std::size_t label) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return std::min(0.0, (logits[label] - mx) - std::log(s));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Gradients backward(const Model& model, const ForwardTrace& trace, std::size_t label) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  const std::size_t C = cfg.classes;
  const std::size_t P = cfg.pooled_size();
  if (trace.pooled.size() != P || trace.logits.size() != C || trace.maps.size() != P || trace.argmax.size() != P) {
    throw DataError("forward trace does not match model parameters");
  }
  if (label >= C) throw DataError("label out of range");

  Gradients g;
  std::vector<double> dlogits = softmax(trace.logits);
  dlogits[label] -= 1.0;

  g.dense = Matrix(P, C);
  g.dense_bias = dlogits;
  std::vector<double> dpooled(P, 0.0);
  for (std::size_t i = 0; i < P; ++i) {
    auto w = p.dense.row(i);
    auto gw = g.dense.row(i);
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      gw[c] = trace.pooled[i] * dlogits[c];
      acc += w[c] * dlogits[c];
    }
    dpooled[i] = acc * trace.mask[i];
  }

  // Sparse embedding rows in first-occurrence order.
  std::vector<std::size_t> slot_of_position(trace.indices.size(), SIZE_MAX);
  for (std::size_t t = 0; t < trace.indices.size(); ++t) {
    auto idx = trace.indices[t];
    if (idx == Vocabulary::kPad) continue;
    auto it = std::find(g.embedding_rows.begin(), g.embedding_rows.end(), idx);
    slot_of_position[t] = static_cast<std::size_t>(it - g.embedding_rows.begin());
    if (it == g.embedding_rows.end()) g.embedding_rows.push_back(idx);
  }
  g.embedding = Matrix(g.embedding_rows.size(), C);

  std::size_t unit = 0;
  for (const auto& bank : p.conv) {
    ConvBank gb{bank.width, Matrix(bank.weights.rows, bank.weights.cols), std::vector<double>(bank.bias.size(), 0.0)};
    for (std::size_t f = 0; f < bank.weights.rows; ++f, ++unit) {
      const std::size_t t0 = trace.argmax[unit];
      if (t0 >= trace.maps[unit].size()) throw DataError("argmax position outside feature map");
      double dz = dpooled[unit] * activation_grad(trace.maps[unit][t0], cfg.activation);
      if (dz == 0.0) continue;
      gb.bias[f] = dz;
      auto gw = gb.weights.row(f);
      auto w = bank.weights.row(f);
      const double* window = trace.sentence.data.data() + t0 * C;
      for (std::size_t k = 0; k < gw.size(); ++k) gw[k] = dz * window[k];
      for (std::size_t r = 0; r < bank.width; ++r) {
        std::size_t slot = slot_of_position[t0 + r];
        if (slot == SIZE_MAX) continue;  // PAD
        auto ge = g.embedding.row(slot);
        for (std::size_t c = 0; c < C; ++c) ge[c] += dz * w[r * C + c];
      }
    }
    g.conv.push_back(std::move(gb));
  }
  return g;
}

void accumulate(Parameters& into, const Gradients& g, double scale) {
  const std::size_t C = into.embedding.cols;
  for (std::size_t i = 0; i < g.embedding_rows.size(); ++i) {
    auto idx = static_cast<std::size_t>(g.embedding_rows[i]);
    if (idx == static_cast<std::size_t>(Vocabulary::kPad)) continue;
    auto dst = into.embedding.row(idx);
    auto src = g.embedding.row(i);
    for (std::size_t c = 0; c < C; ++c) dst[c] += scale * src[c];
  }
  for (std::size_t b = 0; b < g.conv.size(); ++b) {
    auto& dst = into.conv[b];
    for (std::size_t k = 0; k < dst.weights.data.size(); ++k) dst.weights.data[k] += scale * g.conv[b].weights.data[k];
    for (std::size_t k = 0; k < dst.bias.size(); ++k) dst.bias[k] += scale * g.conv[b].bias[k];
  }
  for (std::size_t k = 0; k < into.dense.data.size(); ++k) into.dense.data[k] += scale * g.dense.data[k];
  for (std::size_t k = 0; k < into.dense_bias.size(); ++k) into.dense_bias[k] += scale * g.dense_bias[k];
}

GradCheckResult grad_check(const Model& model, const IndexSeq& indices, std::size_t label,
                           const GradCheckOptions& opts) {
  auto loss_of = [&](const Model& m) { return -log_likelihood(forward(m, indices).logits, label); };

  Parameters analytic = zeros_like(model.params);
  accumulate(analytic, backward(model, forward(model, indices), label));
  if (opts.tamper) opts.tamper(analytic);

  std::vector<bool> touched(model.params.embedding.rows, !opts.touched_rows_only);
  for (auto idx : indices) touched.at(static_cast<std::size_t>(idx)) = true;

  Model probe = model;
  auto probe_blocks = probe.params.blocks();
  auto analytic_blocks = analytic.blocks();
  const std::size_t C = model.config.classes;

  GradCheckResult result;
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    auto& [name, values] = probe_blocks[b];
    auto grads = analytic_blocks[b].second;
    const bool is_embedding = b == 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      // The embedding view starts at row 1 (UNK).
      if (is_embedding && !touched[1 + i / C]) continue;
      const double saved = values[i];
      values[i] = saved + opts.epsilon;
      const double up = loss_of(probe);
      values[i] = saved - opts.epsilon;
      const double down = loss_of(probe);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.epsilon);
      const double ga = grads[i];
      const double denom = std::max({std::abs(ga), std::abs(numeric), 1e-8});
      const double rel = std::abs(ga - numeric) / denom;
      ++result.checked;
      if (result.worst_block.empty() || rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_block = name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace scoreembed
