#include "scoreembed/scorerep.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "scoreembed/error.hpp"
#include "scoreembed/format.hpp"

namespace scoreembed {

std::string to_string(CountMode m) {
  return m == CountMode::token_occurrences ? "token_occurrences" : "document_frequency";
}

std::string to_string(Aggregation a) { return a == Aggregation::mean ? "mean" : "sum"; }

CountMode parse_count_mode(std::string_view s) {
  if (s == "token_occurrences" || s == "token") return CountMode::token_occurrences;
  if (s == "document_frequency" || s == "document") return CountMode::document_frequency;
  throw ConfigError("unknown count_mode '" + std::string(s) + "'");
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "sum") return Aggregation::sum;
  throw ConfigError("unknown aggregation '" + std::string(s) + "'");
}

ScoreTable learn_scores(const Dataset& data, const Vocabulary& vocab, double smoothing, CountMode mode) {
  if (!(smoothing >= 0.0)) throw ConfigError("smoothing must be non-negative");
  const std::size_t C = data.num_classes();
  const std::size_t V = vocab.word_count();
  ScoreTable t;
  t.smoothing = smoothing;
  t.count_mode = mode;
  t.counts.assign(V * C, 0);
  t.scores = Matrix(V, C);

  std::vector<std::int32_t> seen;
  for (const auto& ex : data.examples) {
    seen.clear();
    for (const auto& tok : ex.tokens) {
      auto idx = vocab.find(tok);
      if (!idx) continue;
      if (mode == CountMode::document_frequency) {
        if (std::find(seen.begin(), seen.end(), *idx) != seen.end()) continue;
        seen.push_back(*idx);
      }
      auto row = static_cast<std::size_t>(*idx - Vocabulary::kFirstWord);
      ++t.counts[row * C + ex.label];
    }
  }

  for (std::size_t r = 0; r < V; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) total += static_cast<double>(t.counts[r * C + c]);
    double denom = total + static_cast<double>(C) * smoothing;
    for (std::size_t c = 0; c < C; ++c) {
      t.scores(r, c) = denom > 0.0 ? (static_cast<double>(t.counts[r * C + c]) + smoothing) / denom
                                   : 1.0 / static_cast<double>(C);
    }
  }
  return t;
}

std::vector<double> index_score(const ScoreTable& table, std::int32_t index) {
  const std::size_t C = table.num_classes();
  if (index == Vocabulary::kPad) return std::vector<double>(C, 0.0);
  if (index == Vocabulary::kUnk) return std::vector<double>(C, 1.0 / static_cast<double>(C));
  auto row = static_cast<std::size_t>(index - Vocabulary::kFirstWord);
  if (index < 0 || row >= table.num_words()) throw DataError("index " + std::to_string(index) + " outside score table");
  auto r = table.scores.row(row);
  return {r.begin(), r.end()};
}

std::vector<double> word_score(const ScoreTable& table, std::string_view token, const Vocabulary& vocab) {
  return index_score(table, vocab.index_of(token));
}

std::vector<double> sentence_feature(const ScoreTable& table, const IndexSeq& indices, Aggregation agg) {
  std::vector<double> out(table.num_classes(), 0.0);
  std::size_t n = 0;
  for (auto idx : indices) {
    if (idx == Vocabulary::kPad) continue;
    auto s = index_score(table, idx);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += s[c];
    ++n;
  }
  if (n == 0) throw DataError("sentence_feature of an empty token sequence");
  if (agg == Aggregation::mean) {
    for (auto& v : out) v /= static_cast<double>(n);
  }
  return out;
}

std::vector<double> sentence_feature(const ScoreTable& table, const TokenSeq& tokens, const Vocabulary& vocab,
                                     Aggregation agg) {
  return sentence_feature(table, encode(tokens, vocab, 0), agg);
}

namespace {

void write_row(std::string& out, const std::string& word, std::span<const double> row) {
  out += word;
  for (double v : row) {
    out += '\t';
    out += format_double(v);
  }
  out += '\n';
}

// rows_by_index is indexed by vocabulary index; word rows start at kFirstWord.
std::string export_impl(const Matrix& rows, std::size_t first_row_index, const Vocabulary& vocab,
                        std::optional<std::size_t> top_k) {
  std::string out;
  const std::size_t V = vocab.word_count();
  auto row_of = [&](std::size_t w) { return rows.row(w + first_row_index); };
  if (!top_k) {
    for (std::size_t w = 0; w < V; ++w) {
      write_row(out, vocab.word(static_cast<std::int32_t>(w) + Vocabulary::kFirstWord), row_of(w));
    }
    return out;
  }
  std::vector<std::size_t> order(V);
  for (std::size_t c = 0; c < rows.cols; ++c) {
    std::iota(order.begin(), order.end(), 0);
    std::size_t k = std::min(*top_k, V);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        double sa = row_of(a)[c], sb = row_of(b)[c];
                        return sa != sb ? sa > sb : a < b;
                      });
    for (std::size_t i = 0; i < k; ++i) {
      write_row(out, vocab.word(static_cast<std::int32_t>(order[i]) + Vocabulary::kFirstWord), row_of(order[i]));
    }
  }
  return out;
}

}  // namespace

std::string export_scores(const ScoreTable& table, const Vocabulary& vocab, std::optional<std::size_t> top_k) {
  if (table.num_words() != vocab.word_count()) throw DataError("score table does not match vocabulary");
  return export_impl(table.scores, 0, vocab, top_k);
}

std::string export_rows(const Matrix& rows_by_index, const Vocabulary& vocab, std::optional<std::size_t> top_k) {
  if (rows_by_index.rows != vocab.slots()) throw DataError("embedding rows do not match vocabulary");
  return export_impl(rows_by_index, Vocabulary::kFirstWord, vocab, top_k);
}

ImportedScores import_scores(std::string_view text) {
  ImportedScores out;
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2) throw DataError("score line " + std::to_string(lineno) + ": expected word and scores");
    if (cols == 0) cols = fields.size() - 1;
    if (fields.size() - 1 != cols) throw DataError("score line " + std::to_string(lineno) + ": inconsistent width");
    out.words.push_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) values.push_back(parse_double(fields[i]));
  }
  out.scores = Matrix(out.words.size(), cols);
  out.scores.data = std::move(values);
  return out;
}

}  // namespace scoreembed
