#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scoreembed/corpus.hpp"
#include "scoreembed/matrix.hpp"

namespace scoreembed {

enum class CountMode { token_occurrences, document_frequency };
enum class Aggregation { mean, sum };

std::string to_string(CountMode m);
std::string to_string(Aggregation a);
CountMode parse_count_mode(std::string_view s);
Aggregation parse_aggregation(std::string_view s);

// Per-class word scores. Row r holds vocabulary index r + Vocabulary::kFirstWord;
// PAD and UNK have no stored row.
struct ScoreTable {
  Matrix scores;                     // |V| x C, rows on the probability simplex
  std::vector<std::int64_t> counts;  // |V| x C, row-major raw class counts
  double smoothing = 0.0;
  CountMode count_mode = CountMode::token_occurrences;

  std::size_t num_words() const { return scores.rows; }
  std::size_t num_classes() const { return scores.cols; }
  std::int64_t count(std::size_t row, std::size_t c) const { return counts[row * scores.cols + c]; }
};

// s_c(w) = (f_c(w) + a) / (sum_j f_j(w) + C a); a zero denominator gives the
// uniform row. Tokens outside the vocabulary are not counted.
ScoreTable learn_scores(const Dataset& data, const Vocabulary& vocab, double smoothing = 0.0,
                        CountMode mode = CountMode::token_occurrences);

// Row for a vocabulary index: PAD -> zeros, UNK -> uniform.
std::vector<double> index_score(const ScoreTable& table, std::int32_t index);
std::vector<double> word_score(const ScoreTable& table, std::string_view token, const Vocabulary& vocab);

// Aggregated word scores over the non-PAD tokens. Throws DataError on empty input.
std::vector<double> sentence_feature(const ScoreTable& table, const TokenSeq& tokens, const Vocabulary& vocab,
                                     Aggregation agg = Aggregation::mean);
std::vector<double> sentence_feature(const ScoreTable& table, const IndexSeq& indices,
                                     Aggregation agg = Aggregation::mean);

// `word<TAB>s_0<TAB>...` with 17 significant digits. With top_k, the k
// highest-scoring words of each class in class order.
std::string export_scores(const ScoreTable& table, const Vocabulary& vocab, std::optional<std::size_t> top_k = {});
// Same format for an arbitrary |slots| x C matrix indexed like the vocabulary
// (used for fine-tuned embeddings); PAD and UNK rows are skipped.
std::string export_rows(const Matrix& rows_by_index, const Vocabulary& vocab, std::optional<std::size_t> top_k = {});

struct ImportedScores {
  std::vector<std::string> words;
  Matrix scores;
};

ImportedScores import_scores(std::string_view text);

}  // namespace scoreembed
