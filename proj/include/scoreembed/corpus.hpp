#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scoreembed {

using TokenSeq = std::vector<std::string>;
using IndexSeq = std::vector<std::int32_t>;

struct TokenizerOptions {
  // Map URLs to <url> and @-mentions to <user>.
  bool twitter = true;
};

// Lowercases and splits raw text. Punctuation becomes single-character
// tokens; apostrophes between letters stay inside the word ("don't").
TokenSeq tokenize(std::string_view text, const TokenizerOptions& opts = {});

// Ordered, unique class names.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);

  // One class name per line; line order is class index.
  static LabelSet load(const std::filesystem::path& path);
  // very_negative .. very_positive
  static LabelSet sst5();

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t c) const { return names_.at(c); }
  const std::vector<std::string>& names() const { return names_; }

  // Resolves a class name or a 0-based integer.
  std::optional<std::size_t> resolve(std::string_view label) const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> names_;
};

struct Example {
  TokenSeq tokens;
  std::size_t label = 0;
  std::optional<std::chrono::sys_seconds> timestamp;
};

struct Dataset {
  LabelSet labels;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::size_t num_classes() const { return labels.size(); }

  // Per-class example counts.
  std::vector<std::size_t> class_counts() const;
  // Examples at the given positions, in the given order.
  Dataset subset(const std::vector<std::size_t>& positions) const;
};

// Word <-> index map. Index 0 is PAD, 1 is UNK; words occupy [2, |V|+2).
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kFirstWord = 2;

  Vocabulary();

  // Words with frequency >= min_freq, ordered by descending frequency then
  // lexicographically. Throws DataError on an empty dataset.
  static Vocabulary build(const Dataset& data, std::int64_t min_freq = 1);
  // Rebuilds a vocabulary from stored words (in index order) and counts.
  static Vocabulary from_words(std::vector<std::string> words, std::vector<std::int64_t> counts);

  // Number of real words |V|.
  std::size_t word_count() const { return words_.size() - kFirstWord; }
  // Number of index slots including PAD and UNK.
  std::size_t slots() const { return words_.size(); }

  std::optional<std::int32_t> find(std::string_view word) const;
  std::int32_t index_of(std::string_view word) const { return find(word).value_or(kUnk); }
  const std::string& word(std::int32_t index) const { return words_.at(static_cast<std::size_t>(index)); }
  std::int64_t count(std::int32_t index) const { return counts_.at(static_cast<std::size_t>(index)); }

  bool operator==(const Vocabulary& o) const { return words_ == o.words_ && counts_ == o.counts_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  std::vector<std::string> words_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, std::int32_t, Hash, std::equal_to<>> index_;
};

// Maps tokens to indices (OOV -> UNK) and right-pads with PAD to min_len.
IndexSeq encode(const TokenSeq& tokens, const Vocabulary& vocab, std::size_t min_len);

struct LoadReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<std::string> diagnostics;
};

// `label<TAB>text` per line. Bad lines are rejected with a diagnostic and
// loading continues; a missing file throws DataError.
Dataset load_tsv(const std::filesystem::path& path, const LabelSet& labels,
                 const TokenizerOptions& opts = {}, LoadReport* report = nullptr);

struct PtbTree {
  int label = 0;
  TokenSeq tokens;
};

// Parses `(L (L w) ...)`; returns the root label and the leaves in order.
// Throws ParseError with the character offset on malformed input.
PtbTree parse_ptb_tree(std::string_view line);

// Flat tree `(L (L t1) (L t2) ...)` for a labelled token sequence.
std::string format_flat_tree(int label, const TokenSeq& tokens);

// One tree per line, five classes. Leaves are lowercased; Twitter
// normalisation only when opts.twitter is set.
Dataset load_sst(const std::filesystem::path& path, const TokenizerOptions& opts = {.twitter = false});

// Per-example fold index in [0, k). Classes are shuffled independently and
// dealt round-robin, so per-class fold counts differ by at most one.
std::vector<std::size_t> stratified_kfold(const Dataset& data, std::size_t k, std::uint64_t seed);

// Seeded random carve-out of round(fraction * n) examples (at least one) for
// model selection. Returns (train, dev).
std::pair<Dataset, Dataset> split_dev(const Dataset& data, double fraction, std::uint64_t seed);

}  // namespace scoreembed
