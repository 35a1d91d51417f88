#include "scoreembed/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "scoreembed/error.hpp"
#include "scoreembed/rng.hpp"

namespace scoreembed {

namespace {

bool is_ascii_alnum(unsigned char c) { return std::isalnum(c) != 0; }

// Non-ASCII bytes (UTF-8 sequences) are treated as word characters.
bool is_word_byte(unsigned char c) { return c >= 0x80 || is_ascii_alnum(c) || c == '_'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) {
    auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) ch = static_cast<char>(std::tolower(c));
  }
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

bool is_url(std::string_view chunk) {
  return starts_with_ci(chunk, "http://") || starts_with_ci(chunk, "https://") ||
         starts_with_ci(chunk, "www.");
}

// Splits one whitespace-free chunk into word and punctuation tokens.
void split_chunk(std::string_view chunk, TokenSeq& out) {
  std::size_t i = 0;
  while (i < chunk.size()) {
    auto c = static_cast<unsigned char>(chunk[i]);
    if (is_word_byte(c)) {
      std::size_t j = i;
      while (j < chunk.size()) {
        auto cj = static_cast<unsigned char>(chunk[j]);
        if (is_word_byte(cj)) {
          ++j;
        } else if (cj == '\'' && j > i && j + 1 < chunk.size() &&
                   is_word_byte(static_cast<unsigned char>(chunk[j + 1]))) {
          ++j;
        } else {
          break;
        }
      }
      out.push_back(lower(chunk.substr(i, j - i)));
      i = j;
    } else {
      out.emplace_back(1, static_cast<char>(std::tolower(c)));
      ++i;
    }
  }
}

// Length of the run of word bytes starting at `from`.
std::size_t word_run(std::string_view s, std::size_t from) {
  std::size_t j = from;
  while (j < s.size() && is_word_byte(static_cast<unsigned char>(s[j]))) ++j;
  return j - from;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

TokenSeq tokenize(std::string_view text, const TokenizerOptions& opts) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view chunk = text.substr(i, j - i);
    i = j;

    if (opts.twitter && is_url(chunk)) {
      out.emplace_back("<url>");
      continue;
    }
    if (opts.twitter && chunk.size() > 1 && (chunk[0] == '@' || chunk[0] == '#')) {
      std::size_t run = word_run(chunk, 1);
      if (run > 0) {
        if (chunk[0] == '@') {
          out.emplace_back("<user>");
        } else {
          out.push_back("#" + lower(chunk.substr(1, run)));
        }
        split_chunk(chunk.substr(1 + run), out);
        continue;
      }
    }
    split_chunk(chunk, out);
  }
  return out;
}

// ---------------------------------------------------------------- LabelSet

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) throw DataError("label set needs at least 2 classes");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw DataError("empty class name");
    if (!seen.insert(n).second) throw DataError("duplicate class name '" + n + "'");
  }
}

LabelSet LabelSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label map " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    auto name = trim(line);
    if (!name.empty()) names.push_back(std::move(name));
  }
  return LabelSet(std::move(names));
}

LabelSet LabelSet::sst5() {
  return LabelSet({"very_negative", "negative", "neutral", "positive", "very_positive"});
}

std::optional<std::size_t> LabelSet::resolve(std::string_view label) const {
  for (std::size_t c = 0; c < names_.size(); ++c) {
    if (names_[c] == label) return c;
  }
  if (!label.empty() && std::all_of(label.begin(), label.end(),
                                    [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
    if (label.size() > 9) return std::nullopt;
    std::size_t v = std::stoul(std::string(label));
    if (v < names_.size()) return v;
  }
  return std::nullopt;
}

// ----------------------------------------------------------------- Dataset

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(labels.size(), 0);
  for (const auto& ex : examples) ++counts.at(ex.label);
  return counts;
}

Dataset Dataset::subset(const std::vector<std::size_t>& positions) const {
  Dataset out{labels, {}};
  out.examples.reserve(positions.size());
  for (auto p : positions) out.examples.push_back(examples.at(p));
  return out;
}

// -------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary() : words_{"<pad>", "<unk>"}, counts_{0, 0} {}

Vocabulary Vocabulary::build(const Dataset& data, std::int64_t min_freq) {
  if (data.empty()) throw DataError("cannot build a vocabulary from an empty dataset");
  if (min_freq < 1) throw ConfigError("min_freq must be positive");
  std::map<std::string, std::int64_t> freq;
  for (const auto& ex : data.examples) {
    for (const auto& tok : ex.tokens) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [w, n] : freq) {
    if (n >= min_freq) kept.emplace_back(w, n);
  }
  // freq is already lexicographic; stable sort keeps that order among ties.
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> words;
  std::vector<std::int64_t> counts;
  words.reserve(kept.size());
  counts.reserve(kept.size());
  for (auto& [w, n] : kept) {
    words.push_back(w);
    counts.push_back(n);
  }
  return from_words(std::move(words), std::move(counts));
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words, std::vector<std::int64_t> counts) {
  if (words.size() != counts.size()) throw DataError("vocabulary words/counts length mismatch");
  Vocabulary v;
  v.words_.reserve(words.size() + kFirstWord);
  v.counts_.reserve(words.size() + kFirstWord);
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto idx = static_cast<std::int32_t>(v.words_.size());
    if (!v.index_.emplace(words[i], idx).second) throw DataError("duplicate vocabulary word '" + words[i] + "'");
    v.words_.push_back(std::move(words[i]));
    v.counts_.push_back(counts[i]);
  }
  return v;
}

std::optional<std::int32_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

IndexSeq encode(const TokenSeq& tokens, const Vocabulary& vocab, std::size_t min_len) {
  IndexSeq out;
  out.reserve(std::max(tokens.size(), min_len));
  for (const auto& t : tokens) out.push_back(vocab.index_of(t));
  while (out.size() < min_len) out.push_back(Vocabulary::kPad);
  return out;
}

// ----------------------------------------------------------------- loaders

Dataset load_tsv(const std::filesystem::path& path, const LabelSet& labels, const TokenizerOptions& opts,
                 LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  LoadReport local;
  LoadReport& rep = report ? *report : local;

  Dataset data{labels, {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto reject = [&](const std::string& why) {
      ++rep.rejected;
      rep.diagnostics.push_back(path.string() + ":" + std::to_string(lineno) + ": " + why);
    };
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      reject("malformed line (no tab)");
      continue;
    }
    auto label_text = trim(std::string_view(line).substr(0, tab));
    auto label = labels.resolve(label_text);
    if (!label) {
      reject("unknown label '" + label_text + "'");
      continue;
    }
    auto tokens = tokenize(std::string_view(line).substr(tab + 1), opts);
    if (tokens.empty()) {
      reject("no tokens");
      continue;
    }
    data.examples.push_back(Example{std::move(tokens), *label, std::nullopt});
    ++rep.accepted;
  }
  return data;
}

namespace {

class TreeParser {
 public:
  explicit TreeParser(std::string_view s) : s_(s) {}

  PtbTree parse() {
    skip_ws();
    if (pos_ >= s_.size()) throw ParseError("empty tree", pos_);
    PtbTree tree;
    tree.label = node(tree.tokens);
    skip_ws();
    if (pos_ != s_.size()) throw ParseError("trailing characters after tree", pos_);
    return tree;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  // '(' label child+ ')'
  int node(TokenSeq& leaves) {
    if (pos_ >= s_.size()) throw ParseError("unbalanced parentheses: unexpected end of input", pos_);
    if (s_[pos_] != '(') throw ParseError("expected '('", pos_);
    ++pos_;
    skip_ws();
    std::size_t label_start = pos_;
    std::string label_text = atom();
    int label = parse_label(label_text, label_start);
    std::size_t children = 0;
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) throw ParseError("unbalanced parentheses: unexpected end of input", pos_);
      char c = s_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c == '(') {
        node(leaves);
      } else {
        leaves.push_back(atom());
      }
      ++children;
    }
    if (children == 0) throw ParseError("empty tree node", label_start);
    return label;
  }

  std::string atom() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != '(' && s_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
    }
    if (pos_ == start) {
      if (pos_ >= s_.size()) throw ParseError("unbalanced parentheses: unexpected end of input", pos_);
      throw ParseError("expected a token", pos_);
    }
    return std::string(s_.substr(start, pos_ - start));
  }

  static int parse_label(const std::string& text, std::size_t offset) {
    bool ok = !text.empty() && text.size() <= 9;
    std::size_t i = (ok && text[0] == '-') ? 1 : 0;
    if (i == text.size()) ok = false;
    for (; ok && i < text.size(); ++i) ok = std::isdigit(static_cast<unsigned char>(text[i])) != 0;
    if (!ok) throw ParseError("non-integer node label '" + text + "'", offset);
    return std::stoi(text);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

PtbTree parse_ptb_tree(std::string_view line) { return TreeParser(line).parse(); }

std::string format_flat_tree(int label, const TokenSeq& tokens) {
  std::string out = "(" + std::to_string(label);
  for (const auto& t : tokens) {
    if (t.empty() || t.find_first_of("() \t\r\n") != std::string::npos) {
      throw DataError("token '" + t + "' cannot be written as a tree leaf");
    }
    out += " (" + std::to_string(label) + " " + t + ")";
  }
  out += ")";
  return out;
}

Dataset load_sst(const std::filesystem::path& path, const TokenizerOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Dataset data{LabelSet::sst5(), {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    PtbTree tree;
    try {
      tree = parse_ptb_tree(line);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), e.offset());
    }
    if (tree.label < 0 || tree.label > 4) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": root label out of range 0..4");
    }
    Example ex;
    ex.label = static_cast<std::size_t>(tree.label);
    for (const auto& leaf : tree.tokens) {
      if (opts.twitter && is_url(leaf)) {
        ex.tokens.emplace_back("<url>");
      } else if (opts.twitter && leaf.size() > 1 && leaf[0] == '@') {
        ex.tokens.emplace_back("<user>");
      } else {
        ex.tokens.push_back(lower(leaf));
      }
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

// ------------------------------------------------------------------- folds

std::vector<std::size_t> stratified_kfold(const Dataset& data, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be at least 2");
  const std::size_t C = data.num_classes();
  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < data.size(); ++i) by_class.at(data.examples[i].label).push_back(i);
  for (std::size_t c = 0; c < C; ++c) {
    if (by_class[c].size() < k) {
      throw DataError("class '" + data.labels.name(c) + "' has " + std::to_string(by_class[c].size()) +
                      " examples, fewer than k=" + std::to_string(k));
    }
  }
  std::vector<std::size_t> fold(data.size(), 0);
  // Each class continues dealing where the previous one stopped so overall
  // fold sizes stay balanced too.
  std::size_t offset = 0;
  for (std::size_t c = 0; c < C; ++c) {
    Rng rng(mix_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    for (std::size_t j = 0; j < by_class[c].size(); ++j) fold[by_class[c][j]] = (offset + j) % k;
    offset = (offset + by_class[c].size()) % k;
  }
  return fold;
}

std::pair<Dataset, Dataset> split_dev(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("dev fraction must be in (0, 1)");
  if (data.size() < 2) throw DataError("need at least 2 examples to carve a dev split");
  const std::size_t C = data.num_classes();
  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < data.size(); ++i) by_class.at(data.examples[i].label).push_back(i);

  std::vector<bool> is_dev(data.size(), false);
  std::size_t n_dev = 0;
  for (std::size_t c = 0; c < C; ++c) {
    Rng rng(mix_seed(seed, 0xDE5, c));
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(by_class[c].size())));
    for (std::size_t j = 0; j < take && j + 1 < by_class[c].size(); ++j) {
      is_dev[by_class[c][j]] = true;
      ++n_dev;
    }
  }
  if (n_dev == 0) {
    Rng rng(mix_seed(seed, 0xDE5));
    is_dev[rng.below(data.size())] = true;
  }
  std::vector<std::size_t> train_pos, dev_pos;
  for (std::size_t i = 0; i < data.size(); ++i) (is_dev[i] ? dev_pos : train_pos).push_back(i);
  return {data.subset(train_pos), data.subset(dev_pos)};
}

}  // namespace scoreembed
