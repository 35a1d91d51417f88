#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scoreembed/baselines.hpp"
#include "scoreembed/corpus.hpp"

namespace scoreembed::testing {

// Seeded corpus with class-indicative vocabulary. Every sentence carries one
// or two sentiment units among filler words. For a polar class a unit is
// either one of its own words or, with probability negation_rate, a negator
// followed by a word of the opposite class ("not bad" is positive). The
// middle class of an odd C has its own words and no negation. After
// generation, label_noise of the labels are replaced by a different class.
struct SynthConfig {
  std::size_t examples = 2000;
  std::size_t classes = 3;
  double label_noise = 0.2;
  double negation_rate = 0.3;
  std::size_t words_per_class = 20;
  std::size_t filler_words = 150;
  std::size_t min_filler = 4;
  std::size_t max_filler = 10;
  // Probability that an example also carries a token unique to it.
  double rare_token_rate = 0.0;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  Dataset data;
  std::vector<std::size_t> clean_labels;  // before noise
  std::vector<std::vector<std::string>> class_words;
};

SynthCorpus make_synthetic(const SynthConfig& cfg);

// Label names for C = 3 are negative, neutral, positive; otherwise c0..c{C-1}.
LabelSet synthetic_labels(std::size_t classes);

// Positive / negative term lists of a 3-class synthetic corpus.
Lexicon synthetic_lexicon(const SynthCorpus& corpus);

// Writes examples as flat SST-style trees, one per line.
std::string to_tree_lines(const Dataset& data);

}  // namespace scoreembed::testing
