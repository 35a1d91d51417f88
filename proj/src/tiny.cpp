#include "scoreembed/model.hpp"
#include "scoreembed/rng.hpp"

namespace scoreembed {

TinyProblem make_tiny_problem(std::uint64_t seed, Activation activation) {
  constexpr std::size_t kWords = 6;
  constexpr std::size_t kClasses = 3;
  Rng rng(mix_seed(seed, 0x7124));

  TinyProblem tp;
  std::vector<std::string> words;
  std::vector<std::int64_t> counts;
  for (std::size_t i = 0; i < kWords; ++i) {
    words.push_back("w" + std::to_string(i));
    counts.push_back(static_cast<std::int64_t>(kWords - i));
  }
  tp.vocab = Vocabulary::from_words(words, counts);

  ScoreTable table;
  table.scores = Matrix(kWords, kClasses);
  table.counts.assign(kWords * kClasses, 0);
  for (std::size_t w = 0; w < kWords; ++w) {
    double total = 0.0;
    for (std::size_t c = 0; c < kClasses; ++c) total += table.scores(w, c) = rng.uniform(0.05, 1.0);
    for (std::size_t c = 0; c < kClasses; ++c) table.scores(w, c) /= total;
  }

  ModelConfig cfg;
  cfg.classes = kClasses;
  cfg.widths = {2, 3};
  cfg.filters = 2;
  cfg.activation = activation;
  cfg.dropout = 0.0;
  cfg.seed = seed;
  tp.model = init_model(table, tp.vocab, cfg);
  for (auto& bank : tp.model.params.conv) {
    for (auto& b : bank.bias) b = rng.uniform(-0.1, 0.1);
  }
  for (auto& b : tp.model.params.dense_bias) b = rng.uniform(-0.1, 0.1);

  const std::size_t len = 4 + rng.below(3);
  for (std::size_t t = 0; t < len; ++t) {
    tp.input.push_back(static_cast<std::int32_t>(Vocabulary::kUnk + rng.below(kWords + 1)));
  }
  tp.input.push_back(Vocabulary::kPad);
  tp.label = rng.below(kClasses);
  return tp;
}

}  // namespace scoreembed
