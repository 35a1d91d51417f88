#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "scoreembed/error.hpp"
#include "scoreembed/optim.hpp"
#include "scoreembed/rng.hpp"
#include "synthetic.hpp"
#include "test_helpers.hpp"

using namespace scoreembed;

namespace {

Dataset toy_separable(std::size_t n, std::uint64_t seed) {
  Dataset d{LabelSet({"neg", "pos"}), {}};
  Rng rng(seed);
  const std::vector<std::string> filler{"the", "a", "plan", "bill", "is", "this"};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % 2;
    TokenSeq t;
    for (int j = 0; j < 3; ++j) t.push_back(filler[rng.below(filler.size())]);
    t.insert(t.begin() + static_cast<long>(rng.below(4)), y == 1 ? "great" : "awful");
    d.examples.push_back({t, y, {}});
  }
  return d;
}

TrainConfig small_train_config() {
  TrainConfig cfg;
  cfg.filters = 6;
  cfg.epochs = 8;
  cfg.batch_size = 10;
  cfg.lr = 0.1;
  return cfg;
}

}  // namespace

TEST_CASE("adagrad step examples") {
  std::vector<double> theta{1.0}, g{0.5}, G{0.0};
  adagrad_step(theta, g, G, 0.1, 1e-8);
  CHECK(G[0] == 0.25);
  const double first = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  CHECK(theta[0] == doctest::Approx(first).epsilon(1e-15));
  adagrad_step(theta, g, G, 0.1, 1e-8);
  CHECK(G[0] == 0.5);
  CHECK(theta[0] == doctest::Approx(first - 0.05 / (std::sqrt(0.5) + 1e-8)).epsilon(1e-12));

  // Zero gradient leaves the parameter alone.
  std::vector<double> t2{3.0}, z{0.0}, G2{0.0};
  adagrad_step(t2, z, G2, 0.1, 1e-8);
  CHECK(t2[0] == 3.0);
}

TEST_CASE("adagrad accumulator is monotone and steps are bounded by lr") {
  Rng rng(4);
  std::vector<double> theta(20), G(20, 0.0), g(20);
  for (auto& x : theta) x = rng.uniform(-1, 1);
  for (int step = 0; step < 50; ++step) {
    for (auto& x : g) x = rng.uniform(-5, 5);
    auto before = theta;
    auto G_before = G;
    adagrad_step(theta, g, G, 0.05, 1e-8);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      CHECK(G[i] >= G_before[i]);
      CHECK(std::abs(theta[i] - before[i]) <= 0.05 + 1e-12);
    }
  }
}

TEST_CASE("adagrad_update refuses non-finite gradients") {
  auto tp = make_tiny_problem(2);
  AdaGradState state(tp.model.params, 0.1, 1e-8);
  auto grads = zeros_like(tp.model.params);
  grads.dense.data[0] = 1.0;
  grads.conv[1].bias[0] = std::numeric_limits<double>::quiet_NaN();
  auto before = tp.model.params;
  try {
    adagrad_update(state, tp.model.params, grads);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("conv[1].bias") != std::string::npos);
  }
  CHECK(tp.model.params == before);
}

TEST_CASE("metrics examples") {
  SUBCASE("all predictions one class") {
    std::vector<std::size_t> truth{0, 0, 1, 1}, pred{0, 0, 0, 0};
    auto m = compute_metrics(truth, pred, 2);
    CHECK(m.accuracy == 0.5);
    CHECK(m.macro_f1 == doctest::Approx(1.0 / 3));
  }
  SUBCASE("hand tallied three classes") {
    std::vector<std::size_t> truth{0, 0, 0, 1, 1, 1, 2, 2, 2, 2};
    std::vector<std::size_t> pred{0, 0, 1, 1, 1, 2, 2, 2, 0, 2};
    auto m = compute_metrics(truth, pred, 3);
    CHECK(m.accuracy == doctest::Approx(0.7));
    CHECK(m.macro_f1 == doctest::Approx((2.0 / 3 + 2.0 / 3 + 0.75) / 3));
    CHECK(m.confusion[2][0] == 1);
    CHECK(m.confusion[0][1] == 1);
    CHECK(m.n == 10);
  }
  SUBCASE("perfect") {
    std::vector<std::size_t> y{0, 1, 2, 1};
    auto m = compute_metrics(y, y, 3);
    CHECK(m.accuracy == 1.0);
    CHECK(m.macro_f1 == 1.0);
  }
  SUBCASE("absent class counts as zero") {
    std::vector<std::size_t> y{0, 1, 0, 1};
    CHECK(compute_metrics(y, y, 3).macro_f1 == doctest::Approx(2.0 / 3));
  }
  std::vector<std::size_t> a{0, 1}, b{0};
  CHECK_THROWS_AS(compute_metrics(a, b, 2), DataError);
  CHECK_THROWS_AS(compute_metrics({}, {}, 2), DataError);
}

TEST_CASE("metrics bounds on random labels") {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t C = 2 + rng.below(4);
    std::vector<std::size_t> y(1 + rng.below(50)), p(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = rng.below(C);
      p[i] = rng.below(C);
    }
    auto m = compute_metrics(y, p, C);
    CHECK(m.accuracy >= 0.0);
    CHECK(m.accuracy <= 1.0);
    CHECK(m.macro_f1 >= 0.0);
    CHECK(m.macro_f1 <= 1.0);
    std::size_t total = 0;
    for (const auto& row : m.confusion)
      for (auto x : row) total += x;
    CHECK(total == y.size());
  }
}

TEST_CASE("cohen kappa") {
  std::vector<std::size_t> a{0, 1, 0, 1}, same = a, flipped{1, 0, 1, 0};
  CHECK(cohen_kappa(a, same) == doctest::Approx(1.0));
  CHECK(cohen_kappa(a, flipped) == doctest::Approx(-1.0));

  std::vector<std::size_t> c0{0, 0, 0}, c1{0, 0, 0};
  CHECK(cohen_kappa(c0, c1) == 1.0);

  // Contingency table with rows = rater a, columns = rater b.
  const std::size_t table[3][3] = {{10, 2, 1}, {3, 8, 2}, {1, 2, 11}};
  std::vector<std::size_t> ra, rb;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < table[i][j]; ++k) {
        ra.push_back(i);
        rb.push_back(j);
      }
  const double po = 29.0 / 40;
  const double pe = (13.0 * 14 + 13.0 * 12 + 14.0 * 14) / 1600;
  CHECK(cohen_kappa(ra, rb) == doctest::Approx((po - pe) / (1 - pe)).epsilon(1e-12));

  // Relabelling both raters consistently changes nothing.
  std::vector<std::size_t> perm{2, 0, 1};
  auto ra2 = ra, rb2 = rb;
  for (auto& x : ra2) x = perm[x];
  for (auto& x : rb2) x = perm[x];
  CHECK(cohen_kappa(ra2, rb2) == doctest::Approx(cohen_kappa(ra, rb)).epsilon(1e-12));
  CHECK(cohen_kappa(ra, rb) == doctest::Approx(cohen_kappa(rb, ra)).epsilon(1e-12));
}

TEST_CASE("training on a separable corpus") {
  auto train_data = toy_separable(80, 1);
  auto dev_data = toy_separable(20, 2);
  auto vocab = Vocabulary::build(train_data);
  auto table = learn_scores(train_data, vocab);
  auto cfg = small_train_config();
  auto res = train(train_data, dev_data, vocab, table, cfg);
  REQUIRE(res.history.size() >= 2);
  CHECK(res.history[0].epoch == 0);
  CHECK(res.history[res.best_epoch].dev_accuracy == 1.0);
  CHECK(evaluate(res.model, dev_data, vocab).accuracy == 1.0);
  CHECK(res.history.back().train_loss < res.history.front().train_loss);
}

TEST_CASE("epoch 0 loss with a zero output layer is ln C") {
  testing::SynthConfig sc;
  sc.examples = 60;
  auto data = testing::make_synthetic(sc).data;
  auto vocab = Vocabulary::build(data);
  auto table = learn_scores(data, vocab);
  auto cfg = small_train_config();
  cfg.epochs = 1;
  auto model = init_model(table, vocab, cfg.model_config(3));
  model.params.dense.fill(0.0);
  std::fill(model.params.dense_bias.begin(), model.params.dense_bias.end(), 0.0);
  auto res = train_from(model, data, data, vocab, cfg);
  CHECK(res.history[0].train_loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("training is deterministic across runs and thread counts") {
  testing::SynthConfig sc;
  sc.examples = 150;
  auto data = testing::make_synthetic(sc).data;
  auto [tr, dev] = split_dev(data, 0.2, 3);
  auto vocab = Vocabulary::build(tr);
  auto table = learn_scores(tr, vocab);
  auto cfg = small_train_config();
  cfg.epochs = 3;
  auto a = train(tr, dev, vocab, table, cfg, 1);
  auto b = train(tr, dev, vocab, table, cfg, 1);
  auto c = train(tr, dev, vocab, table, cfg, 3);
  CHECK(a.model.params == b.model.params);
  CHECK(a.model.params == c.model.params);
  CHECK(history_csv(a.history) == history_csv(c.history));
  cfg.seed = 2;
  CHECK_FALSE(train(tr, dev, vocab, table, cfg, 1).model.params == a.model.params);
}

TEST_CASE("early stopping keeps the best epoch") {
  auto train_data = toy_separable(40, 5);
  auto vocab = Vocabulary::build(train_data);
  auto table = learn_scores(train_data, vocab);
  auto cfg = small_train_config();
  cfg.epochs = 30;
  cfg.patience = 2;
  auto res = train(train_data, train_data, vocab, table, cfg);
  CHECK(res.history.size() <= res.best_epoch + cfg.patience + 1);
  for (const auto& rec : res.history) CHECK(rec.dev_accuracy <= res.history[res.best_epoch].dev_accuracy);
  for (std::size_t e = 0; e < res.best_epoch; ++e)
    CHECK(res.history[e].dev_accuracy < res.history[res.best_epoch].dev_accuracy);
  CHECK(evaluate(res.model, train_data, vocab).accuracy == res.history[res.best_epoch].dev_accuracy);
}

TEST_CASE("history csv") {
  std::vector<EpochRecord> h{{0, 1.0986, 0.5}, {1, 0.5, 0.75}};
  auto csv = history_csv(h);
  CHECK(csv.rfind("epoch,train_loss,dev_accuracy\n", 0) == 0);
  CHECK(csv.find("\n1,0.5,0.75\n") != std::string::npos);
}

TEST_CASE("kfold_evaluate partitions and hides test labels") {
  testing::SynthConfig sc;
  sc.examples = 100;
  auto data = testing::make_synthetic(sc).data;
  std::multiset<std::string> seen;
  auto key = [](const Example& ex) {
    std::string s;
    for (const auto& t : ex.tokens) s += t + " ";
    return s;
  };
  auto report = kfold_evaluate(data, 5, 7, [&](std::size_t, const Dataset& tr, const Dataset& te) {
    CHECK(tr.size() + te.size() == data.size());
    for (const auto& ex : te.examples) {
      CHECK(ex.label == 0);
      seen.insert(key(ex));
    }
    return std::vector<std::size_t>(te.size(), 1);
  });
  std::multiset<std::string> all;
  for (const auto& ex : data.examples) all.insert(key(ex));
  CHECK(seen == all);
  REQUIRE(report.folds.size() == 5);
  std::size_t tested = 0;
  for (const auto& f : report.folds) tested += f.n_test;
  CHECK(tested == data.size());
  CHECK(report.stdev_accuracy >= 0.0);
}

TEST_CASE("cross_validate keeps fold vocabularies inside fold training data") {
  testing::SynthConfig sc;
  sc.examples = 150;
  sc.rare_token_rate = 0.5;
  auto data = testing::make_synthetic(sc).data;
  auto cfg = small_train_config();
  cfg.epochs = 2;
  std::size_t calls = 0;
  auto report = cross_validate(data, cfg, 3, 1, [&](const FoldContext& ctx) {
    ++calls;
    std::set<std::string> fit_tokens;
    for (const auto& ex : ctx.train.examples) fit_tokens.insert(ex.tokens.begin(), ex.tokens.end());
    for (std::int32_t i = Vocabulary::kFirstWord; i < static_cast<std::int32_t>(ctx.vocab.slots()); ++i)
      CHECK(fit_tokens.count(ctx.vocab.word(i)) == 1);
    CHECK(ctx.table.num_words() == ctx.vocab.word_count());
  });
  CHECK(calls == 3);
  CHECK(report.folds.size() == 3);
  auto csv = cv_report_csv(report, &cfg);
  CHECK(csv.rfind("# ", 0) == 0);
  CHECK(csv.find("fold,n_train,n_test,accuracy,macro_f1,accuracy_stdev,macro_f1_stdev\n") != std::string::npos);
  CHECK(csv.find("\nsummary,") != std::string::npos);
}

TEST_CASE("train config parsing") {
  TrainConfig cfg;
  cfg.set("lr", "0.2");
  cfg.set("widths", "2,3");
  cfg.set("activation", "tanh");
  CHECK(cfg.lr == 0.2);
  CHECK(cfg.widths == std::vector<std::size_t>{2, 3});
  CHECK(cfg.activation == Activation::tanh);
  CHECK_THROWS_AS(cfg.set("lr", "fast"), ConfigError);
  CHECK_THROWS_AS(cfg.set("nonsense", "1"), ConfigError);

  TrainConfig copy;
  for (const auto& [k, v] : cfg.entries()) copy.set(k, v);
  CHECK(copy.entries() == cfg.entries());

  auto dir = testing::scratch_dir("config");
  testing::write_text(dir / "c.cfg", "# comment\n\nepochs = 3\nbatch_size=7\n");
  TrainConfig fromfile;
  apply_config_file(dir / "c.cfg", fromfile);
  CHECK(fromfile.epochs == 3);
  CHECK(fromfile.batch_size == 7);
  testing::write_text(dir / "bad.cfg", "epochs\n");
  CHECK_THROWS_AS(apply_config_file(dir / "bad.cfg", fromfile), ConfigError);

  TrainConfig bad;
  bad.lr = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("adagrad step from a prior accumulator") {
  std::vector<double> theta{1.0}, g{0.5}, G{0.25};
  adagrad_step(theta, g, G, 0.1, 0.0);
  CHECK(G[0] == 0.5);
  CHECK(std::abs(theta[0] - (1.0 - 0.1 * 0.5 / std::sqrt(0.5))) <= 1e-9);
  CHECK(std::abs(theta[0] - 0.929289) <= 1e-6);
  std::vector<double> zero{0.0};
  adagrad_step(theta, zero, G, 0.1, 0.0);
  CHECK(G[0] == 0.5);
}

TEST_CASE("two-word toy corpus reaches perfect dev accuracy") {
  Dataset d{LabelSet({"neg", "pos"}), {}};
  for (int i = 0; i < 20; ++i) d.examples.push_back({{i % 2 ? "yes" : "no"}, static_cast<std::size_t>(i % 2), {}});
  auto vocab = Vocabulary::build(d);
  auto table = learn_scores(d, vocab);
  auto cfg = small_train_config();
  cfg.epochs = 25;
  auto res = train(d, d, vocab, table, cfg);
  CHECK(res.history[res.best_epoch].dev_accuracy == 1.0);
  for (std::size_t e = 0; e < res.history.size(); ++e) CHECK(res.history[e].epoch == e);
}

TEST_CASE("kfold over 100 examples gives 5 test folds of 20") {
  testing::SynthConfig sc;
  sc.examples = 100;
  sc.classes = 2;
  auto data = testing::make_synthetic(sc).data;
  auto report = kfold_evaluate(data, 5, 1, [](std::size_t, const Dataset&, const Dataset& te) {
    return std::vector<std::size_t>(te.size(), 0);
  });
  for (const auto& f : report.folds) {
    CHECK(f.n_test == 20);
    CHECK(f.n_train == 80);
  }
}

TEST_CASE("empty training data is rejected") {
  auto tp = make_tiny_problem(1);
  Dataset empty{LabelSet({"a", "b", "c"}), {}};
  CHECK_THROWS_AS(train_from(tp.model, empty, empty, tp.vocab, small_train_config()), DataError);
}
