#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "scoreembed/cli.hpp"
#include "scoreembed/model_io.hpp"
#include "synthetic.hpp"
#include "test_helpers.hpp"

using namespace scoreembed;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "scoreembed");
  std::istringstream in(input);
  std::ostringstream out, err;
  int code = run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string tsv(const Dataset& d) {
  std::string s;
  for (const auto& ex : d.examples) {
    s += d.labels.name(ex.label) + "\t";
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) s += (i ? " " : "") + ex.tokens[i];
    s += "\n";
  }
  return s;
}

// Scratch directory with a small corpus, label map and fast config.
struct Workspace {
  fs::path dir;
  std::string train, dev, labels, config, model;

  explicit Workspace(const std::string& name) : dir(testing::scratch_dir(name)) {
    testing::SynthConfig sc;
    sc.examples = 150;
    auto data = testing::make_synthetic(sc).data;
    auto [tr, dv] = split_dev(data, 0.2, 1);
    train = (dir / "train.tsv").string();
    dev = (dir / "dev.tsv").string();
    labels = (dir / "labels.txt").string();
    config = (dir / "fast.cfg").string();
    model = (dir / "model.json").string();
    testing::write_text(train, tsv(tr));
    testing::write_text(dev, tsv(dv));
    testing::write_text(labels, "negative\nneutral\npositive\n");
    testing::write_text(config, "filters=4\nepochs=2\nbatch_size=16\n");
  }

  Run train_model() const {
    return run({"train", "--train", train, "--dev", dev, "--labels", labels, "--config", config, "--model", model});
  }
};

}  // namespace

TEST_CASE("cli train, eval and predict") {
  Workspace ws("cli_train");
  auto r = ws.train_model();
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  CHECK(fs::exists(ws.model));
  CHECK(fs::exists(ws.model + ".history.csv"));

  auto e = run({"eval", "--model", ws.model, "--data", ws.dev, "--out", (ws.dir / "m.csv").string(), "--confusion",
                (ws.dir / "c.csv").string()});
  REQUIRE_MESSAGE(e.code == kExitOk, e.err);
  CHECK(e.out.find("accuracy:") != std::string::npos);
  CHECK(read_file(ws.dir / "m.csv").rfind("n,accuracy,macro_f1\n", 0) == 0);
  CHECK(read_file(ws.dir / "c.csv").rfind("true_label,pred_negative,pred_neutral,pred_positive\n", 0) == 0);

  auto p = run({"predict", "--model", ws.model}, "neg1 neg2\n\npos3\n");
  REQUIRE(p.code == kExitOk);
  std::istringstream lines(p.out);
  std::string l1, l2, l3;
  std::getline(lines, l1);
  std::getline(lines, l2);
  std::getline(lines, l3);
  CHECK(std::count(l1.begin(), l1.end(), '\t') == 3);
  CHECK(l2.rfind("!error\t", 0) == 0);
  CHECK(std::count(l3.begin(), l3.end(), '\t') == 3);
}

TEST_CASE("cli training is reproducible") {
  Workspace ws("cli_repro");
  REQUIRE(ws.train_model().code == kExitOk);
  auto first = read_file(ws.model);
  auto first_hist = read_file(ws.model + ".history.csv");
  REQUIRE(ws.train_model().code == kExitOk);
  CHECK(read_file(ws.model) == first);
  CHECK(read_file(ws.model + ".history.csv") == first_hist);
}

TEST_CASE("cli failures leave no partial model") {
  Workspace ws("cli_fail");
  auto missing = run({"train", "--train", (ws.dir / "nope.tsv").string(), "--labels", ws.labels, "--model", ws.model});
  CHECK(missing.code == kExitData);
  CHECK_FALSE(fs::exists(ws.model));

  auto no_labels = run({"train", "--train", ws.train, "--model", ws.model});
  CHECK(no_labels.code == kExitUsage);
  CHECK_FALSE(fs::exists(ws.model));

  testing::write_text(ws.dir / "bad.cfg", "lr=-3\n");
  auto bad_cfg = run({"train", "--train", ws.train, "--labels", ws.labels, "--config", (ws.dir / "bad.cfg").string(),
                      "--model", ws.model});
  CHECK(bad_cfg.code == kExitUsage);

  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"eval", "--model", ws.model}).code == kExitUsage);
  CHECK(run({"predict", "--model", ws.model}).code == kExitData);
}

TEST_CASE("cli export-scores") {
  Workspace ws("cli_export");
  auto all = run({"export-scores", "--train", ws.train, "--labels", ws.labels});
  REQUIRE_MESSAGE(all.code == kExitOk, all.err);
  auto top = run({"export-scores", "--train", ws.train, "--labels", ws.labels, "--top-k", "3"});
  CHECK(std::count(top.out.begin(), top.out.end(), '\n') == 9);
  auto imported = import_scores(all.out);
  CHECK(imported.scores.cols == 3);

  REQUIRE(ws.train_model().code == kExitOk);
  auto tuned = run({"export-scores", "--model", ws.model, "--top-k", "2"});
  CHECK(tuned.code == kExitOk);
  CHECK(std::count(tuned.out.begin(), tuned.out.end(), '\n') == 6);
}

TEST_CASE("cli gradcheck") {
  auto r = run({"gradcheck", "--seed", "4"});
  CHECK_MESSAGE(r.code == kExitOk, (r.out + r.err));
  CHECK(r.out.find("max relative error") != std::string::npos);

  Workspace ws("cli_grad");
  REQUIRE(ws.train_model().code == kExitOk);
  auto m = run({"gradcheck", "--model", ws.model, "--data", ws.dev});
  CHECK_MESSAGE(m.code == kExitOk, (m.out + m.err));
}

TEST_CASE("cli cv") {
  Workspace ws("cli_cv");
  auto out = (ws.dir / "cv.csv").string();
  auto r = run({"cv", "--data", ws.train, "--labels", ws.labels, "--config", ws.config, "--k", "3", "--out", out});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  auto csv = read_file(out);
  CHECK(csv.find("fold,n_train,n_test,accuracy,macro_f1,accuracy_stdev,macro_f1_stdev\n") != std::string::npos);
  CHECK(csv.find("\n2,") != std::string::npos);
  CHECK(csv.find("\nsummary,") != std::string::npos);
  CHECK(run({"cv", "--data", ws.train, "--labels", ws.labels, "--k", "1"}).code == kExitUsage);
}

TEST_CASE("cli timeline") {
  Workspace ws("cli_timeline");
  REQUIRE(ws.train_model().code == kExitOk);
  testing::write_text(ws.dir / "tweets.jsonl",
                      "{\"ts\":\"2013-10-01T08:00:00Z\",\"text\":\"pos1 pos2\"}\n"
                      "{\"ts\":\"2013-10-01T09:00:00Z\",\"text\":\"neg1\"}\n"
                      "{\"ts\":\"2013-10-03T09:00:00-05:00\",\"text\":\"neu4\"}\n"
                      "{\"ts\":\"garbage\",\"text\":\"neg1\"}\n");
  auto r = run({"timeline", "--model", ws.model, "--input", (ws.dir / "tweets.jsonl").string()});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  CHECK(r.out.rfind("date,total,count_negative,count_neutral,count_positive\n", 0) == 0);
  CHECK(r.out.find("\n2013-10-01,2,") != std::string::npos);
  CHECK(r.out.find("\n2013-10-03,1,") != std::string::npos);
}

TEST_CASE("cli on a separable toy corpus") {
  auto dir = testing::scratch_dir("cli_toy");
  std::string toy;
  for (int i = 0; i < 30; ++i) toy += i % 2 ? "pro\tgreat plan\n" : "against\tawful bill\n";
  testing::write_text(dir / "toy.tsv", toy);
  testing::write_text(dir / "labels.txt", "against\npro\n");
  testing::write_text(dir / "toy.cfg", "filters=4\nepochs=25\nbatch_size=10\nlr=0.1\n");
  const auto data = (dir / "toy.tsv").string(), labels = (dir / "labels.txt").string();
  const auto model = (dir / "toy.json").string();
  auto t = run({"train", "--train", data, "--dev", data, "--labels", labels, "--config", (dir / "toy.cfg").string(),
                "--model", model});
  REQUIRE_MESSAGE(t.code == kExitOk, t.err);
  auto hist = read_file(model + ".history.csv");
  CHECK(hist.find(",1\n") != std::string::npos);

  auto e1 = run({"eval", "--model", model, "--data", data});
  auto e2 = run({"eval", "--model", model, "--data", data});
  CHECK(e1.code == kExitOk);
  CHECK(e1.out == e2.out);
  CHECK(e1.out.find("accuracy: 1.0000") != std::string::npos);

  auto top = run({"export-scores", "--train", data, "--labels", labels, "--top-k", "10"});
  CHECK(std::count(top.out.begin(), top.out.end(), '\n') == 8);
}

TEST_CASE("cli cv with five folds") {
  Workspace ws("cli_cv5");
  auto r = run({"cv", "--data", ws.train, "--labels", ws.labels, "--config", ws.config, "--k", "5"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  std::istringstream lines(r.out);
  std::string line;
  std::size_t fold_rows = 0, summary = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("summary,", 0) == 0) ++summary;
    else if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) ++fold_rows;
  }
  CHECK(fold_rows == 5);
  CHECK(summary == 1);
}

TEST_CASE("cli export-scores writes k lines per class") {
  Workspace ws("cli_topk");
  auto r = run({"export-scores", "--train", ws.train, "--labels", ws.labels, "--top-k", "10"});
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 30);
}
