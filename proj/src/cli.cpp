#include "scoreembed/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "scoreembed/baselines.hpp"
#include "scoreembed/corpus.hpp"
#include "scoreembed/error.hpp"
#include "scoreembed/format.hpp"
#include "scoreembed/model.hpp"
#include "scoreembed/model_io.hpp"
#include "scoreembed/optim.hpp"
#include "scoreembed/scorerep.hpp"
#include "scoreembed/timeline.hpp"

namespace scoreembed {

namespace {

struct SharedOptions {
  std::string labels_path;
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string format = "tsv";
  std::size_t threads = 0;
};

void add_shared(CLI::App* cmd, SharedOptions& o) {
  cmd->add_option("--labels", o.labels_path, "Label map file, one class name per line");
  cmd->add_option("--seed", o.seed, "Random seed (overrides the config file)");
  cmd->add_option("--config", o.config_path, "key=value configuration file");
  cmd->add_option("--format", o.format, "Corpus format")->check(CLI::IsMember({"tsv", "sst"}));
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
}

TrainConfig resolve_config(const SharedOptions& o) {
  TrainConfig cfg;
  // Treebank text is already tokenised; Twitter normalisation stays off
  // unless the config file turns it on.
  if (o.format == "sst") cfg.twitter = false;
  if (!o.config_path.empty()) apply_config_file(o.config_path, cfg);
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

Dataset load_corpus(const std::string& path, const SharedOptions& o, const TrainConfig& cfg,
                    const LabelSet* fallback_labels, std::ostream& err) {
  if (o.format == "sst") {
    return load_sst(path, cfg.tokenizer());
  }
  LabelSet labels;
  if (!o.labels_path.empty()) {
    labels = LabelSet::load(o.labels_path);
  } else if (fallback_labels) {
    labels = *fallback_labels;
  } else {
    throw ConfigError("--labels is required for tsv input");
  }
  LoadReport report;
  auto data = load_tsv(path, labels, cfg.tokenizer(), &report);
  for (const auto& d : report.diagnostics) err << "warning: " << d << "\n";
  err << path << ": accepted " << report.accepted << ", rejected " << report.rejected << "\n";
  if (data.empty()) throw DataError(path + ": no usable examples");
  return data;
}

void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    write_file_atomic(path, content);
  }
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

void print_metrics(std::ostream& out, const Metrics& m, const LabelSet& labels) {
  out << "examples: " << m.n << "\n";
  out << "accuracy: " << fixed(m.accuracy) << "\n";
  out << "macro-F1: " << fixed(m.macro_f1) << "\n";
  out << "confusion (rows = true, columns = predicted):\n";
  std::size_t width = 8;
  for (const auto& n : labels.names()) width = std::max(width, n.size() + 2);
  out << std::setw(static_cast<int>(width)) << "";
  for (const auto& n : labels.names()) out << std::setw(static_cast<int>(width)) << n;
  out << "\n";
  for (std::size_t r = 0; r < m.confusion.size(); ++r) {
    out << std::setw(static_cast<int>(width)) << labels.name(r);
    for (auto v : m.confusion[r]) out << std::setw(static_cast<int>(width)) << v;
    out << "\n";
  }
}

// ------------------------------------------------------------ subcommands

struct TrainArgs {
  std::string train_path, dev_path, model_path, history_path;
};

int cmd_train(const SharedOptions& o, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = resolve_config(o);
  Dataset train_data = load_corpus(a.train_path, o, cfg, nullptr, err);
  Dataset dev_data;
  if (!a.dev_path.empty()) {
    dev_data = load_corpus(a.dev_path, o, cfg, &train_data.labels, err);
  } else {
    std::tie(train_data, dev_data) = split_dev(train_data, cfg.dev_fraction, cfg.seed);
    err << "dev split: " << dev_data.size() << " examples carved from training data\n";
  }
  auto vocab = Vocabulary::build(train_data, cfg.min_freq);
  auto table = learn_scores(train_data, vocab, cfg.smoothing, cfg.count_mode);
  auto result = train(train_data, dev_data, vocab, table, cfg, o.threads);

  ModelBundle bundle{result.model, vocab, train_data.labels, cfg};
  const std::string history_path = a.history_path.empty() ? a.model_path + ".history.csv" : a.history_path;
  save_model(a.model_path, bundle);
  write_file_atomic(history_path, history_csv(result.history));

  const auto& last = result.history.back();
  out << "trained " << last.epoch << " epochs on " << train_data.size() << " examples, vocabulary "
      << vocab.word_count() << "\n";
  out << "best dev accuracy " << fixed(result.history[result.best_epoch].dev_accuracy) << " at epoch "
      << result.best_epoch << "\n";
  out << "model: " << a.model_path << "\nhistory: " << history_path << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model_path, data_path, out_path, confusion_path;
};

std::string metrics_csv(const Metrics& m) {
  return "n,accuracy,macro_f1\n" + std::to_string(m.n) + "," + format_double(m.accuracy) + "," +
         format_double(m.macro_f1) + "\n";
}

std::string confusion_csv(const Metrics& m, const LabelSet& labels) {
  std::string s = "true_label";
  for (const auto& n : labels.names()) s += ",pred_" + n;
  s += "\n";
  for (std::size_t r = 0; r < m.confusion.size(); ++r) {
    s += labels.name(r);
    for (auto v : m.confusion[r]) s += "," + std::to_string(v);
    s += "\n";
  }
  return s;
}

int cmd_eval(const SharedOptions& o, const EvalArgs& a, std::ostream& out, std::ostream& err) {
  auto bundle = load_model(a.model_path);
  Dataset data = load_corpus(a.data_path, o, bundle.config, &bundle.labels, err);
  if (!(data.labels == bundle.labels)) throw DataError("dataset labels do not match the model's labels");
  auto m = evaluate(bundle.model, data, bundle.vocab, o.threads);
  print_metrics(out, m, bundle.labels);
  if (!a.out_path.empty()) write_file_atomic(a.out_path, metrics_csv(m));
  if (!a.confusion_path.empty()) write_file_atomic(a.confusion_path, confusion_csv(m, bundle.labels));
  return kExitOk;
}

int cmd_predict(const std::string& model_path, std::istream& in, std::ostream& out) {
  auto bundle = load_model(model_path);
  const auto tok = bundle.config.tokenizer();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tokens = tokenize(line, tok);
    if (tokens.empty()) {
      out << "!error\tempty input\t" << line << "\n";
      continue;
    }
    auto p = predict_proba(bundle.model, tokens, bundle.vocab);
    out << bundle.labels.name(argmax(p));
    for (double v : p) out << "\t" << format_double(v);
    out << "\n";
  }
  return kExitOk;
}

struct ExportArgs {
  std::string train_path, model_path, out_path;
  std::optional<std::size_t> top_k;
};

int cmd_export(const SharedOptions& o, const ExportArgs& a, std::ostream& out, std::ostream& err) {
  std::string text;
  if (!a.model_path.empty()) {
    auto bundle = load_model(a.model_path);
    text = export_rows(bundle.model.params.embedding, bundle.vocab, a.top_k);
  } else if (!a.train_path.empty()) {
    const TrainConfig cfg = resolve_config(o);
    auto data = load_corpus(a.train_path, o, cfg, nullptr, err);
    auto vocab = Vocabulary::build(data, cfg.min_freq);
    text = export_scores(learn_scores(data, vocab, cfg.smoothing, cfg.count_mode), vocab, a.top_k);
  } else {
    throw ConfigError("export-scores needs --train or --model");
  }
  write_output(a.out_path, text, out);
  return kExitOk;
}

struct GradcheckArgs {
  std::string model_path, data_path;
  double epsilon = 1e-5;
  double threshold = 1e-4;
};

int cmd_gradcheck(const SharedOptions& o, const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  GradCheckResult r;
  GradCheckOptions gopts;
  gopts.epsilon = a.epsilon;
  if (!a.model_path.empty()) {
    if (a.data_path.empty()) throw ConfigError("gradcheck --model also needs --data");
    auto bundle = load_model(a.model_path);
    auto data = load_corpus(a.data_path, o, bundle.config, &bundle.labels, err);
    bundle.model.config.dropout = 0.0;
    gopts.touched_rows_only = true;
    const auto& ex = data.examples.front();
    r = grad_check(bundle.model, encode(ex.tokens, bundle.vocab, bundle.model.min_len()), ex.label, gopts);
  } else {
    auto tiny = make_tiny_problem(o.seed.value_or(1));
    r = grad_check(tiny.model, tiny.input, tiny.label, gopts);
  }
  out << "checked " << r.checked << " parameters, max relative error " << format_double(r.max_rel_error) << " ("
      << r.worst_block << "[" << r.worst_index << "])\n";
  if (!(r.max_rel_error < a.threshold)) {
    err << "gradient check failed: max relative error >= " << format_double(a.threshold) << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

struct CvArgs {
  std::string data_path, out_path;
  std::size_t k = 5;
  std::size_t limit = 0;
};

int cmd_cv(const SharedOptions& o, const CvArgs& a, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = resolve_config(o);
  auto data = load_corpus(a.data_path, o, cfg, nullptr, err);
  if (a.limit > 0 && a.limit < data.size()) data.examples.resize(a.limit);
  auto report = cross_validate(data, cfg, a.k, o.threads);
  write_output(a.out_path, cv_report_csv(report, &cfg), out);
  err << "mean accuracy " << fixed(report.mean_accuracy) << " +/- " << fixed(report.stdev_accuracy) << " over "
      << a.k << " folds\n";
  return kExitOk;
}

struct TimelineArgs {
  std::string model_path, input_path, out_path;
};

int cmd_timeline(const TimelineArgs& a, std::ostream& out, std::ostream& err) {
  auto bundle = load_model(a.model_path);
  std::ifstream in(a.input_path);
  if (!in) throw DataError("cannot open " + a.input_path);
  const auto tok = bundle.config.tokenizer();
  auto result = build_timeline(in, bundle.labels.size(), [&](const std::string& text) -> std::optional<std::size_t> {
    auto tokens = tokenize(text, tok);
    if (tokens.empty()) return std::nullopt;
    return predict(bundle.model, tokens, bundle.vocab);
  });
  for (const auto& d : result.diagnostics) err << "rejected: " << d << "\n";
  err << "accepted " << result.accepted << ", rejected " << result.rejected << "\n";
  write_output(a.out_path, timeline_csv(result, bundle.labels), out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Score-embedding text classifier"};
  app.require_subcommand(1);
  SharedOptions shared;

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a score-embedding model");
  add_shared(train_cmd, shared);
  train_cmd->add_option("--train", train_args.train_path, "Training corpus")->required();
  train_cmd->add_option("--dev", train_args.dev_path, "Dev corpus for model selection");
  train_cmd->add_option("--model", train_args.model_path, "Output model file")->required();
  train_cmd->add_option("--history", train_args.history_path, "Output history CSV");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on labelled data");
  add_shared(eval_cmd, shared);
  eval_cmd->add_option("--model", eval_args.model_path)->required();
  eval_cmd->add_option("--data", eval_args.data_path)->required();
  eval_cmd->add_option("--out", eval_args.out_path, "Metrics CSV");
  eval_cmd->add_option("--confusion", eval_args.confusion_path, "Confusion matrix CSV");

  std::string predict_model;
  auto* predict_cmd = app.add_subcommand("predict", "Classify lines from standard input");
  predict_cmd->add_option("--model", predict_model)->required();

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-scores", "Write per-word class scores");
  add_shared(export_cmd, shared);
  export_cmd->add_option("--train", export_args.train_path, "Learn scores from this corpus");
  export_cmd->add_option("--model", export_args.model_path, "Export the fine-tuned embedding of a model");
  export_cmd->add_option("--top-k", export_args.top_k, "Top words per class");
  export_cmd->add_option("--out", export_args.out_path);

  GradcheckArgs grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  add_shared(grad_cmd, shared);
  grad_cmd->add_option("--model", grad_args.model_path);
  grad_cmd->add_option("--data", grad_args.data_path);
  grad_cmd->add_option("--eps", grad_args.epsilon);

  CvArgs cv_args;
  auto* cv_cmd = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  add_shared(cv_cmd, shared);
  cv_cmd->add_option("--data", cv_args.data_path)->required();
  cv_cmd->add_option("--k", cv_args.k)->check(CLI::Range(2, 1000));
  cv_cmd->add_option("--limit", cv_args.limit, "Use only the first N examples");
  cv_cmd->add_option("--out", cv_args.out_path, "Report CSV");

  TimelineArgs timeline_args;
  auto* timeline_cmd = app.add_subcommand("timeline", "Daily prediction counts from JSONL records");
  timeline_cmd->add_option("--model", timeline_args.model_path)->required();
  timeline_cmd->add_option("--input", timeline_args.input_path)->required();
  timeline_cmd->add_option("--out", timeline_args.out_path);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(shared, train_args, out, err);
    if (*eval_cmd) return cmd_eval(shared, eval_args, out, err);
    if (*predict_cmd) return cmd_predict(predict_model, in, out);
    if (*export_cmd) return cmd_export(shared, export_args, out, err);
    if (*grad_cmd) return cmd_gradcheck(shared, grad_args, out, err);
    if (*cv_cmd) return cmd_cv(shared, cv_args, out, err);
    if (*timeline_cmd) return cmd_timeline(timeline_args, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace scoreembed
