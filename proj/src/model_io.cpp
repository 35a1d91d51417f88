#include "scoreembed/model_io.hpp"

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "scoreembed/error.hpp"

namespace scoreembed {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) { return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

Matrix matrix_from_json(const json& j, const std::string& field) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw DataError("model field '" + field + "': data length does not match shape");
  return m;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw DataError("invalid model file: " + msg);
}

}  // namespace

std::string serialize_model(const ModelBundle& b) {
  const auto& cfg = b.model.config;
  const auto& p = b.model.params;
  json j;
  j["format"] = std::string(kModelFormat);
  j["config"] = {{"classes", cfg.classes},
                 {"widths", cfg.widths},
                 {"filters", cfg.filters},
                 {"activation", to_string(cfg.activation)},
                 {"dropout_rate", cfg.dropout},
                 {"seed", cfg.seed}};
  json tc = json::object();
  for (const auto& [k, v] : b.config.entries()) tc[k] = v;
  j["train_config"] = tc;
  j["labels"] = b.labels.names();

  std::vector<std::string> words;
  std::vector<std::int64_t> counts;
  for (std::size_t i = Vocabulary::kFirstWord; i < b.vocab.slots(); ++i) {
    words.push_back(b.vocab.word(static_cast<std::int32_t>(i)));
    counts.push_back(b.vocab.count(static_cast<std::int32_t>(i)));
  }
  j["vocabulary"] = {{"words", words}, {"counts", counts}};

  json conv = json::array();
  for (const auto& bank : p.conv) {
    conv.push_back({{"width", bank.width}, {"weights", matrix_to_json(bank.weights)}, {"bias", bank.bias}});
  }
  j["params"] = {{"embedding", matrix_to_json(p.embedding)},
                 {"conv", conv},
                 {"dense", matrix_to_json(p.dense)},
                 {"dense_bias", p.dense_bias}};
  return j.dump(1) + "\n";
}

ModelBundle deserialize_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    require(j.contains("format"), "missing field 'format'");
    const auto format = j.at("format").is_string() ? j.at("format").get<std::string>() : std::string("<non-string>");
    if (format != kModelFormat) {
      throw DataError("invalid model file: field 'format' is '" + format + "', expected '" + std::string(kModelFormat) + "'");
    }

    ModelBundle b;
    const auto& jc = j.at("config");
    auto& cfg = b.model.config;
    cfg.classes = jc.at("classes").get<std::size_t>();
    cfg.widths = jc.at("widths").get<std::vector<std::size_t>>();
    cfg.filters = jc.at("filters").get<std::size_t>();
    cfg.activation = parse_activation(jc.at("activation").get<std::string>());
    cfg.dropout = jc.at("dropout_rate").get<double>();
    cfg.seed = jc.at("seed").get<std::uint64_t>();
    try {
      cfg.validate();
    } catch (const ConfigError& e) {
      throw DataError(std::string("invalid model file: config: ") + e.what());
    }

    for (const auto& [k, v] : j.at("train_config").items()) b.config.set(k, v.get<std::string>());

    b.labels = LabelSet(j.at("labels").get<std::vector<std::string>>());
    require(b.labels.size() == cfg.classes, "label count does not match config.classes");

    b.vocab = Vocabulary::from_words(j.at("vocabulary").at("words").get<std::vector<std::string>>(),
                                     j.at("vocabulary").at("counts").get<std::vector<std::int64_t>>());

    const auto& jp = j.at("params");
    auto& p = b.model.params;
    const std::size_t C = cfg.classes;
    p.embedding = matrix_from_json(jp.at("embedding"), "params.embedding");
    require(p.embedding.rows == b.vocab.slots() && p.embedding.cols == C, "embedding shape does not match vocabulary");
    for (std::size_t c = 0; c < C; ++c) require(p.embedding(Vocabulary::kPad, c) == 0.0, "PAD embedding row is not zero");

    const auto& jconv = jp.at("conv");
    require(jconv.size() == cfg.widths.size(), "conv bank count does not match widths");
    for (std::size_t i = 0; i < jconv.size(); ++i) {
      ConvBank bank;
      bank.width = jconv[i].at("width").get<std::size_t>();
      bank.weights = matrix_from_json(jconv[i].at("weights"), "params.conv");
      bank.bias = jconv[i].at("bias").get<std::vector<double>>();
      require(bank.width == cfg.widths[i], "conv bank width does not match config");
      require(bank.weights.rows == cfg.filters && bank.weights.cols == bank.width * C, "conv weight shape");
      require(bank.bias.size() == cfg.filters, "conv bias length");
      p.conv.push_back(std::move(bank));
    }
    p.dense = matrix_from_json(jp.at("dense"), "params.dense");
    require(p.dense.rows == cfg.pooled_size() && p.dense.cols == C, "dense weight shape");
    p.dense_bias = jp.at("dense_bias").get<std::vector<double>>();
    require(p.dense_bias.size() == C, "dense bias length");

    for (const auto& [name, values] : std::as_const(p).blocks()) {
      for (double v : values) require(std::isfinite(v), "non-finite value in " + name);
    }
    return b;
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid model file: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw DataError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot move model into place at " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_model(const std::filesystem::path& path, const ModelBundle& bundle) {
  write_file_atomic(path, serialize_model(bundle));
}

ModelBundle load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace scoreembed
