#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "scoreembed/corpus.hpp"
#include "scoreembed/model.hpp"
#include "scoreembed/optim.hpp"

namespace scoreembed {

inline constexpr std::string_view kModelFormat = "score-embed/1";

// Everything needed to reproduce predictions: parameters, vocabulary, class
// names and the resolved training configuration.
struct ModelBundle {
  Model model;
  Vocabulary vocab;
  LabelSet labels;
  TrainConfig config;
};

std::string serialize_model(const ModelBundle& bundle);
// Validates the format field and every shape invariant. Throws DataError.
ModelBundle deserialize_model(std::string_view text);

void save_model(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_model(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace scoreembed
