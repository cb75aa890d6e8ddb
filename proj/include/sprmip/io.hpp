#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "sprmip/mlp.hpp"

namespace sprmip {

inline constexpr int kModelFormatVersion = 1;

// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

// Model document:
//   {format_version, arch, layers: [{rows, cols, weights (row-major), bias}],
//    training_meta}
nlohmann::json model_to_json(const Mlp& mlp,
                             const nlohmann::json& training_meta = nlohmann::json::object());

struct LoadedModel {
  Mlp mlp;
  nlohmann::json training_meta;
};

// Throws FormatError on a wrong version, missing field or shape mismatch.
LoadedModel model_from_json(const nlohmann::json& doc);

void save_model(const std::string& path, const Mlp& mlp,
                const nlohmann::json& training_meta = nlohmann::json::object());
LoadedModel load_model(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace sprmip
