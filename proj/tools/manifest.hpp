#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sprmip/mlp.hpp"

namespace sprmip::cli {

// FNV-1a over labels, class count, shape and the raw bytes of every input.
std::uint64_t fingerprint(const Dataset& data);
std::string hex64(std::uint64_t v);

// Tool, library, compiler and dependency versions.
nlohmann::json version_info();

// Every option of `sub` with its effective value and whether it was given.
nlohmann::json option_values(const CLI::App& sub);

struct RunRecord {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json options = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json data = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::object();
  nlohmann::json result = nlohmann::json::object();
  int exit_code = 0;
  std::string error;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

}  // namespace sprmip::cli
