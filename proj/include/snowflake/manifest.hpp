#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace snowflake {

/// Hex SHA-1 of "blob <size>\0<content>", the hash git assigns to a file.
std::string git_blob_sha1(std::string_view content);

/// Compact dump with sorted keys; the hashed form of a config.
std::string canonical_json(const nlohmann::json& j);

struct RunManifest {
  std::string command;
  std::string config_path;  // as given on the command line, empty when none
  std::string config_hash;  // git_blob_sha1 of the canonical effective config
  std::vector<std::string> outputs;  // relative to the output directory
  std::uint64_t seed = 0;
  nlohmann::json config;     // effective config after defaults and overrides

  static RunManifest make(std::string command, std::string config_path, nlohmann::json effective_config,
                          std::uint64_t seed);
};

void to_json(nlohmann::json& j, const RunManifest& m);

}  // namespace snowflake
