#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace radlab {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;
  nlohmann::json config;  // resolved flag values
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  uint64_t seed = 0;
  std::string started;
  std::string finished;
};

std::string iso8601_utc_now();

// Writes <path> atomically (temp file + rename).
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace radlab
