#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace cyclesql {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
   std::string subcommand;
   nlohmann::json config = nlohmann::json::object();
   std::uint64_t seed = 0;
   std::vector<std::filesystem::path> inputs;
   std::vector<std::filesystem::path> outputs;
   std::string version = kToolVersion;
   std::chrono::duration<double> duration{0};

   nlohmann::json to_json() const;
   static RunManifest from_json(const nlohmann::json& j);
};

/// <dir>/<subcommand>.manifest.json, where dir holds the first output.
std::filesystem::path manifest_path(const RunManifest& manifest);

/// Writes the manifest next to its outputs and returns where.
std::filesystem::path write_manifest(const RunManifest& manifest);

} // namespace cyclesql
