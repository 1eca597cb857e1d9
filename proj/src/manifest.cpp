#include "cyclesql/manifest.hpp"

#include "cyclesql/corpus.hpp"

namespace cyclesql {

nlohmann::json RunManifest::to_json() const {
   nlohmann::json in = nlohmann::json::array();
   for (const auto& p : inputs) in.push_back(p.string());
   nlohmann::json out = nlohmann::json::array();
   for (const auto& p : outputs) out.push_back(p.string());
   return {{"subcommand", subcommand}, {"config", config},   {"seed", seed},
           {"inputs", in},             {"outputs", out},    {"version", version},
           {"duration_seconds", duration.count()}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
   RunManifest m;
   m.subcommand = j.at("subcommand").get<std::string>();
   m.config = j.at("config");
   m.seed = j.at("seed").get<std::uint64_t>();
   for (const auto& p : j.at("inputs")) m.inputs.emplace_back(p.get<std::string>());
   for (const auto& p : j.at("outputs")) m.outputs.emplace_back(p.get<std::string>());
   m.version = j.at("version").get<std::string>();
   m.duration = std::chrono::duration<double>(j.at("duration_seconds").get<double>());
   return m;
}

std::filesystem::path manifest_path(const RunManifest& manifest) {
   std::filesystem::path dir = ".";
   if (!manifest.outputs.empty()) {
      const auto& first = manifest.outputs.front();
      dir = std::filesystem::is_directory(first) ? first : first.parent_path();
      if (dir.empty()) dir = ".";
   }
   return dir / (manifest.subcommand + ".manifest.json");
}

std::filesystem::path write_manifest(const RunManifest& manifest) {
   const auto path = manifest_path(manifest);
   write_json_file(path, manifest.to_json());
   return path;
}

} // namespace cyclesql
