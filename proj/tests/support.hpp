#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "cyclesql/corpus.hpp"
#include "cyclesql/schema.hpp"

namespace cyclesql::test {

inline std::filesystem::path fixture_src() { return CYCLESQL_FIXTURE_SRC; }
inline std::filesystem::path fixture_root() { return CYCLESQL_FIXTURE_ROOT; }
inline std::filesystem::path cli_path() { return CYCLESQL_CLI; }
inline std::filesystem::path fake_adapter_path() { return CYCLESQL_FAKE_ADAPTER; }

inline const SchemaIndex& fixtures() {
   static const SchemaIndex index = index_schemas(load_schemas(fixture_src() / "tables.json", fixture_root()));
   return index;
}

inline const DatabaseEnv& school() { return lookup_env(fixtures(), "school"); }
inline const DatabaseEnv& counts() { return lookup_env(fixtures(), "counts"); }
inline const DatabaseEnv& islands() { return lookup_env(fixtures(), "islands"); }

inline const std::vector<CorpusExample>& train_corpus() {
   static const auto corpus = load_corpus(fixture_src() / "train.json");
   return corpus;
}

/// Fresh directory under the system temp dir, unique per process and call.
inline std::filesystem::path scratch_dir(const std::string& tag) {
   static std::atomic<int> counter{0};
   auto dir = std::filesystem::temp_directory_path() /
              ("cyclesql-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
   std::filesystem::remove_all(dir);
   std::filesystem::create_directories(dir);
   return dir;
}

} // namespace cyclesql::test
