#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cyclesql {

enum class Provenance { Original, Synthesized };

struct CorpusExample {
   std::string db_id;
   std::string utterance;
   std::string gold_sql;
   /// Present iff turn_index > 1.
   std::optional<std::string> prev_sql;
   int turn_index = 1;
   std::optional<Provenance> provenance;

   friend bool operator==(const CorpusExample&, const CorpusExample&) = default;
};

std::vector<CorpusExample> parse_corpus(const nlohmann::json& document);
std::vector<CorpusExample> load_corpus(const std::filesystem::path& file);
nlohmann::json corpus_to_json(const std::vector<CorpusExample>& examples);
void write_corpus(const std::filesystem::path& file, const std::vector<CorpusExample>& examples);

/// "[PREV] <prev> [UTT] <utterance>" when a previous query exists, else the utterance.
struct TurnContext {
   std::optional<std::string> prev_query;
   std::string utterance;

   std::string rendered_input() const;
};

nlohmann::json read_json_file(const std::filesystem::path& file);
void write_json_file(const std::filesystem::path& file, const nlohmann::json& value);

} // namespace cyclesql
