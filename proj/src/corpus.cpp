#include "cyclesql/corpus.hpp"

#include <fstream>

#include "cyclesql/error.hpp"

namespace cyclesql {

namespace {

std::string required_string(const nlohmann::json& entry, const char* name, std::size_t index) {
   auto it = entry.find(name);
   if (it == entry.end() || !it->is_string())
      throw Error(ErrorKind::Format, "corpus entry " + std::to_string(index) + ": missing string field '" + name + "'");
   return it->get<std::string>();
}

} // namespace

std::vector<CorpusExample> parse_corpus(const nlohmann::json& document) {
   if (!document.is_array()) throw Error(ErrorKind::Format, "corpus file is not a JSON array");
   std::vector<CorpusExample> out;
   out.reserve(document.size());
   for (std::size_t i = 0; i < document.size(); ++i) {
      const auto& entry = document[i];
      if (!entry.is_object()) throw Error(ErrorKind::Format, "corpus entry " + std::to_string(i) + " is not an object");
      CorpusExample ex;
      ex.db_id = required_string(entry, "db_id", i);
      ex.utterance = required_string(entry, "question", i);
      ex.gold_sql = required_string(entry, "query", i);
      if (auto it = entry.find("prev_query"); it != entry.end() && !it->is_null()) {
         if (!it->is_string()) throw Error(ErrorKind::Format, "corpus entry " + std::to_string(i) + ": prev_query is not a string");
         ex.prev_sql = it->get<std::string>();
      }
      if (auto it = entry.find("turn_index"); it != entry.end() && !it->is_null()) {
         if (!it->is_number_integer() || it->get<int>() < 1)
            throw Error(ErrorKind::Format, "corpus entry " + std::to_string(i) + ": turn_index must be a positive integer");
         ex.turn_index = it->get<int>();
      }
      if (ex.prev_sql.has_value() != (ex.turn_index > 1))
         throw Error(ErrorKind::Format,
                     "corpus entry " + std::to_string(i) + ": prev_query must be present exactly when turn_index > 1");
      if (auto it = entry.find("provenance"); it != entry.end() && it->is_string()) {
         const auto p = it->get<std::string>();
         if (p == "original") ex.provenance = Provenance::Original;
         else if (p == "synthesized") ex.provenance = Provenance::Synthesized;
         else throw Error(ErrorKind::Format, "corpus entry " + std::to_string(i) + ": unknown provenance '" + p + "'");
      }
      out.push_back(std::move(ex));
   }
   return out;
}

std::vector<CorpusExample> load_corpus(const std::filesystem::path& file) {
   return parse_corpus(read_json_file(file));
}

nlohmann::json corpus_to_json(const std::vector<CorpusExample>& examples) {
   nlohmann::json out = nlohmann::json::array();
   for (const auto& ex : examples) {
      nlohmann::json entry{{"db_id", ex.db_id}, {"question", ex.utterance}, {"query", ex.gold_sql}};
      if (ex.prev_sql) entry["prev_query"] = *ex.prev_sql;
      entry["turn_index"] = ex.turn_index;
      if (ex.provenance) entry["provenance"] = *ex.provenance == Provenance::Original ? "original" : "synthesized";
      out.push_back(std::move(entry));
   }
   return out;
}

void write_corpus(const std::filesystem::path& file, const std::vector<CorpusExample>& examples) {
   write_json_file(file, corpus_to_json(examples));
}

std::string TurnContext::rendered_input() const {
   if (!prev_query) return utterance;
   return "[PREV] " + *prev_query + " [UTT] " + utterance;
}

nlohmann::json read_json_file(const std::filesystem::path& file) {
   std::ifstream in(file);
   if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());
   try {
      return nlohmann::json::parse(in);
   } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Format, file.string() + " is not valid JSON: " + e.what());
   }
}

void write_json_file(const std::filesystem::path& file, const nlohmann::json& value) {
   if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
   std::ofstream out(file);
   if (!out) throw Error(ErrorKind::Io, "cannot write " + file.string());
   out << value.dump(2) << '\n';
}

} // namespace cyclesql
