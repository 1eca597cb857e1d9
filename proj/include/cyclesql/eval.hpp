#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cyclesql/canon.hpp"
#include "cyclesql/corpus.hpp"
#include "cyclesql/exec.hpp"
#include "cyclesql/fuzz.hpp"
#include "cyclesql/schema.hpp"

namespace cyclesql {

enum class Difficulty { Easy, Medium, Hard, Extra };

std::string_view to_string(Difficulty difficulty);

/// Equal value-stripped canonical renderings. Unparseable predictions do not
/// match; an unparseable gold query propagates its parse error.
bool em_match(std::string_view gold, std::string_view pred, const DatabaseEnv& env);

/// Rubric over the whole query tree. components: presence of group by, order
/// by, limit, set operation, nested subquery, having. conditions: where and
/// having predicates. aggregates: aggregated select items.
///   extra:  components >= 3, or components >= 2 and conditions >= 3
///   hard:   components == 2, or a nested subquery
///   easy:   components <= 1, conditions <= 1, aggregates <= 1
///   medium: otherwise
Difficulty classify_difficulty(const SqlAst& ast);

struct MetricCounts {
   int count = 0;
   int em = 0;
   int ex = 0;
   int fx = 0;

   double em_rate() const { return count ? static_cast<double>(em) / count : 0.0; }
   double ex_rate() const { return count ? static_cast<double>(ex) / count : 0.0; }
   double fx_rate() const { return count ? static_cast<double>(fx) / count : 0.0; }
   nlohmann::json to_json(bool with_fx) const;
};

struct EvalConfig {
   FuzzConfig fuzz;
   /// False disables the FX column (e.g. --fuzz-instances 0).
   bool fuzz_enabled = true;
   EqualitySemantics semantics = EqualitySemantics::Bag;
   int jobs = 1;
   std::chrono::milliseconds timeout = kDefaultTimeout;
};

struct ExampleVerdict {
   std::size_t index = 0;
   std::string db_id;
   int turn_index = 1;
   std::optional<Difficulty> difficulty;
   bool em = false;
   bool ex = false;
   bool fx = false;
   /// Fuzz instances on which gold failed.
   int fragile_instances = 0;
   /// Set when the gold query could not be parsed or executed; such examples
   /// are excluded from every metric.
   std::optional<std::string> gold_error;

   nlohmann::json to_json(bool with_fx) const;
};

struct EvalReport {
   MetricCounts overall;
   std::map<Difficulty, MetricCounts> by_difficulty;
   std::map<std::string, MetricCounts> by_turn;
   std::vector<ExampleVerdict> examples;
   bool fuzz_enabled = true;
   nlohmann::json config;

   nlohmann::json to_json() const;
   /// Breakdown tables by difficulty and by turn.
   std::string render_table() const;
};

/// "1", "2", "3" or "4+".
std::string turn_bucket(int turn_index);

/// One SQL string per line.
std::vector<std::string> load_predictions(const std::filesystem::path& file);

/// Scores aligned predictions. Errors: Alignment on a length mismatch.
EvalReport evaluate(std::span<const CorpusExample> gold, std::span<const std::string> predictions, const SchemaIndex& envs,
                    const EvalConfig& cfg);

} // namespace cyclesql
