#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyclesql/canon.hpp"
#include "cyclesql/distribution.hpp"
#include "cyclesql/exec.hpp"
#include "cyclesql/random.hpp"
#include "cyclesql/schema.hpp"

namespace cyclesql {

using ColumnAssignment = std::map<SlotId, ColumnRef>;

struct SamplerConfig {
   int max_attempts = 500;
   /// Column assignments tried per template draw before redrawing the template.
   int assignment_retries = 50;
   /// Failed fillings of one drawn template before a new template is drawn.
   int fills_per_template = 50;
   std::chrono::milliseconds timeout = kDefaultTimeout;
};

/// The decisions that produced a sampled query.
struct SeedTrace {
   /// Seed of the stream the sample was drawn from; set by the caller.
   std::uint64_t seed = 0;
   /// 1-based attempt on which sampling succeeded.
   int attempt = 0;
   std::string template_text;
   std::vector<std::pair<std::string, std::string>> columns;
   std::vector<std::string> values;

   nlohmann::json to_json() const;
};

struct SampledQuery {
   std::string env_id;
   SqlAst ast;
   /// Canonical rendering of ast.
   std::string sql;
   CoarseTemplate tpl;
   std::optional<SqlAst> prev_ast;
   std::optional<std::string> prev_sql;
   SeedTrace trace;

   /// {db_id, sql, template, prev_sql?, seed_trace}
   nlohmann::json to_json() const;
};

/// Enough distinct columns for every slot type and at least join_arity tables.
bool can_fill(const DatabaseEnv& env, const CoarseTemplate& tpl);

/// Uniform injective, type-exact assignment whose columns are FK-connected
/// within every query block. Errors: NoJoinPath after `retries` draws.
ColumnAssignment assign_columns(const DatabaseEnv& env, const CoarseTemplate& tpl, Rng& rng, int retries = 50);

/// One literal per value slot, drawn uniformly from the distinct non-null
/// values stored in the bound column. Unbound slots (count ( * ) > val) take
/// a uniform integer in [1, 5]. Errors: EmptyColumn.
std::vector<Literal> fill_values(const DatabaseEnv& env, Database& db, const CoarseTemplate& tpl,
                                 const ColumnAssignment& assignment, Rng& rng);

/// Draws template, columns and values until the instantiated query executes
/// with a non-empty result. A drawn template is refilled up to
/// fills_per_template times before a new one is drawn, so rejection barely
/// skews template frequencies; a template with no connected column
/// assignment is redrawn at once. Errors: SamplingExhausted, UnfillableEnvironment.
SampledQuery sample_query(const DatabaseEnv& env, Database& db, const TemplateDistribution& dist, Rng& rng,
                          const SamplerConfig& cfg = {});

/// As sample_query with the template drawn conditionally on `prev`.
SampledQuery sample_next_query(const DatabaseEnv& env, Database& db, const TemplateDistribution& dist,
                               const SampledQuery& prev, Rng& rng, const SamplerConfig& cfg = {});

/// First turn from the unigram, later turns conditioned on the previous template.
std::vector<SampledQuery> sample_turn_sequence(const DatabaseEnv& env, Database& db, const TemplateDistribution& dist,
                                               Rng& rng, int turns, const SamplerConfig& cfg = {});

/// Uniformly picks an environment per attempt (environments that cannot fill
/// any template are skipped), then samples in it.
std::vector<SampledQuery> sample_uniform_env(std::span<const DatabaseEnv* const> envs, ConnectionCache& connections,
                                             const TemplateDistribution& dist, Rng& rng, int turns,
                                             const SamplerConfig& cfg = {});

} // namespace cyclesql
