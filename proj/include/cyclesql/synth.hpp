#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cyclesql/adapter.hpp"
#include "cyclesql/corpus.hpp"
#include "cyclesql/distribution.hpp"
#include "cyclesql/exec.hpp"
#include "cyclesql/sampler.hpp"

namespace cyclesql {

enum class SynthMode { Adapt, Syntrain };
enum class Consistency { Execution, StringMatch, None };
enum class FailureTag { AdapterError, InvalidPrediction, ExecError, SamplingFailed };

std::string_view to_string(SynthMode mode);
std::string_view to_string(Consistency consistency);
std::string_view to_string(FailureTag tag);
SynthMode synth_mode_from_string(std::string_view name);
Consistency consistency_from_string(std::string_view name);

struct SynthRunConfig {
   SynthMode mode = SynthMode::Adapt;
   Consistency consistency = Consistency::Execution;
   /// Attempts, not kept examples.
   int target_count = 1;
   std::uint64_t seed = 0;
   std::string generator = "builtin:perfect";
   std::string parser = "builtin:perfect";
   int turns = 1;
   int jobs = 1;
   SamplerConfig sampler;
   EqualitySemantics semantics = EqualitySemantics::Bag;

   void validate() const;
   nlohmann::json to_json() const;
};

struct SynthesizedExample {
   std::string env_id;
   int attempt_index = 0;
   int turn_index = 1;
   /// Absent when sampling failed.
   std::optional<SampledQuery> sampled;
   std::string utterance;
   std::optional<std::string> reparsed_sql;
   std::optional<bool> exec_consistent;
   std::optional<bool> em_consistent;
   bool kept = false;
   std::optional<FailureTag> failure;
   std::string failure_detail;

   nlohmann::json to_json() const;
};

struct SynthResult {
   std::vector<SynthesizedExample> examples;
   /// Environments that cannot fill any template of the distribution.
   std::vector<std::string> skipped_envs;

   std::size_t kept_count() const;
   double keep_rate() const;
   std::map<std::string, int> failure_counts() const;
   /// {attempts, kept, keep_rate, failures, skipped_envs, config}
   nlohmann::json summary(const SynthRunConfig& cfg) const;
};

/// Execution: equal denotations on env. StringMatch: identical canonical
/// renderings, values included. None: always true. A q' that fails to
/// execute is inconsistent under Execution.
bool check_consistency(const SqlAst& q, const SqlAst& q_prime, const DatabaseEnv& env, Database& db, Consistency criterion,
                       EqualitySemantics semantics = EqualitySemantics::Bag);

/// Runs cfg.target_count attempts: sample in a uniformly drawn environment,
/// G(q) -> u, F(u) -> q', verify. Attempts with turns > 1 are grouped into
/// sequences that share a database and thread the previous query through.
/// Errors: UnfillableEnvironment when no environment can be used; Adapter
/// when the first 50 attempts all fail in an adapter.
SynthResult synthesize(std::span<const DatabaseEnv* const> envs, const TemplateDistribution& dist, ModelAdapter& parser,
                       ModelAdapter& generator, const SynthRunConfig& cfg);

/// Original examples first, then kept synthesized ones, each tagged with its
/// provenance. With dedup, repeated (query, utterance) pairs are dropped.
std::vector<CorpusExample> build_adaptation_set(std::span<const SynthesizedExample> synthesized,
                                                std::span<const CorpusExample> original, bool dedup = false);

} // namespace cyclesql
