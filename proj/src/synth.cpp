#include "cyclesql/synth.hpp"

#include <algorithm>
#include <set>

#include "cyclesql/error.hpp"
#include "cyclesql/parallel.hpp"

namespace cyclesql {

std::string_view to_string(SynthMode mode) { return mode == SynthMode::Adapt ? "adapt" : "syntrain"; }

std::string_view to_string(Consistency consistency) {
   switch (consistency) {
      case Consistency::Execution: return "execution";
      case Consistency::StringMatch: return "string_match";
      case Consistency::None: return "none";
   }
   return "none";
}

std::string_view to_string(FailureTag tag) {
   switch (tag) {
      case FailureTag::AdapterError: return "adapter_error";
      case FailureTag::InvalidPrediction: return "invalid_prediction";
      case FailureTag::ExecError: return "exec_error";
      case FailureTag::SamplingFailed: return "sampling_failed";
   }
   return "unknown";
}

SynthMode synth_mode_from_string(std::string_view name) {
   if (name == "adapt") return SynthMode::Adapt;
   if (name == "syntrain") return SynthMode::Syntrain;
   throw Error(ErrorKind::Format, "unknown synth mode '" + std::string(name) + "' (expected adapt or syntrain)");
}

Consistency consistency_from_string(std::string_view name) {
   if (name == "execution") return Consistency::Execution;
   if (name == "string_match") return Consistency::StringMatch;
   if (name == "none") return Consistency::None;
   throw Error(ErrorKind::Format, "unknown consistency '" + std::string(name) + "' (expected execution, string_match or none)");
}

void SynthRunConfig::validate() const {
   if (target_count < 1) throw Error(ErrorKind::Domain, "target_count must be at least 1");
   if (turns < 1) throw Error(ErrorKind::Domain, "turns must be at least 1");
}

nlohmann::json SynthRunConfig::to_json() const {
   return {{"mode", std::string(to_string(mode))},
           {"consistency", std::string(to_string(consistency))},
           {"target_count", target_count},
           {"seed", seed},
           {"generator", generator},
           {"parser", parser},
           {"turns", turns},
           {"jobs", jobs},
           {"max_attempts", sampler.max_attempts},
           {"assignment_retries", sampler.assignment_retries},
           {"fills_per_template", sampler.fills_per_template},
           {"semantics", std::string(to_string(semantics))}};
}

nlohmann::json SynthesizedExample::to_json() const {
   auto opt_bool = [](const std::optional<bool>& b) { return b ? nlohmann::json(*b) : nlohmann::json(nullptr); };
   nlohmann::json j = {{"db_id", env_id}, {"attempt", attempt_index}, {"turn_index", turn_index}};
   if (sampled) {
      j["sql"] = sampled->sql;
      j["template"] = sampled->tpl.text();
      j["prev_sql"] = sampled->prev_sql ? nlohmann::json(*sampled->prev_sql) : nlohmann::json(nullptr);
      j["seed_trace"] = sampled->trace.to_json();
   }
   j["utterance"] = utterance;
   j["reparsed_sql"] = reparsed_sql ? nlohmann::json(*reparsed_sql) : nlohmann::json(nullptr);
   j["exec_consistent"] = opt_bool(exec_consistent);
   j["em_consistent"] = opt_bool(em_consistent);
   j["kept"] = kept;
   j["failure"] = failure ? nlohmann::json(std::string(to_string(*failure))) : nlohmann::json(nullptr);
   if (!failure_detail.empty()) j["failure_detail"] = failure_detail;
   return j;
}

std::size_t SynthResult::kept_count() const {
   return static_cast<std::size_t>(std::count_if(examples.begin(), examples.end(), [](const auto& e) { return e.kept; }));
}

double SynthResult::keep_rate() const {
   return examples.empty() ? 0.0 : static_cast<double>(kept_count()) / static_cast<double>(examples.size());
}

std::map<std::string, int> SynthResult::failure_counts() const {
   std::map<std::string, int> counts;
   for (auto tag : {FailureTag::AdapterError, FailureTag::InvalidPrediction, FailureTag::ExecError, FailureTag::SamplingFailed})
      counts[std::string(to_string(tag))] = 0;
   for (const auto& e : examples)
      if (e.failure) ++counts[std::string(to_string(*e.failure))];
   return counts;
}

nlohmann::json SynthResult::summary(const SynthRunConfig& cfg) const {
   return {{"attempts", examples.size()},
           {"kept", kept_count()},
           {"keep_rate", keep_rate()},
           {"failures", failure_counts()},
           {"skipped_envs", skipped_envs},
           {"config", cfg.to_json()}};
}

bool check_consistency(const SqlAst& q, const SqlAst& q_prime, const DatabaseEnv& env, Database& db, Consistency criterion,
                       EqualitySemantics semantics) {
   switch (criterion) {
      case Consistency::None: return true;
      case Consistency::StringMatch: return render(q, env) == render(q_prime, env);
      case Consistency::Execution: {
         const Denotation expected = db.execute(render(q, env));
         try {
            return denotations_equal(expected, db.execute(render(q_prime, env)), semantics);
         } catch (const Error&) {
            return false;
         }
      }
   }
   return false;
}

namespace {

bool adapter_failure(const Error& e) { return e.kind() == ErrorKind::Adapter || e.kind() == ErrorKind::Protocol || e.kind() == ErrorKind::Timeout; }

void run_attempt(SynthesizedExample& ex, const DatabaseEnv& env, Database& db, ModelAdapter& parser, ModelAdapter& generator,
                 const SynthRunConfig& cfg) {
   const SampledQuery& s = *ex.sampled;
   const SqlAst* prev = s.prev_ast ? &*s.prev_ast : nullptr;
   try {
      ex.utterance = generate_utterance(generator, s.ast, env, prev);
      ex.reparsed_sql = predict_sql(parser, ex.utterance, env, prev);
   } catch (const Error& e) {
      if (!adapter_failure(e)) throw;
      ex.failure = FailureTag::AdapterError;
      ex.failure_detail = e.what();
      return;
   }
   SqlAst q_prime;
   try {
      q_prime = parse_sql(*ex.reparsed_sql, env);
   } catch (const Error& e) {
      ex.failure = FailureTag::InvalidPrediction;
      ex.failure_detail = e.what();
      return;
   }
   const std::string canonical_prime = render(q_prime, env);
   ex.em_consistent = canonical_prime == s.sql;
   const Denotation expected = db.execute(s.sql, cfg.sampler.timeout);
   try {
      ex.exec_consistent = denotations_equal(expected, db.execute(canonical_prime, cfg.sampler.timeout), cfg.semantics);
   } catch (const Error& e) {
      ex.exec_consistent = false;
      ex.failure = FailureTag::ExecError;
      ex.failure_detail = e.what();
   }
   switch (cfg.consistency) {
      case Consistency::Execution: ex.kept = *ex.exec_consistent; break;
      case Consistency::StringMatch: ex.kept = *ex.em_consistent; break;
      case Consistency::None: ex.kept = true; break;
   }
}

} // namespace

SynthResult synthesize(std::span<const DatabaseEnv* const> envs, const TemplateDistribution& dist, ModelAdapter& parser,
                       ModelAdapter& generator, const SynthRunConfig& cfg) {
   cfg.validate();
   SynthResult result;
   std::vector<const DatabaseEnv*> usable;
   for (const DatabaseEnv* env : envs) {
      const bool any = std::any_of(dist.unigram().begin(), dist.unigram().end(),
                                   [&](const auto& kv) { return can_fill(*env, kv.second.tpl); });
      if (any) usable.push_back(env);
      else result.skipped_envs.push_back(env->db_id);
   }
   if (usable.empty()) throw Error(ErrorKind::UnfillableEnvironment, "no environment can fill any template of the distribution");
   std::set<std::string> allowed;
   for (const DatabaseEnv* env : envs) allowed.insert(env->db_id);

   const auto attempts = static_cast<std::size_t>(cfg.target_count);
   const auto turns = static_cast<std::size_t>(cfg.turns);
   const std::size_t sequences = (attempts + turns - 1) / turns;
   result.examples.resize(attempts);
   std::vector<ConnectionCache> caches(static_cast<std::size_t>(std::max(cfg.jobs, 1)));

   auto run_sequence = [&](std::size_t seq, int worker) {
      const std::size_t first = seq * turns;
      const std::size_t count = std::min(turns, attempts - first);
      const std::uint64_t seed = derive_seed(cfg.seed, seq);
      Rng rng(seed);
      const DatabaseEnv& env = *usable[rng.index(usable.size())];
      Database& db = caches[static_cast<std::size_t>(worker)].open(env);
      for (std::size_t k = 0; k < count; ++k) {
         auto& ex = result.examples[first + k];
         ex.env_id = env.db_id;
         ex.attempt_index = static_cast<int>(first + k);
         ex.turn_index = static_cast<int>(k) + 1;
      }
      std::vector<SampledQuery> sampled;
      try {
         sampled = sample_turn_sequence(env, db, dist, rng, static_cast<int>(count), cfg.sampler);
      } catch (const Error& e) {
         if (e.kind() != ErrorKind::SamplingExhausted) throw;
         for (std::size_t k = 0; k < count; ++k) {
            result.examples[first + k].failure = FailureTag::SamplingFailed;
            result.examples[first + k].failure_detail = e.what();
         }
         return;
      }
      for (std::size_t k = 0; k < count; ++k) {
         auto& ex = result.examples[first + k];
         sampled[k].trace.seed = seed;
         ex.sampled = std::move(sampled[k]);
         if (!allowed.contains(ex.env_id)) throw Error(ErrorKind::Internal, "sampled outside the configured environments");
         run_attempt(ex, env, db, parser, generator, cfg);
      }
   };

   // The first 50 attempts run on their own so a dead adapter aborts early.
   const std::size_t probe_sequences = std::min(sequences, (std::min<std::size_t>(attempts, 50) + turns - 1) / turns);
   parallel_for(probe_sequences, cfg.jobs, [&](std::size_t seq, int worker) { run_sequence(seq, worker); });
   const std::size_t probe_attempts = std::min(attempts, probe_sequences * turns);
   const bool all_adapter_failures =
      std::all_of(result.examples.begin(), result.examples.begin() + static_cast<std::ptrdiff_t>(probe_attempts),
                  [](const SynthesizedExample& e) { return e.failure == FailureTag::AdapterError; });
   if (probe_attempts > 0 && all_adapter_failures)
      throw Error(ErrorKind::Adapter, "all of the first " + std::to_string(probe_attempts) +
                                         " attempts failed in an adapter; last error: " + result.examples[probe_attempts - 1].failure_detail);
   parallel_for(sequences - probe_sequences, cfg.jobs,
                [&](std::size_t seq, int worker) { run_sequence(probe_sequences + seq, worker); });
   return result;
}

std::vector<CorpusExample> build_adaptation_set(std::span<const SynthesizedExample> synthesized,
                                                std::span<const CorpusExample> original, bool dedup) {
   std::vector<CorpusExample> out;
   out.reserve(original.size() + synthesized.size());
   for (const auto& ex : original) {
      out.push_back(ex);
      out.back().provenance = Provenance::Original;
   }
   std::set<std::pair<std::string, std::string>> seen;
   for (const auto& ex : synthesized) {
      if (!ex.kept || !ex.sampled) continue;
      if (dedup && !seen.emplace(ex.sampled->sql, ex.utterance).second) continue;
      CorpusExample c;
      c.db_id = ex.env_id;
      c.utterance = ex.utterance;
      c.gold_sql = ex.sampled->sql;
      c.prev_sql = ex.sampled->prev_sql;
      c.turn_index = ex.sampled->prev_sql ? ex.turn_index : 1;
      c.provenance = Provenance::Synthesized;
      out.push_back(std::move(c));
   }
   return out;
}

} // namespace cyclesql
