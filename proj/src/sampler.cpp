#include "cyclesql/sampler.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "cyclesql/error.hpp"

namespace cyclesql {

nlohmann::json SeedTrace::to_json() const {
   nlohmann::json cols = nlohmann::json::object();
   for (const auto& [slot, column] : columns) cols[slot] = column;
   return {{"seed", seed}, {"attempt", attempt}, {"template", template_text}, {"columns", cols}, {"values", values}};
}

nlohmann::json SampledQuery::to_json() const {
   nlohmann::json j = {{"db_id", env_id}, {"sql", sql}, {"template", tpl.text()}};
   if (prev_sql) j["prev_sql"] = *prev_sql;
   j["seed_trace"] = trace.to_json();
   return j;
}

namespace {

using TypeCounts = std::array<int, kSlotTypeCount>;

TypeCounts column_type_counts(const DatabaseEnv& env) {
   TypeCounts counts{};
   for (const auto& t : env.tables)
      for (const auto& c : t.columns) ++counts[static_cast<std::size_t>(slot_type_of(c))];
   return counts;
}

bool fits(const TypeCounts& available, std::size_t table_count, const CoarseTemplate& tpl) {
   for (std::size_t i = 0; i < available.size(); ++i)
      if (tpl.slot_counts()[i] > available[i]) return false;
   return static_cast<std::size_t>(tpl.join_arity()) <= table_count;
}

FillablePredicate fillable_in(const DatabaseEnv& env) {
   return [counts = column_type_counts(env), tables = env.tables.size()](const CoarseTemplate& tpl) {
      return fits(counts, tables, tpl);
   };
}

bool blocks_connected(const DatabaseEnv& env, const CoarseTemplate& tpl, const ColumnAssignment& assignment) {
   for (const auto& block : tpl.block_slots()) {
      std::set<int> tables;
      for (const auto& slot : block) tables.insert(assignment.at(slot).table_index);
      if (tables.size() < 2) continue;
      try {
         fk_join_path(env, tables);
      } catch (const Error& e) {
         if (e.kind() == ErrorKind::NoJoinPath) return false;
         throw;
      }
   }
   return true;
}

std::string qualified(const DatabaseEnv& env, const ColumnRef& c) {
   return env.tables[static_cast<std::size_t>(c.table_index)].name + "." + c.name;
}

Literal literal_of(const Cell& cell) {
   if (cell.kind == Cell::Kind::Number) return Literal{Literal::Kind::Number, cell.sql_literal(), LogicalType::Number, {}};
   return Literal{Literal::Kind::String, cell.text, LogicalType::Text, {}};
}

struct AttemptStats {
   int no_join_path = 0;
   int empty_column = 0;
   int assignment = 0;
   int execution = 0;
   int empty_result = 0;
   int template_mismatch = 0;

   std::string describe() const {
      return "no_join_path=" + std::to_string(no_join_path) + " empty_column=" + std::to_string(empty_column) +
             " assignment=" + std::to_string(assignment) + " execution=" + std::to_string(execution) +
             " empty_result=" + std::to_string(empty_result) + " template_mismatch=" + std::to_string(template_mismatch);
   }
};

template <typename DrawTemplate>
SampledQuery sample_with(const DatabaseEnv& env, Database& db, Rng& rng, const SamplerConfig& cfg, DrawTemplate draw) {
   AttemptStats stats;
   const CoarseTemplate* drawn = nullptr;
   int fills_left = 0;
   for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
      if (fills_left == 0) {
         drawn = &draw();
         fills_left = std::max(cfg.fills_per_template, 1);
      }
      --fills_left;
      const CoarseTemplate& tpl = *drawn;
      TemplateBinding binding;
      try {
         binding.columns = assign_columns(env, tpl, rng, cfg.assignment_retries);
      } catch (const Error& e) {
         if (e.kind() != ErrorKind::NoJoinPath) throw;
         ++stats.no_join_path;
         fills_left = 0;
         continue;
      }
      try {
         binding.values = fill_values(env, db, tpl, binding.columns, rng);
      } catch (const Error& e) {
         if (e.kind() != ErrorKind::EmptyColumn) throw;
         ++stats.empty_column;
         continue;
      }
      binding.block_tables.assign(tpl.block_slots().size(), -1);
      for (std::size_t b = 0; b < tpl.block_slots().size(); ++b)
         if (tpl.block_slots()[b].empty()) binding.block_tables[b] = static_cast<int>(rng.index(env.tables.size()));

      SqlAst ast;
      std::string sql;
      try {
         ast = from_coarse(tpl, binding, env);
         sql = render(ast, env);
      } catch (const Error& e) {
         if (e.kind() != ErrorKind::Assignment && e.kind() != ErrorKind::NoJoinPath) throw;
         ++stats.assignment;
         continue;
      }
      try {
         if (db.execute(sql, cfg.timeout).empty()) {
            ++stats.empty_result;
            continue;
         }
      } catch (const Error& e) {
         if (e.kind() != ErrorKind::Execution && e.kind() != ErrorKind::Timeout) throw;
         ++stats.execution;
         continue;
      }
      // Re-extraction can differ when a filled condition looks like a join
      // predicate; such samples would misreport their template.
      try {
         if (to_coarse(parse_sql(sql, env), env).text() != tpl.text()) {
            ++stats.template_mismatch;
            continue;
         }
      } catch (const Error&) {
         ++stats.template_mismatch;
         continue;
      }

      SampledQuery out;
      out.env_id = env.db_id;
      out.ast = std::move(ast);
      out.sql = std::move(sql);
      out.tpl = tpl;
      out.trace.attempt = attempt;
      out.trace.template_text = tpl.text();
      for (const auto& [slot, column] : binding.columns) out.trace.columns.emplace_back(slot.name(), qualified(env, column));
      for (const auto& v : binding.values)
         out.trace.values.push_back(v.kind == Literal::Kind::String ? Cell::of(v.text).sql_literal() : v.text);
      return out;
   }
   throw Error(ErrorKind::SamplingExhausted, "no valid query in '" + env.db_id + "' after " +
                                                std::to_string(cfg.max_attempts) + " attempts (" + stats.describe() + ")");
}

} // namespace

bool can_fill(const DatabaseEnv& env, const CoarseTemplate& tpl) {
   return fits(column_type_counts(env), env.tables.size(), tpl);
}

ColumnAssignment assign_columns(const DatabaseEnv& env, const CoarseTemplate& tpl, Rng& rng, int retries) {
   std::array<std::vector<ColumnRef>, kSlotTypeCount> by_type;
   for (const auto& t : env.tables)
      for (const auto& c : t.columns) by_type[static_cast<std::size_t>(slot_type_of(c))].push_back(c);
   for (std::size_t i = 0; i < by_type.size(); ++i)
      if (static_cast<std::size_t>(tpl.slot_counts()[i]) > by_type[i].size())
         throw Error(ErrorKind::Assignment, "'" + env.db_id + "' has too few " + std::string(to_string(static_cast<SlotType>(i))) +
                                               " columns for '" + tpl.text() + "'");

   for (int attempt = 0; attempt < std::max(retries, 1); ++attempt) {
      ColumnAssignment assignment;
      for (std::size_t i = 0; i < by_type.size(); ++i) {
         const int needed = tpl.slot_counts()[i];
         if (needed == 0) continue;
         // Partial Fisher-Yates: the first `needed` positions become a uniform ordered draw.
         std::vector<ColumnRef> pool = by_type[i];
         for (int k = 0; k < needed; ++k) {
            const std::size_t j = static_cast<std::size_t>(k) + rng.index(pool.size() - static_cast<std::size_t>(k));
            std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
            assignment.emplace(SlotId{static_cast<SlotType>(i), k + 1}, pool[static_cast<std::size_t>(k)]);
         }
      }
      if (blocks_connected(env, tpl, assignment)) return assignment;
   }
   throw Error(ErrorKind::NoJoinPath, "no FK-connected column assignment for '" + tpl.text() + "' in '" + env.db_id +
                                         "' after " + std::to_string(retries) + " draws");
}

std::vector<Literal> fill_values(const DatabaseEnv& env, Database& db, const CoarseTemplate& tpl,
                                 const ColumnAssignment& assignment, Rng& rng) {
   std::vector<Literal> values;
   values.reserve(tpl.value_slots().size());
   for (const auto& slot : tpl.value_slots()) {
      if (!slot.bound) {
         values.push_back(Literal{Literal::Kind::Number, std::to_string(rng.integer(1, 5)), LogicalType::Number, {}});
         continue;
      }
      const ColumnRef& column = assignment.at(*slot.bound);
      const auto& pool = db.distinct_values(env, column);
      if (pool.empty())
         throw Error(ErrorKind::EmptyColumn, "column '" + qualified(env, column) + "' has no non-null values");
      values.push_back(literal_of(pool[rng.index(pool.size())]));
   }
   return values;
}

SampledQuery sample_query(const DatabaseEnv& env, Database& db, const TemplateDistribution& dist, Rng& rng,
                          const SamplerConfig& cfg) {
   const auto fillable = fillable_in(env);
   return sample_with(env, db, rng, cfg, [&]() -> const CoarseTemplate& { return sample_template(dist, fillable, rng); });
}

SampledQuery sample_next_query(const DatabaseEnv& env, Database& db, const TemplateDistribution& dist,
                               const SampledQuery& prev, Rng& rng, const SamplerConfig& cfg) {
   const auto fillable = fillable_in(env);
   SampledQuery out = sample_with(env, db, rng, cfg, [&]() -> const CoarseTemplate& {
      return sample_template_conditional(dist, prev.tpl, fillable, rng);
   });
   out.prev_ast = prev.ast;
   out.prev_sql = prev.sql;
   return out;
}

std::vector<SampledQuery> sample_turn_sequence(const DatabaseEnv& env, Database& db, const TemplateDistribution& dist,
                                               Rng& rng, int turns, const SamplerConfig& cfg) {
   if (turns < 1) throw Error(ErrorKind::Domain, "a turn sequence needs at least one turn");
   std::vector<SampledQuery> out;
   out.push_back(sample_query(env, db, dist, rng, cfg));
   for (int t = 1; t < turns; ++t) out.push_back(sample_next_query(env, db, dist, out.back(), rng, cfg));
   return out;
}

std::vector<SampledQuery> sample_uniform_env(std::span<const DatabaseEnv* const> envs, ConnectionCache& connections,
                                             const TemplateDistribution& dist, Rng& rng, int turns,
                                             const SamplerConfig& cfg) {
   if (envs.empty()) throw Error(ErrorKind::Domain, "no environments to sample from");
   std::vector<const DatabaseEnv*> candidates(envs.begin(), envs.end());
   while (!candidates.empty()) {
      const std::size_t i = rng.index(candidates.size());
      try {
         return sample_turn_sequence(*candidates[i], connections.open(*candidates[i]), dist, rng, turns, cfg);
      } catch (const Error& e) {
         if (e.kind() != ErrorKind::UnfillableEnvironment) throw;
         candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(i));
      }
   }
   throw Error(ErrorKind::UnfillableEnvironment, "no environment can fill any template of the distribution");
}

} // namespace cyclesql
