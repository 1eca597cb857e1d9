#include "cyclesql/eval.hpp"

#include <cstdio>
#include <fstream>
#include <memory>

#include "cyclesql/error.hpp"
#include "cyclesql/parallel.hpp"

namespace cyclesql {

std::string_view to_string(Difficulty difficulty) {
   switch (difficulty) {
      case Difficulty::Easy: return "easy";
      case Difficulty::Medium: return "medium";
      case Difficulty::Hard: return "hard";
      case Difficulty::Extra: return "extra";
   }
   return "easy";
}

bool em_match(std::string_view gold, std::string_view pred, const DatabaseEnv& env) {
   const std::string gold_key = em_key(gold, env);
   try {
      return em_key(pred, env) == gold_key;
   } catch (const Error&) {
      return false;
   }
}

namespace {

struct Shape {
   bool group_by = false;
   bool order_by = false;
   bool limit = false;
   bool set_op = false;
   bool nested = false;
   bool having = false;
   int conditions = 0;
   int aggregates = 0;

   int components() const { return group_by + order_by + limit + set_op + nested + having; }
};

void measure(const Query& q, Shape& s) {
   s.group_by |= !q.group_by.empty();
   s.order_by |= !q.order_by.empty();
   s.limit |= q.limit.has_value();
   s.having |= !q.having.empty();
   s.conditions += static_cast<int>(q.where.predicates.size() + q.having.predicates.size());
   for (const auto& v : q.select) s.aggregates += (v.left.agg != AggOp::None) + (v.op != ArithOp::None && v.right.agg != AggOp::None);
   for (const Condition* c : {&q.where, &q.having})
      for (const auto& p : c->predicates)
         for (const Operand* op : {&p.right, p.upper ? &*p.upper : nullptr})
            if (op)
               if (const auto* sub = std::get_if<Box<Query>>(op)) {
                  s.nested = true;
                  measure(**sub, s);
               }
   if (q.set_op != SetOp::None && q.set_rhs) {
      s.set_op = true;
      measure(*q.set_rhs, s);
   }
}

} // namespace

Difficulty classify_difficulty(const SqlAst& ast) {
   Shape s;
   measure(ast, s);
   const int comps = s.components();
   if (comps >= 3 || (comps >= 2 && s.conditions >= 3)) return Difficulty::Extra;
   if (comps == 2 || s.nested) return Difficulty::Hard;
   if (comps <= 1 && s.conditions <= 1 && s.aggregates <= 1) return Difficulty::Easy;
   return Difficulty::Medium;
}

nlohmann::json MetricCounts::to_json(bool with_fx) const {
   nlohmann::json j = {{"count", count}, {"em", em_rate()}, {"ex", ex_rate()}, {"em_count", em}, {"ex_count", ex}};
   j["fx"] = with_fx ? nlohmann::json(fx_rate()) : nlohmann::json(nullptr);
   j["fx_count"] = with_fx ? nlohmann::json(fx) : nlohmann::json(nullptr);
   return j;
}

nlohmann::json ExampleVerdict::to_json(bool with_fx) const {
   nlohmann::json j = {{"index", index}, {"db_id", db_id}, {"turn_index", turn_index}};
   j["difficulty"] = difficulty ? nlohmann::json(std::string(to_string(*difficulty))) : nlohmann::json(nullptr);
   j["em"] = em;
   j["ex"] = ex;
   j["fx"] = with_fx ? nlohmann::json(fx) : nlohmann::json(nullptr);
   j["fragile_instances"] = fragile_instances;
   j["gold_error"] = gold_error ? nlohmann::json(*gold_error) : nlohmann::json(nullptr);
   return j;
}

nlohmann::json EvalReport::to_json() const {
   nlohmann::json diff = nlohmann::json::object();
   for (const auto& [d, c] : by_difficulty) diff[std::string(to_string(d))] = c.to_json(fuzz_enabled);
   nlohmann::json turn = nlohmann::json::object();
   for (const auto& [t, c] : by_turn) turn[t] = c.to_json(fuzz_enabled);
   nlohmann::json errors = nlohmann::json::array();
   for (const auto& v : examples)
      if (v.gold_error) errors.push_back({{"index", v.index}, {"db_id", v.db_id}, {"error", *v.gold_error}});
   return {{"overall", overall.to_json(fuzz_enabled)},
           {"by_difficulty", diff},
           {"by_turn", turn},
           {"gold_errors", errors},
           {"config", config}};
}

std::string EvalReport::render_table() const {
   std::string out;
   auto line = [&](const std::string& label, const MetricCounts& c) {
      char buf[128];
      if (fuzz_enabled)
         std::snprintf(buf, sizeof buf, "%-10s %7d %7.3f %7.3f %7.3f\n", label.c_str(), c.count, c.em_rate(), c.ex_rate(), c.fx_rate());
      else
         std::snprintf(buf, sizeof buf, "%-10s %7d %7.3f %7.3f %7s\n", label.c_str(), c.count, c.em_rate(), c.ex_rate(), "-");
      out += buf;
   };
   char header[128];
   std::snprintf(header, sizeof header, "%-10s %7s %7s %7s %7s\n", "", "count", "EM", "EX", "FX");
   out += header;
   for (auto d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard, Difficulty::Extra}) {
      auto it = by_difficulty.find(d);
      line(std::string(to_string(d)), it == by_difficulty.end() ? MetricCounts{} : it->second);
   }
   line("all", overall);
   out += "\n";
   out += header;
   for (const char* t : {"1", "2", "3", "4+"}) {
      auto it = by_turn.find(t);
      line(std::string("turn ") + t, it == by_turn.end() ? MetricCounts{} : it->second);
   }
   return out;
}

std::string turn_bucket(int turn_index) { return turn_index >= 4 ? "4+" : std::to_string(std::max(turn_index, 1)); }

std::vector<std::string> load_predictions(const std::filesystem::path& file) {
   std::ifstream in(file);
   if (!in) throw Error(ErrorKind::Io, "cannot read predictions '" + file.string() + "'");
   std::vector<std::string> lines;
   std::string line;
   while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
   }
   return lines;
}

EvalReport evaluate(std::span<const CorpusExample> gold, std::span<const std::string> predictions, const SchemaIndex& envs,
                    const EvalConfig& cfg) {
   if (gold.size() != predictions.size())
      throw Error(ErrorKind::Alignment, "gold has " + std::to_string(gold.size()) + " examples but there are " +
                                           std::to_string(predictions.size()) + " predictions");
   EvalReport report;
   report.fuzz_enabled = cfg.fuzz_enabled;
   report.examples.resize(gold.size());
   std::unique_ptr<FuzzInstanceCache> fuzz;
   if (cfg.fuzz_enabled) fuzz = std::make_unique<FuzzInstanceCache>(cfg.fuzz);
   std::vector<ConnectionCache> caches(static_cast<std::size_t>(std::max(cfg.jobs, 1)));

   parallel_for(gold.size(), cfg.jobs, [&](std::size_t i, int worker) {
      const CorpusExample& g = gold[i];
      const std::string& pred = predictions[i];
      ExampleVerdict& v = report.examples[i];
      v.index = i;
      v.db_id = g.db_id;
      v.turn_index = g.turn_index;
      const DatabaseEnv* env = nullptr;
      Denotation expected;
      try {
         env = &lookup_env(envs, g.db_id);
         v.difficulty = classify_difficulty(parse_sql(g.gold_sql, *env));
         expected = caches[static_cast<std::size_t>(worker)].open(*env).execute(g.gold_sql, cfg.timeout);
      } catch (const Error& e) {
         v.gold_error = e.what();
         return;
      }
      v.em = em_match(g.gold_sql, pred, *env);
      try {
         v.ex = denotations_equal(expected, caches[static_cast<std::size_t>(worker)].open(*env).execute(pred, cfg.timeout),
                                  cfg.semantics);
      } catch (const Error&) {
         v.ex = false;
      }
      if (fuzz) {
         const FuzzResult r = fuzz_match(g.gold_sql, pred, *env, *fuzz);
         v.fragile_instances = r.fragile_count();
         // The original database is one more conjunct.
         v.fx = v.ex && r.match;
      }
   });

   for (const auto& v : report.examples) {
      if (v.gold_error) continue;
      for (MetricCounts* c : {&report.overall, &report.by_difficulty[*v.difficulty], &report.by_turn[turn_bucket(v.turn_index)]}) {
         ++c->count;
         c->em += v.em;
         c->ex += v.ex;
         c->fx += v.fx;
      }
   }
   if (cfg.fuzz_enabled && report.overall.fx > report.overall.ex)
      throw Error(ErrorKind::Internal, "FX exceeded EX; fuzz verdicts must be a refinement of execution verdicts");

   report.config = {{"semantics", std::string(to_string(cfg.semantics))},
                    {"fuzz_enabled", cfg.fuzz_enabled},
                    {"fuzz", cfg.fuzz_enabled ? cfg.fuzz.to_json() : nlohmann::json(nullptr)},
                    {"difficulty_rubric",
                     "components = presence of group by, order by, limit, set op, nested subquery, having; "
                     "extra: components >= 3 or (components >= 2 and conditions >= 3); hard: components == 2 or nested; "
                     "easy: components <= 1, conditions <= 1, aggregates <= 1; medium: otherwise"}};
   return report;
}

} // namespace cyclesql
