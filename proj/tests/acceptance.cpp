// Acceptance runner: one line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cyclesql/error.hpp"
#include "cyclesql/builtin_adapters.hpp"
#include "cyclesql/canon.hpp"
#include "cyclesql/distribution.hpp"
#include "cyclesql/eval.hpp"
#include "cyclesql/exec.hpp"
#include "cyclesql/fuzz.hpp"
#include "cyclesql/random.hpp"
#include "cyclesql/sampler.hpp"
#include "cyclesql/synth.hpp"
#include "support.hpp"
#include "variety_oracle.hpp"

using namespace cyclesql;
using namespace cyclesql::test;
namespace fs = std::filesystem;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
   Outcome outcome;
   std::string detail;
};

Verdict fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Verdict check(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
   char buf[256];
   std::snprintf(buf, sizeof buf, f, a, b, c);
   return buf;
}

const TemplateDistribution& fixture_dist() {
   static const auto dist = fit(train_corpus(), fixtures());
   return dist;
}

SynthResult synth_run(const std::string& gen, const std::string& par, Consistency c, int n, std::uint64_t seed) {
   SynthRunConfig cfg;
   cfg.consistency = c;
   cfg.target_count = n;
   cfg.seed = seed;
   auto g = make_builtin(gen, {kAdapterTimeout, derive_seed(seed, 0x67656e65)});
   auto f = make_builtin(par, {kAdapterTimeout, derive_seed(seed, 0x70617273)});
   const std::vector<const DatabaseEnv*> envs = {&school()};
   return synthesize(envs, fixture_dist(), *f, *g, cfg);
}

Verdict canonical_golden() {
   const auto& env = school();
   const std::string text =
      to_coarse(parse_sql("SELECT T1.id, T2.name FROM Students AS T1 JOIN Schools AS T2 WHERE T1.school = T2.id AND "
                          "T2.name = 'Highland Secondary'",
                          env),
                env)
         .text();
   return check(text == "select key1 , text1 where text2 = val", "got \"" + text + "\"");
}

Verdict discard_rule() {
   const auto& env = school();
   Database db(env.store_path);
   Rng rng(2024);
   int ok = 0;
   for (int i = 0; i < 1000; ++i) {
      const auto q = sample_query(env, db, fixture_dist(), rng);
      try {
         if (!execute(q.sql, env).empty()) ++ok;
      } catch (const Error&) {
      }
   }
   return check(ok == 1000, std::to_string(ok) + "/1000 non-empty on re-execution");
}

Verdict template_frequencies() {
   const auto& dist = fixture_dist();
   const auto& env = school();
   Database db(env.store_path);
   Rng rng(31);
   const int n = 10000;
   std::map<std::string, int> hits;
   for (int i = 0; i < n; ++i) ++hits[sample_query(env, db, dist, rng).tpl.text()];
   double worst = 0;
   for (const auto& [text, e] : dist.unigram())
      worst = std::max(worst, std::abs(hits[text] / double(n) - double(e.count) / double(dist.total())));
   return check(worst <= 0.02, fmt("max |freq - fitted| = %.4f over full samples (tolerance 0.02, n = 10000)", worst));
}

Verdict keep_rates() {
   const int n = 1000;
   const auto perfect = synth_run("perfect", "perfect", Consistency::Execution, n, 1);
   const auto corrupting = synth_run("perfect", "corrupting", Consistency::Execution, n, 1);
   const auto lossy = synth_run("lossy", "perfect", Consistency::Execution, n, 1);
   int reverify_failures = 0;
   for (const auto* r : {&perfect, &corrupting, &lossy})
      for (const auto& e : r->examples) {
         if (!e.kept) continue;
         try {
            if (!denotations_equal(execute(e.sampled->sql, school()), execute(*e.reparsed_sql, school()))) ++reverify_failures;
         } catch (const Error&) {
            ++reverify_failures;
         }
      }
   const double p = perfect.keep_rate(), c = corrupting.keep_rate(), l = lossy.keep_rate();
   const bool ok = p == 1.0 && c > 0.3 && c < 0.7 && l < 0.2 && reverify_failures == 0;
   return check(ok, fmt("perfect %.3f, corrupting %.3f, lossy %.3f", p, c, l) + ", re-verify failures " +
                       std::to_string(reverify_failures));
}

Verdict variant_ordering() {
   auto kept = [](const SynthResult& r) {
      std::set<int> out;
      for (const auto& e : r.examples)
         if (e.kept) out.insert(e.attempt_index);
      return out;
   };
   const auto none = kept(synth_run("perfect", "corrupting", Consistency::None, 1000, 7));
   const auto exec = kept(synth_run("perfect", "corrupting", Consistency::Execution, 1000, 7));
   const auto em = kept(synth_run("perfect", "corrupting", Consistency::StringMatch, 1000, 7));
   const bool ok = std::includes(none.begin(), none.end(), exec.begin(), exec.end()) &&
                   std::includes(exec.begin(), exec.end(), em.begin(), em.end());
   return check(ok, "kept none " + std::to_string(none.size()) + ", execution " + std::to_string(exec.size()) +
                       ", string_match " + std::to_string(em.size()));
}

Verdict fx_exposes_spurious() {
   EvalConfig cfg;
   cfg.fuzz.scratch = scratch_dir("accept-fx");
   const std::vector<CorpusExample> gold = {{"counts", "how many ones are there", "select count ( * ) from t where x = 1", std::nullopt, 1, {}}};
   const auto report = evaluate(gold, std::vector<std::string>{"select 2"}, fixtures(), cfg);
   const auto& v = report.examples.at(0);
   // FX <= EX over a run with mixed predictions.
   std::vector<std::string> mixed;
   for (std::size_t i = 0; i < train_corpus().size(); ++i) mixed.push_back(i % 2 ? train_corpus()[i].gold_sql : "select 1");
   const auto broad = evaluate(train_corpus(), mixed, fixtures(), cfg);
   fs::remove_all(cfg.fuzz.scratch);
   const bool ok = v.ex && !v.fx && broad.overall.fx <= broad.overall.ex;
   return check(ok, std::string("EX ") + (v.ex ? "true" : "false") + ", FX " + (v.fx ? "true" : "false") + " at " +
                       std::to_string(cfg.fuzz.instances) + " instances; FX " + std::to_string(broad.overall.fx) +
                       " <= EX " + std::to_string(broad.overall.ex));
}

Verdict metric_sanity() {
   EvalConfig cfg;
   cfg.fuzz.scratch = scratch_dir("accept-sanity");
   std::vector<std::string> gold_sql;
   for (const auto& ex : train_corpus()) gold_sql.push_back(ex.gold_sql);
   const auto report = evaluate(train_corpus(), gold_sql, fixtures(), cfg);
   fs::remove_all(cfg.fuzz.scratch);
   // Literal substitution on every fixture query keeps the EM key.
   Rng rng(77);
   int em_breaks = 0;
   for (const auto& ex : train_corpus()) {
      const auto& env = lookup_env(fixtures(), ex.db_id);
      SqlAst ast = parse_sql(ex.gold_sql, env);
      for (Literal* lit : collect_literals(ast)) {
         if (lit->kind == Literal::Kind::Number) lit->text = std::to_string(rng.integer(-50, 50));
         else lit->text = "zz" + std::to_string(rng.next() % 1000);
      }
      if (!em_match(ex.gold_sql, render(ast, env), env)) ++em_breaks;
   }
   const auto& o = report.overall;
   const bool ok = o.em_rate() == 1.0 && o.ex_rate() == 1.0 && o.fx_rate() == 1.0 && em_breaks == 0;
   return check(ok, fmt("EM %.3f EX %.3f FX %.3f", o.em_rate(), o.ex_rate(), o.fx_rate()) +
                       ", EM changes under substitution " + std::to_string(em_breaks));
}

Verdict turn_context_golden() {
   const TurnContext ctx{"SELECT birth_place FROM people WHERE name = 'Tesla'", "how many people are born there ?"};
   const std::string got = ctx.rendered_input();
   return check(got == "[PREV] SELECT birth_place FROM people WHERE name = 'Tesla' [UTT] how many people are born there ?",
                "got \"" + got + "\"");
}

Verdict spider() {
   const char* root_env = std::getenv("SPIDER_ROOT");
   if (!root_env) return {Outcome::Skip, "SPIDER_ROOT not set"};
   const fs::path root = root_env;
   if (!fs::exists(root / "tables.json")) return {Outcome::Skip, "no tables.json under " + root.string()};
   const auto envs = load_schemas(root / "tables.json", root / "database");
   const auto index = index_schemas(envs);
   const auto train = load_corpus(root / "train_spider.json");
   const auto dev = load_corpus(root / "dev.json");
   const double cov = coverage(fit(train, index), dev, index);
   const bool ok = envs.size() == 200 && std::abs(cov - 0.85) <= 0.03;
   return check(ok, std::to_string(envs.size()) + " databases, " + fmt("coverage %.4f (target 0.85 +- 0.03)", cov));
}

Verdict variety_vs_enumeration() {
   const std::vector<std::string> one = {"select text1", "select count ( * ) where text1 = val", "select distinct text1"};
   const std::vector<std::string> two = {"select text1 , text2", "select text1 where text2 = val",
                                         "select count ( * ) where text1 = val and text2 = val"};
   int cases = 0, bad = 0;
   for (int n = 1; n <= 4; ++n) {
      const auto env = wide_env(n);
      for (int t = 1; t <= 3; ++t)
         for (int k = 1; k <= 2; ++k)
            for (int s = 1; s <= std::min(2, n); ++s) {
               const auto& pool = s == 1 ? one : two;
               const std::vector<std::string> tpls(pool.begin(), pool.begin() + t);
               ++cases;
               if (variety_bound(t, s, n, k) != enumerate_sequences(tpls, env, k)) ++bad;
               if (s == 2 && n >= 4) {
                  std::vector<std::string> mixed = {two[0]};
                  for (int i = 1; i < t; ++i) mixed.push_back(one[static_cast<std::size_t>(i)]);
                  ++cases;
                  if (variety_bound(t, s, n, k) < enumerate_sequences(mixed, env, k)) ++bad;
               }
            }
   }
   return check(bad == 0, std::to_string(cases - bad) + "/" + std::to_string(cases) + " fixtures agree");
}

struct Criterion {
   const char* name;
   double budget_seconds;
   std::function<Verdict()> run;
};

} // namespace

int main() {
   const std::vector<Criterion> criteria = {
      {"canonical template golden", 1, canonical_golden},
      {"sampler discard rule (1000 samples)", 60, discard_rule},
      {"template frequencies within 0.02 at n=10000", 60, template_frequencies},
      {"cycle-consistency keep-rates at n=1000", 300, keep_rates},
      {"consistency variant ordering", 300, variant_ordering},
      {"FX exposes spurious EX", 30, fx_exposes_spurious},
      {"metric sanity", 60, metric_sanity},
      {"turn-context golden", 1, turn_context_golden},
      {"Spider schemas and coverage", 600, spider},
      {"variety bound vs enumeration", 10, variety_vs_enumeration},
   };
   int failures = 0;
   for (const auto& c : criteria) {
      const auto start = std::chrono::steady_clock::now();
      Verdict v;
      try {
         v = c.run();
      } catch (const std::exception& e) {
         v = fail(std::string("threw: ") + e.what());
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (v.outcome != Outcome::Skip && secs > c.budget_seconds) {
         v.outcome = Outcome::Fail;
         v.detail += fmt(" (over the %.0fs budget)", c.budget_seconds);
      }
      const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Fail ? "FAIL" : "SKIP";
      std::printf("[%s] %-46s %7.2fs  %s\n", tag, c.name, secs, v.detail.c_str());
      std::fflush(stdout);
      failures += v.outcome == Outcome::Fail;
   }
   std::printf("%d failed\n", failures);
   return failures == 0 ? 0 : 1;
}
