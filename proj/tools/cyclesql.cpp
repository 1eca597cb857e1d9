#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cyclesql/adapter.hpp"
#include "cyclesql/builtin_adapters.hpp"
#include "cyclesql/corpus.hpp"
#include "cyclesql/distribution.hpp"
#include "cyclesql/error.hpp"
#include "cyclesql/eval.hpp"
#include "cyclesql/fuzz.hpp"
#include "cyclesql/manifest.hpp"
#include "cyclesql/parallel.hpp"
#include "cyclesql/sampler.hpp"
#include "cyclesql/schema.hpp"
#include "cyclesql/synth.hpp"

namespace fs = std::filesystem;
using namespace cyclesql;

namespace {

int exit_code(ErrorKind kind) {
   switch (kind) {
      case ErrorKind::SamplingExhausted:
      case ErrorKind::UnfillableEnvironment: return 3;
      case ErrorKind::Adapter:
      case ErrorKind::Protocol: return 4;
      case ErrorKind::Alignment: return 5;
      case ErrorKind::Internal: return 1;
      default: return 2;
   }
}

struct Globals {
   std::uint64_t seed = 0;
   int jobs = 1;
   fs::path data_root;
   fs::path scratch = fs::temp_directory_path() / "cyclesql-fuzz";
};

struct Clock {
   std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
   std::chrono::duration<double> elapsed() const { return std::chrono::steady_clock::now() - start; }
};

void write_jsonl(const fs::path& file, const std::vector<nlohmann::json>& rows) {
   if (file.has_parent_path()) fs::create_directories(file.parent_path());
   std::ofstream out(file);
   if (!out) throw Error(ErrorKind::Io, "cannot write " + file.string());
   for (const auto& r : rows) out << r.dump() << '\n';
}

SchemaIndex load_index(const fs::path& schema, const fs::path& data_root) {
   return index_schemas(load_schemas(schema, data_root.empty() ? schema.parent_path() : data_root));
}

std::vector<const DatabaseEnv*> select_envs(const SchemaIndex& index, const std::vector<std::string>& ids) {
   std::vector<const DatabaseEnv*> envs;
   if (ids.empty()) {
      for (const auto& [id, env] : index) envs.push_back(&env);
   } else {
      for (const auto& id : ids) envs.push_back(&lookup_env(index, id));
   }
   return envs;
}

std::vector<std::string> corpus_ids(const fs::path& corpus) {
   std::set<std::string> ids;
   for (const auto& ex : load_corpus(corpus)) ids.insert(ex.db_id);
   return {ids.begin(), ids.end()};
}

struct FitArgs {
   fs::path schema, train, eval, out;
};

int run_fit(const Globals& g, const FitArgs& a) {
   Clock clock;
   const SchemaIndex index = load_index(a.schema, g.data_root);
   const auto corpus = load_corpus(a.train);
   const TemplateDistribution dist = fit(corpus, index);
   write_json_file(a.out, dist.to_json());
   nlohmann::json summary = {{"examples", corpus.size()},
                             {"templates", dist.unigram().size()},
                             {"transitions", dist.bigram().size()},
                             {"skipped", dist.skipped()}};
   std::cout << "fit " << corpus.size() << " examples: " << dist.unigram().size() << " templates, "
             << dist.skipped() << " skipped\n";
   RunManifest m{"fit", {}, g.seed, {a.schema, a.train}, {a.out}};
   if (!a.eval.empty()) {
      const auto eval_corpus = load_corpus(a.eval);
      const double cov = coverage(dist, eval_corpus, index);
      summary["coverage"] = cov;
      std::printf("coverage %.4f\n", cov);
      m.inputs.push_back(a.eval);
   }
   m.config = summary;
   m.duration = clock.elapsed();
   write_manifest(m);
   return 0;
}

struct SampleArgs {
   fs::path schema, dist, out;
   std::vector<std::string> db_ids;
   int n = 100;
   int turns = 1;
   int max_attempts = 500;
};

int run_sample(const Globals& g, const SampleArgs& a) {
   Clock clock;
   if (a.n < 1 || a.turns < 1) throw Error(ErrorKind::Domain, "-n and --turns must be at least 1");
   const SchemaIndex index = load_index(a.schema, g.data_root);
   const TemplateDistribution dist = TemplateDistribution::from_json(read_json_file(a.dist));
   std::vector<const DatabaseEnv*> usable;
   for (const DatabaseEnv* env : select_envs(index, a.db_ids))
      if (std::any_of(dist.unigram().begin(), dist.unigram().end(),
                      [&](const auto& kv) { return can_fill(*env, kv.second.tpl); }))
         usable.push_back(env);
   if (usable.empty()) throw Error(ErrorKind::UnfillableEnvironment, "no selected environment can fill any template");

   SamplerConfig cfg;
   cfg.max_attempts = a.max_attempts;
   const auto total = static_cast<std::size_t>(a.n);
   const auto turns = static_cast<std::size_t>(a.turns);
   const std::size_t sequences = (total + turns - 1) / turns;
   std::vector<std::vector<SampledQuery>> out(sequences);
   std::vector<ConnectionCache> caches(static_cast<std::size_t>(std::max(g.jobs, 1)));
   parallel_for(sequences, g.jobs, [&](std::size_t s, int worker) {
      const std::uint64_t seed = derive_seed(g.seed, s);
      Rng rng(seed);
      const DatabaseEnv& env = *usable[rng.index(usable.size())];
      const int count = static_cast<int>(std::min(turns, total - s * turns));
      out[s] = sample_turn_sequence(env, caches[static_cast<std::size_t>(worker)].open(env), dist, rng, count, cfg);
      for (auto& q : out[s]) q.trace.seed = seed;
   });
   std::vector<nlohmann::json> rows;
   for (const auto& seq : out)
      for (const auto& q : seq) rows.push_back(q.to_json());
   write_jsonl(a.out, rows);
   std::cout << "sampled " << rows.size() << " queries\n";
   RunManifest m{"sample",
                 {{"n", a.n}, {"turns", a.turns}, {"db_ids", a.db_ids}, {"max_attempts", a.max_attempts}, {"jobs", g.jobs}},
                 g.seed,
                 {a.schema, a.dist},
                 {a.out}};
   m.duration = clock.elapsed();
   write_manifest(m);
   return 0;
}

struct SynthArgs {
   fs::path schema, dist, train, target, out_dir;
   std::vector<std::string> db_ids;
   std::string mode = "adapt";
   std::string consistency = "execution";
   std::string semantics = "bag";
   std::string generator = "builtin:perfect";
   std::string parser = "builtin:perfect";
   int n = 100;
   int turns = 1;
   bool dedup = false;
   double adapter_timeout = 30.0;
};

int run_synth(const Globals& g, const SynthArgs& a) {
   Clock clock;
   SynthRunConfig cfg;
   cfg.mode = synth_mode_from_string(a.mode);
   cfg.consistency = consistency_from_string(a.consistency);
   cfg.semantics = equality_semantics_from_string(a.semantics);
   cfg.target_count = a.n;
   cfg.seed = g.seed;
   cfg.generator = a.generator;
   cfg.parser = a.parser;
   cfg.turns = a.turns;
   cfg.jobs = g.jobs;
   cfg.validate();

   const SchemaIndex index = load_index(a.schema, g.data_root);
   const TemplateDistribution dist = TemplateDistribution::from_json(read_json_file(a.dist));
   std::vector<std::string> ids = a.db_ids;
   if (ids.empty()) {
      if (cfg.mode == SynthMode::Syntrain) {
         if (a.train.empty()) throw Error(ErrorKind::Domain, "syntrain mode needs --train to know the training environments");
         ids = corpus_ids(a.train);
      } else if (!a.target.empty()) {
         ids = corpus_ids(a.target);
      } else {
         std::set<std::string> train_ids;
         if (!a.train.empty())
            for (auto& id : corpus_ids(a.train)) train_ids.insert(id);
         for (const auto& [id, env] : index)
            if (!train_ids.contains(id)) ids.push_back(id);
      }
   }
   const auto envs = select_envs(index, ids);

   AdapterOptions opts;
   opts.timeout = std::chrono::milliseconds(static_cast<long>(a.adapter_timeout * 1000));
   opts.seed = derive_seed(g.seed, 0x70617273);
   auto parser = make_adapter(a.parser, opts);
   opts.seed = derive_seed(g.seed, 0x67656e65);
   auto generator = make_adapter(a.generator, opts);

   const SynthResult result = synthesize(envs, dist, *parser, *generator, cfg);
   std::vector<nlohmann::json> rows;
   for (const auto& ex : result.examples) rows.push_back(ex.to_json());
   const fs::path jsonl = a.out_dir / "synth.jsonl";
   const fs::path summary = a.out_dir / "summary.json";
   const fs::path combined = a.out_dir / "adaptation.json";
   write_jsonl(jsonl, rows);
   write_json_file(summary, result.summary(cfg));
   std::vector<CorpusExample> original;
   if (!a.train.empty()) original = load_corpus(a.train);
   write_corpus(combined, build_adaptation_set(result.examples, original, a.dedup));
   std::printf("attempts %zu kept %zu keep_rate %.4f\n", result.examples.size(), result.kept_count(), result.keep_rate());

   RunManifest m{"synth", cfg.to_json(), g.seed, {a.schema, a.dist}, {jsonl, summary, combined}};
   m.config["db_ids"] = ids;
   m.config["dedup"] = a.dedup;
   if (!a.train.empty()) m.inputs.push_back(a.train);
   if (!a.target.empty()) m.inputs.push_back(a.target);
   m.duration = clock.elapsed();
   write_manifest(m);
   return 0;
}

struct EvalArgs {
   fs::path schema, gold, pred, out_dir;
   int fuzz_instances = 10;
   bool keep_fuzz = false;
   std::string semantics = "bag";
};

int run_eval(const Globals& g, const EvalArgs& a) {
   Clock clock;
   const SchemaIndex index = load_index(a.schema, g.data_root);
   const auto gold = load_corpus(a.gold);
   const auto pred = load_predictions(a.pred);
   EvalConfig cfg;
   cfg.semantics = equality_semantics_from_string(a.semantics);
   cfg.jobs = g.jobs;
   cfg.fuzz_enabled = a.fuzz_instances > 0;
   cfg.fuzz.instances = std::max(a.fuzz_instances, 1);
   cfg.fuzz.seed = g.seed;
   cfg.fuzz.scratch = g.scratch;
   cfg.fuzz.keep = a.keep_fuzz;
   cfg.fuzz.semantics = cfg.semantics;
   if (cfg.fuzz_enabled) cfg.fuzz.validate();
   const EvalReport report = evaluate(gold, pred, index, cfg);
   const fs::path json = a.out_dir / "report.json";
   const fs::path table = a.out_dir / "report.txt";
   write_json_file(json, report.to_json());
   const std::string rendered = report.render_table();
   {
      std::ofstream out(table);
      if (!out) throw Error(ErrorKind::Io, "cannot write " + table.string());
      out << rendered;
   }
   std::cout << rendered;
   RunManifest m{"eval", report.config, g.seed, {a.schema, a.gold, a.pred}, {json, table}};
   m.config["jobs"] = g.jobs;
   m.duration = clock.elapsed();
   write_manifest(m);
   return 0;
}

struct FuzzArgs {
   fs::path schema;
   std::string db_id;
   int instances = 1;
   int min_rows = 5;
   int max_rows = 50;
};

int run_fuzz_db(const Globals& g, const FuzzArgs& a) {
   Clock clock;
   const SchemaIndex index = load_index(a.schema, g.data_root);
   const DatabaseEnv& env = lookup_env(index, a.db_id);
   FuzzConfig cfg;
   cfg.instances = a.instances;
   cfg.min_rows = a.min_rows;
   cfg.max_rows = a.max_rows;
   cfg.seed = g.seed;
   cfg.scratch = g.scratch;
   cfg.keep = true;
   cfg.validate();
   std::vector<fs::path> paths(static_cast<std::size_t>(a.instances));
   parallel_for(paths.size(), g.jobs,
                [&](std::size_t i, int) { paths[i] = randomize_db(env, cfg, static_cast<int>(i)).store_path; });
   for (const auto& p : paths) std::cout << p.string() << '\n';
   RunManifest m{"fuzz-db", cfg.to_json(), g.seed, {a.schema}, paths};
   m.config["db_id"] = a.db_id;
   m.duration = clock.elapsed();
   write_manifest(m);
   return 0;
}

} // namespace

int main(int argc, char** argv) {
   CLI::App app{"Cycle-consistent text-to-SQL data synthesis and evaluation"};
   app.require_subcommand(1);
   Globals g;
   app.add_option("--seed", g.seed, "Base seed for every random stream")->capture_default_str();
   app.add_option("--jobs", g.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
   app.add_option("--data-root", g.data_root, "Directory holding <db_id>/<db_id>.sqlite (default: schema file's directory)");
   app.add_option("--scratch", g.scratch, "Directory for randomized database instances")->capture_default_str();

   FitArgs fit_args;
   auto* fit_cmd = app.add_subcommand("fit", "Count templates and transitions in a training corpus");
   fit_cmd->add_option("--schema", fit_args.schema, "Schema file (tables.json layout)")->required();
   fit_cmd->add_option("--train", fit_args.train, "Training corpus")->required();
   fit_cmd->add_option("--eval", fit_args.eval, "Corpus to report template coverage on");
   fit_cmd->add_option("--out", fit_args.out, "Distribution file")->required();

   SampleArgs sample_args;
   auto* sample_cmd = app.add_subcommand("sample", "Sample executable queries from a fitted distribution");
   sample_cmd->add_option("--schema", sample_args.schema)->required();
   sample_cmd->add_option("--dist", sample_args.dist, "Distribution file from fit")->required();
   sample_cmd->add_option("--db", sample_args.db_ids, "Restrict to these databases (default: all)");
   sample_cmd->add_option("-n", sample_args.n, "Number of queries")->capture_default_str();
   sample_cmd->add_option("--turns", sample_args.turns, "Queries per sequence")->capture_default_str();
   sample_cmd->add_option("--max-attempts", sample_args.max_attempts)->capture_default_str();
   sample_cmd->add_option("--out", sample_args.out, "JSON lines output")->required();

   SynthArgs synth_args;
   auto* synth_cmd = app.add_subcommand("synth", "Synthesize cycle-consistent utterance/query pairs");
   synth_cmd->add_option("--schema", synth_args.schema)->required();
   synth_cmd->add_option("--dist", synth_args.dist)->required();
   synth_cmd->add_option("--train", synth_args.train, "Original training corpus (merged into the adaptation set)");
   synth_cmd->add_option("--target", synth_args.target, "Corpus whose databases are the inference environments");
   synth_cmd->add_option("--db", synth_args.db_ids, "Explicit environments to sample in");
   synth_cmd->add_option("--mode", synth_args.mode, "adapt or syntrain")->capture_default_str();
   synth_cmd->add_option("--consistency", synth_args.consistency, "execution, string_match or none")->capture_default_str();
   synth_cmd->add_option("--semantics", synth_args.semantics, "bag or set")->capture_default_str();
   synth_cmd->add_option("--generator", synth_args.generator, "builtin:<name> or cmd:<shell command>")->capture_default_str();
   synth_cmd->add_option("--parser", synth_args.parser, "builtin:<name> or cmd:<shell command>")->capture_default_str();
   synth_cmd->add_option("-n", synth_args.n, "Attempts")->capture_default_str();
   synth_cmd->add_option("--turns", synth_args.turns)->capture_default_str();
   synth_cmd->add_flag("--dedup", synth_args.dedup, "Drop repeated (query, utterance) pairs from the adaptation set");
   synth_cmd->add_option("--adapter-timeout", synth_args.adapter_timeout, "Seconds per adapter request")->capture_default_str();
   synth_cmd->add_option("--out-dir", synth_args.out_dir)->required();

   EvalArgs eval_args;
   auto* eval_cmd = app.add_subcommand("eval", "Score predictions with EM, EX and FX");
   eval_cmd->add_option("--schema", eval_args.schema)->required();
   eval_cmd->add_option("--gold", eval_args.gold, "Gold corpus")->required();
   eval_cmd->add_option("--pred", eval_args.pred, "One SQL per line, aligned with the gold corpus")->required();
   eval_cmd->add_option("--fuzz-instances", eval_args.fuzz_instances, "0 disables FX")->capture_default_str();
   eval_cmd->add_flag("--keep-fuzz-dbs", eval_args.keep_fuzz);
   eval_cmd->add_option("--semantics", eval_args.semantics, "bag or set")->capture_default_str();
   eval_cmd->add_option("--out-dir", eval_args.out_dir)->required();

   FuzzArgs fuzz_args;
   auto* fuzz_cmd = app.add_subcommand("fuzz-db", "Write randomized instances of one database");
   fuzz_cmd->add_option("--schema", fuzz_args.schema)->required();
   fuzz_cmd->add_option("--db", fuzz_args.db_id)->required();
   fuzz_cmd->add_option("--instances", fuzz_args.instances)->capture_default_str();
   fuzz_cmd->add_option("--min-rows", fuzz_args.min_rows)->capture_default_str();
   fuzz_cmd->add_option("--max-rows", fuzz_args.max_rows)->capture_default_str();

   std::string serve_model = "perfect";
   auto* serve_cmd = app.add_subcommand("serve-adapter", "Serve a builtin model over the adapter protocol on stdin/stdout");
   serve_cmd->add_option("--model", serve_model, "perfect, corrupting or lossy")->capture_default_str();

   try {
      app.parse(argc, argv);
   } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
   }

   try {
      if (*fit_cmd) return run_fit(g, fit_args);
      if (*sample_cmd) return run_sample(g, sample_args);
      if (*synth_cmd) return run_synth(g, synth_args);
      if (*eval_cmd) return run_eval(g, eval_args);
      if (*fuzz_cmd) return run_fuzz_db(g, fuzz_args);
      if (*serve_cmd) {
         AdapterOptions opts;
         opts.seed = g.seed;
         auto model = make_builtin(serve_model, opts);
         std::ios::sync_with_stdio(false);
         serve_adapter(std::cin, std::cout, *model, std::cerr);
         return 0;
      }
   } catch (const Error& e) {
      std::cerr << e.what() << '\n';
      return exit_code(e.kind());
   } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
   }
   return 0;
}
