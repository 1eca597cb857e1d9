#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "cyclesql/error.hpp"
#include "cyclesql/corpus.hpp"
#include "cyclesql/exec.hpp"
#include "cyclesql/manifest.hpp"
#include "support.hpp"

using namespace cyclesql;
using namespace cyclesql::test;
namespace fs = std::filesystem;

namespace {

struct Run {
   int code;
   std::string out;
};

Run cli(const std::string& args, const fs::path& dir) {
   const fs::path log = dir / "stdout.txt";
   const std::string cmd = cli_path().string() + " --data-root " + fixture_root().string() + " --scratch " +
                           (dir / "scratch").string() + " " + args + " > " + log.string() + " 2> " + (dir / "stderr.txt").string();
   const int status = std::system(cmd.c_str());
   std::ifstream in(log);
   std::stringstream ss;
   ss << in.rdbuf();
   return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::vector<nlohmann::json> read_jsonl(const fs::path& file) {
   std::ifstream in(file);
   std::vector<nlohmann::json> out;
   std::string line;
   while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
   return out;
}

std::string slurp(const fs::path& file) {
   std::ifstream in(file);
   std::stringstream ss;
   ss << in.rdbuf();
   return ss.str();
}

class Cli : public ::testing::Test {
   protected:
   void SetUp() override { dir = scratch_dir("cli"); }
   void TearDown() override { fs::remove_all(dir); }

   std::string schema() const { return (fixture_src() / "tables.json").string(); }
   std::string train() const { return (fixture_src() / "train.json").string(); }

   fs::path fit_dist() {
      const auto out = dir / "fit" / "dist.json";
      EXPECT_EQ(cli("fit --schema " + schema() + " --train " + train() + " --out " + out.string(), dir).code, 0);
      return out;
   }

   fs::path dir;
};

} // namespace

TEST_F(Cli, FitWritesDistributionAndCoverage) {
   const auto out = dir / "fit" / "dist.json";
   const auto r = cli("fit --schema " + schema() + " --train " + train() + " --eval " + (fixture_src() / "dev.json").string() +
                         " --out " + out.string(),
                      dir);
   ASSERT_EQ(r.code, 0);
   EXPECT_NE(r.out.find("coverage 0.5000"), std::string::npos) << r.out;
   const auto j = read_json_file(out);
   EXPECT_EQ(j["meta"]["total"], 20);
   EXPECT_EQ(j["unigram"].size(), 15u);
   const auto m = RunManifest::from_json(read_json_file(dir / "fit" / "fit.manifest.json"));
   EXPECT_EQ(m.subcommand, "fit");
   EXPECT_EQ(m.outputs, std::vector<fs::path>{out});
   EXPECT_EQ(m.config["coverage"], 0.5);
}

TEST_F(Cli, MissingFileIsInputError) {
   EXPECT_EQ(cli("fit --schema " + schema() + " --train /nonexistent.json --out " + (dir / "d.json").string(), dir).code, 2);
   EXPECT_EQ(cli("fit --schema " + schema(), dir).code, 2);
   EXPECT_EQ(cli("bogus", dir).code, 2);
}

TEST_F(Cli, SampleRevalidates) {
   const auto dist = fit_dist();
   const auto out = dir / "sample" / "s.jsonl";
   ASSERT_EQ(cli("--seed 4 sample --schema " + schema() + " --dist " + dist.string() + " --db school -n 100 --out " + out.string(), dir).code, 0);
   const auto rows = read_jsonl(out);
   ASSERT_EQ(rows.size(), 100u);
   for (const auto& r : rows) EXPECT_FALSE(execute(r["sql"].get<std::string>(), school()).empty());
   EXPECT_TRUE(fs::exists(dir / "sample" / "sample.manifest.json"));
}

TEST_F(Cli, SamplePairsTurns) {
   const auto dist = fit_dist();
   const auto out = dir / "s.jsonl";
   ASSERT_EQ(cli("sample --schema " + schema() + " --dist " + dist.string() + " --db school -n 10 --turns 2 --out " + out.string(), dir).code, 0);
   const auto rows = read_jsonl(out);
   ASSERT_EQ(rows.size(), 10u);
   for (std::size_t i = 1; i < rows.size(); i += 2) EXPECT_EQ(rows[i]["prev_sql"], rows[i - 1]["sql"]);
}

TEST_F(Cli, SampleDeterministicUnderSeedAndJobs) {
   const auto dist = fit_dist();
   const auto a = dir / "a.jsonl", b = dir / "b.jsonl", c = dir / "c.jsonl";
   const std::string base = "sample --schema " + schema() + " --dist " + dist.string() + " -n 50 --out ";
   ASSERT_EQ(cli("--seed 9 " + base + a.string(), dir).code, 0);
   ASSERT_EQ(cli("--seed 9 --jobs 3 " + base + b.string(), dir).code, 0);
   ASSERT_EQ(cli("--seed 10 " + base + c.string(), dir).code, 0);
   EXPECT_EQ(slurp(a), slurp(b));
   EXPECT_NE(slurp(a), slurp(c));
}

TEST_F(Cli, SampleBadDatabasePath) {
   const auto dist = fit_dist();
   const std::string cmd = cli_path().string() + " --data-root /nonexistent sample --schema " + schema() + " --dist " +
                           dist.string() + " --db school -n 5 --out " + (dir / "s.jsonl").string() + " 2>/dev/null";
   const int status = std::system(cmd.c_str());
   EXPECT_EQ(WEXITSTATUS(status), 2);
}

TEST_F(Cli, SamplingFailuresAreExit3) {
   auto one_template = [&](const std::string& text) {
      const auto file = dir / "one.json";
      write_json_file(file, {{"unigram", {{{"template", text}, {"count", 1}, {"join_arity", 1}}}},
                             {"bigram", nlohmann::json::array()},
                             {"meta", {{"skipped", 0}, {"total", 1}}}});
      return file.string();
   };
   // counts has no text columns; islands never has two in one connected table.
   EXPECT_EQ(cli("sample --schema " + schema() + " --dist " + one_template("select text1 , text2") + " --db counts -n 5 --out " +
                    (dir / "s.jsonl").string(),
                 dir)
                .code,
             3);
   EXPECT_EQ(cli("sample --schema " + schema() + " --dist " + one_template("select text1 where text2 = val") +
                    " --db islands -n 5 --max-attempts 20 --out " + (dir / "s.jsonl").string(),
                 dir)
                .code,
             3);
}

TEST_F(Cli, SynthPerfectAndLossy) {
   const auto dist = fit_dist();
   const std::string base = "synth --schema " + schema() + " --dist " + dist.string() + " --db school -n 200 --train " + train();
   ASSERT_EQ(cli(base + " --out-dir " + (dir / "p").string(), dir).code, 0);
   const auto summary = read_json_file(dir / "p" / "summary.json");
   EXPECT_EQ(summary["keep_rate"], 1.0);
   EXPECT_EQ(read_jsonl(dir / "p" / "synth.jsonl").size(), 200u);
   const auto combined = load_corpus(dir / "p" / "adaptation.json");
   EXPECT_EQ(combined.size(), 220u);
   EXPECT_TRUE(fs::exists(dir / "p" / "synth.manifest.json"));

   ASSERT_EQ(cli(base + " --generator builtin:lossy --out-dir " + (dir / "l").string(), dir).code, 0);
   EXPECT_LT(read_json_file(dir / "l" / "summary.json")["keep_rate"].get<double>(), 0.2);

   ASSERT_EQ(cli(base + " --generator builtin:lossy --consistency none --out-dir " + (dir / "n").string(), dir).code, 0);
   EXPECT_EQ(read_json_file(dir / "n" / "summary.json")["keep_rate"], 1.0);
}

TEST_F(Cli, SynthThroughSubprocessAdapters) {
   const auto dist = fit_dist();
   const std::string adapter = "'cmd:" + cli_path().string() + " serve-adapter'";
   const std::string base = "--seed 3 synth --schema " + schema() + " --dist " + dist.string() + " --db school -n 40";
   ASSERT_EQ(cli(base + " --generator " + adapter + " --parser " + adapter + " --out-dir " + (dir / "sub").string(), dir).code, 0);
   ASSERT_EQ(cli(base + " --out-dir " + (dir / "builtin").string(), dir).code, 0);
   EXPECT_EQ(slurp(dir / "sub" / "adaptation.json"), slurp(dir / "builtin" / "adaptation.json"));
   EXPECT_EQ(read_json_file(dir / "sub" / "summary.json")["keep_rate"], 1.0);
}

TEST_F(Cli, SynthAdapterSpawnFailure) {
   const auto dist = fit_dist();
   EXPECT_EQ(cli("synth --schema " + schema() + " --dist " + dist.string() +
                    " --db school -n 5 --parser cmd:/nonexistent/adapter --out-dir " + (dir / "x").string(),
                 dir)
                .code,
             4);
}

TEST_F(Cli, SynthModesPickEnvironments) {
   const auto dist = fit_dist();
   ASSERT_EQ(cli("synth --schema " + schema() + " --dist " + dist.string() + " --mode syntrain --train " + train() +
                    " -n 30 --out-dir " + (dir / "st").string(),
                 dir)
                .code,
             0);
   for (const auto& row : read_jsonl(dir / "st" / "synth.jsonl")) EXPECT_EQ(row["db_id"], "school");
   EXPECT_EQ(cli("synth --schema " + schema() + " --dist " + dist.string() + " --mode syntrain -n 5 --out-dir " +
                    (dir / "bad").string(),
                 dir)
                .code,
             2);
}

TEST_F(Cli, EvalGoldAgainstGold) {
   const auto pred = dir / "gold.sql";
   {
      std::ofstream out(pred);
      for (const auto& ex : train_corpus()) out << ex.gold_sql << '\n';
   }
   ASSERT_EQ(cli("eval --schema " + schema() + " --gold " + train() + " --pred " + pred.string() + " --fuzz-instances 3 --out-dir " +
                    (dir / "e").string(),
                 dir)
                .code,
             0);
   const auto report = read_json_file(dir / "e" / "report.json");
   EXPECT_EQ(report["overall"]["em"], 1.0);
   EXPECT_EQ(report["overall"]["ex"], 1.0);
   EXPECT_EQ(report["overall"]["fx"], 1.0);
   EXPECT_TRUE(fs::exists(dir / "e" / "report.txt"));
   EXPECT_TRUE(fs::exists(dir / "e" / "eval.manifest.json"));
   // Scratch instances are removed after the run.
   EXPECT_TRUE(!fs::exists(dir / "scratch" / "school") || fs::is_empty(dir / "scratch" / "school"));
}

TEST_F(Cli, EvalConstantAndDisabledFuzz) {
   const auto pred = dir / "const.sql";
   {
      std::ofstream out(pred);
      for (std::size_t i = 0; i < train_corpus().size(); ++i) out << "select 1\n";
   }
   ASSERT_EQ(cli("eval --schema " + schema() + " --gold " + train() + " --pred " + pred.string() + " --out-dir " + (dir / "c").string(), dir).code, 0);
   const auto report = read_json_file(dir / "c" / "report.json");
   EXPECT_LE(report["overall"]["fx_count"].get<int>(), report["overall"]["ex_count"].get<int>());
   ASSERT_EQ(cli("eval --schema " + schema() + " --gold " + train() + " --pred " + pred.string() +
                    " --fuzz-instances 0 --out-dir " + (dir / "z").string(),
                 dir)
                .code,
             0);
   EXPECT_TRUE(read_json_file(dir / "z" / "report.json")["overall"]["fx"].is_null());
}

TEST_F(Cli, EvalAlignmentIsExit5) {
   const auto pred = dir / "short.sql";
   {
      std::ofstream out(pred);
      out << "select 1\n";
   }
   EXPECT_EQ(cli("eval --schema " + schema() + " --gold " + train() + " --pred " + pred.string() + " --out-dir " + (dir / "a").string(), dir).code, 5);
}

TEST_F(Cli, FuzzDbWritesInstances) {
   const auto r = cli("--seed 2 fuzz-db --schema " + schema() + " --db school --instances 2", dir);
   ASSERT_EQ(r.code, 0);
   const auto a = dir / "scratch" / "school" / "fuzz_2_0.sqlite";
   EXPECT_TRUE(fs::exists(a));
   EXPECT_TRUE(fs::exists(dir / "scratch" / "school" / "fuzz_2_1.sqlite"));
   EXPECT_NE(r.out.find(a.string()), std::string::npos);
   EXPECT_TRUE(fs::exists(dir / "scratch" / "school" / "fuzz-db.manifest.json"));
}
