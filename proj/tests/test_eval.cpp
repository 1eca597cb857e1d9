#include <gtest/gtest.h>

#include <fstream>

#include "cyclesql/error.hpp"
#include "cyclesql/eval.hpp"
#include "support.hpp"

using namespace cyclesql;
using namespace cyclesql::test;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
   try {
      f();
   } catch (const Error& e) {
      return e.kind();
   }
   ADD_FAILURE() << "no error raised";
   return ErrorKind::Internal;
}

EvalConfig config(const std::string& tag, bool fuzz = true) {
   EvalConfig cfg;
   cfg.fuzz.scratch = scratch_dir(tag);
   cfg.fuzz_enabled = fuzz;
   return cfg;
}

std::vector<std::string> gold_sql(const std::vector<CorpusExample>& corpus) {
   std::vector<std::string> out;
   for (const auto& ex : corpus) out.push_back(ex.gold_sql);
   return out;
}

Difficulty difficulty(const std::string& sql) { return classify_difficulty(parse_sql(sql, school())); }

} // namespace

TEST(Eval, GoldAgainstGold) {
   const auto& gold = train_corpus();
   const auto cfg = config("gold");
   const auto report = evaluate(gold, gold_sql(gold), fixtures(), cfg);
   EXPECT_EQ(report.overall.count, static_cast<int>(gold.size()));
   EXPECT_DOUBLE_EQ(report.overall.em_rate(), 1.0);
   EXPECT_DOUBLE_EQ(report.overall.ex_rate(), 1.0);
   EXPECT_DOUBLE_EQ(report.overall.fx_rate(), 1.0);
   std::filesystem::remove_all(cfg.fuzz.scratch);
}

TEST(Eval, ConstantPredictions) {
   const auto& gold = train_corpus();
   const auto cfg = config("const");
   const std::vector<std::string> pred(gold.size(), "select 1");
   const auto report = evaluate(gold, pred, fixtures(), cfg);
   EXPECT_EQ(report.overall.em, 0);
   EXPECT_LE(report.overall.fx, report.overall.ex);
   for (const auto& v : report.examples) EXPECT_LE(v.fx, v.ex);
   std::filesystem::remove_all(cfg.fuzz.scratch);
}

TEST(Eval, SpuriousExecutionMatch) {
   const std::vector<CorpusExample> gold = {{"counts", "how many ones", "select count ( * ) from t where x = 1", std::nullopt, 1, {}}};
   const auto cfg = config("spurious");
   const auto report = evaluate(gold, std::vector<std::string>{"select 2"}, fixtures(), cfg);
   EXPECT_TRUE(report.examples[0].ex);
   EXPECT_FALSE(report.examples[0].fx);
   EXPECT_FALSE(report.examples[0].em);
   std::filesystem::remove_all(cfg.fuzz.scratch);
}

TEST(Eval, EmIgnoresValuesButNotStructure) {
   const auto& env = school();
   EXPECT_TRUE(em_match("SELECT name FROM Students WHERE age > 15", "select name from students where age > 3", env));
   EXPECT_FALSE(em_match("SELECT name FROM Students WHERE age > 15", "select name from students where age < 15", env));
   EXPECT_FALSE(em_match("SELECT name FROM Students", "SELEC name", env));
   EXPECT_THROW(em_match("SELEC name", "SELECT name FROM Students", env), Error);
}

TEST(Eval, AlignmentMismatch) {
   const auto cfg = config("align", false);
   EXPECT_EQ(kind_of([&] { evaluate(train_corpus(), std::vector<std::string>{"select 1"}, fixtures(), cfg); }), ErrorKind::Alignment);
}

TEST(Eval, FuzzDisabled) {
   const auto& gold = train_corpus();
   const auto report = evaluate(gold, gold_sql(gold), fixtures(), config("off", false));
   EXPECT_EQ(report.overall.fx, 0);
   EXPECT_TRUE(report.to_json()["overall"]["fx"].is_null());
   EXPECT_NE(report.render_table().find(" -\n"), std::string::npos);
}

TEST(Eval, GoldErrorsAreExcluded) {
   std::vector<CorpusExample> gold = {{"school", "u", "select name from Students", std::nullopt, 1, {}},
                                      {"school", "u", "select nosuch from Students", std::nullopt, 1, {}},
                                      {"nowhere", "u", "select 1", std::nullopt, 1, {}}};
   const auto report = evaluate(gold, std::vector<std::string>(3, "select name from Students"), fixtures(), config("golderr", false));
   EXPECT_EQ(report.overall.count, 1);
   EXPECT_TRUE(report.examples[1].gold_error.has_value());
   EXPECT_TRUE(report.examples[2].gold_error.has_value());
   EXPECT_EQ(report.to_json()["gold_errors"].size(), 2u);
}

TEST(Eval, DifficultyRubric) {
   EXPECT_EQ(difficulty("select name from Students"), Difficulty::Easy);
   EXPECT_EQ(difficulty("select count ( * ) from Students where age > 15"), Difficulty::Easy);
   EXPECT_EQ(difficulty("select name from Students where age > 15 and grade = 10"), Difficulty::Medium);
   EXPECT_EQ(difficulty("select max ( age ) , min ( age ) from Students"), Difficulty::Medium);
   EXPECT_EQ(difficulty("select name from Schools order by founded desc limit 3"), Difficulty::Hard);
   EXPECT_EQ(difficulty("select name from Students where age > ( select avg ( age ) from Students )"), Difficulty::Hard);
   EXPECT_EQ(difficulty("select city , count ( * ) from Schools group by city having count ( * ) > 1"), Difficulty::Hard);
   EXPECT_EQ(difficulty("select city from Schools group by city having count ( * ) > 1 order by city"), Difficulty::Extra);
   EXPECT_EQ(difficulty("select name from Students where grade = 9 union select name from Students where grade = 12 order by name"),
             Difficulty::Hard);
   EXPECT_EQ(difficulty("select grade from Students where age > 12 and age < 18 and name != 'Bob' group by grade order by grade"),
             Difficulty::Extra);
}

TEST(Eval, TurnBuckets) {
   EXPECT_EQ(turn_bucket(1), "1");
   EXPECT_EQ(turn_bucket(3), "3");
   EXPECT_EQ(turn_bucket(4), "4+");
   EXPECT_EQ(turn_bucket(9), "4+");
   const auto& gold = train_corpus();
   const auto report = evaluate(gold, gold_sql(gold), fixtures(), config("turns", false));
   EXPECT_EQ(report.by_turn.at("1").count, 18);
   EXPECT_EQ(report.by_turn.at("2").count, 2);
   int sum = 0;
   for (const auto& [d, c] : report.by_difficulty) sum += c.count;
   EXPECT_EQ(sum, report.overall.count);
}

TEST(Eval, ParallelMatchesSerial) {
   const auto& gold = train_corpus();
   std::vector<std::string> pred = gold_sql(gold);
   for (std::size_t i = 0; i < pred.size(); i += 3) pred[i] = "select name from Students";
   auto serial = config("serial");
   auto parallel = config("parallel");
   parallel.jobs = 4;
   const auto a = evaluate(gold, pred, fixtures(), serial);
   const auto b = evaluate(gold, pred, fixtures(), parallel);
   ASSERT_EQ(a.examples.size(), b.examples.size());
   for (std::size_t i = 0; i < a.examples.size(); ++i) EXPECT_EQ(a.examples[i].to_json(true), b.examples[i].to_json(true));
   std::filesystem::remove_all(serial.fuzz.scratch);
   std::filesystem::remove_all(parallel.fuzz.scratch);
}

TEST(Eval, LoadPredictions) {
   const auto dir = scratch_dir("pred");
   {
      std::ofstream out(dir / "p.sql");
      out << "select 1\r\nselect 2\n\nselect 3";
   }
   EXPECT_EQ(load_predictions(dir / "p.sql"), (std::vector<std::string>{"select 1", "select 2", "", "select 3"}));
   EXPECT_EQ(kind_of([&] { load_predictions(dir / "missing.sql"); }), ErrorKind::Io);
   std::filesystem::remove_all(dir);
}

TEST(Eval, ReportEchoesConfig) {
   const auto& gold = train_corpus();
   const auto cfg = config("echo");
   const auto j = evaluate(gold, gold_sql(gold), fixtures(), cfg).to_json();
   EXPECT_EQ(j["config"]["semantics"], "bag");
   EXPECT_EQ(j["config"]["fuzz"]["instances"], 10);
   EXPECT_TRUE(j["config"].contains("difficulty_rubric"));
   std::filesystem::remove_all(cfg.fuzz.scratch);
}
