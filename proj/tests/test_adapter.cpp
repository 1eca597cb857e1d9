#include <gtest/gtest.h>

#include <sstream>

#include "cyclesql/error.hpp"
#include "cyclesql/adapter.hpp"
#include "cyclesql/builtin_adapters.hpp"
#include "cyclesql/corpus.hpp"
#include "cyclesql/distribution.hpp"
#include "cyclesql/sampler.hpp"
#include "support.hpp"

using namespace cyclesql;
using namespace cyclesql::test;

namespace {

using namespace std::chrono_literals;

ErrorKind kind_of(const std::function<void()>& f) {
   try {
      f();
   } catch (const Error& e) {
      return e.kind();
   }
   ADD_FAILURE() << "no error raised";
   return ErrorKind::Internal;
}

std::string fake(const std::string& mode) { return fake_adapter_path().string() + " " + mode; }
std::string served(const std::string& model) { return cli_path().string() + " serve-adapter --model " + model; }

std::vector<SampledQuery> sampled_queries(int n, std::uint64_t seed) {
   static const auto dist = fit(train_corpus(), fixtures());
   Database db(school().store_path);
   Rng rng(seed);
   std::vector<SampledQuery> out;
   for (int i = 0; i < n; ++i) out.push_back(sample_query(school(), db, dist, rng));
   return out;
}

} // namespace

TEST(Adapter, TurnContextGolden) {
   const TurnContext ctx{"SELECT birth_place FROM people WHERE name = 'Tesla'", "how many people are born there ?"};
   EXPECT_EQ(ctx.rendered_input(), "[PREV] SELECT birth_place FROM people WHERE name = 'Tesla' [UTT] how many people are born there ?");
   EXPECT_EQ(TurnContext({std::nullopt, "list all people"}).rendered_input(), "list all people");
}

TEST(Adapter, GlossCountQuery) {
   EXPECT_EQ(gloss("select count ( * ) from Friend"), "how many friend are there ?");
   EXPECT_EQ(ungloss("how many friend are there ?"), "select count ( * ) from friend");
}

TEST(Adapter, GlossSpellsOutStructure) {
   const std::string u = gloss("select name from Students where age >= 15");
   EXPECT_EQ(u, "show me name from students where age is at least 15 ?");
   EXPECT_EQ(ungloss(u), "select name from students where age >= 15");
}

TEST(Adapter, PerfectRoundTripsThousandQueries) {
   const auto& env = school();
   auto model = make_builtin("perfect");
   int exact = 0;
   for (const auto& q : sampled_queries(1000, 41)) {
      const std::string u = generate_utterance(*model, q.ast, env);
      const SqlAst back = parse_utterance(*model, u, env);
      exact += back == q.ast;
      EXPECT_EQ(render(back, env), q.sql) << u;
   }
   EXPECT_EQ(exact, 1000);
}

TEST(Adapter, CorruptingChangesExactlyOneLiteral) {
   const auto& env = school();
   auto model = make_builtin("corrupting", {kAdapterTimeout, 3});
   int changed = 0, with_literals = 0;
   for (auto q : sampled_queries(400, 43)) {
      SqlAst original = q.ast;
      SqlAst back = parse_utterance(*model, generate_utterance(*model, q.ast, env), env);
      auto a = collect_literals(original);
      auto b = collect_literals(back);
      ASSERT_EQ(a.size(), b.size());
      if (a.empty()) {
         EXPECT_TRUE(back == original);
         continue;
      }
      ++with_literals;
      int diffs = 0;
      for (std::size_t i = 0; i < a.size(); ++i) diffs += a[i]->text != b[i]->text;
      EXPECT_LE(diffs, 1);
      changed += diffs;
   }
   // Binomial(with_literals, 0.5): well inside 5 sigma.
   EXPECT_NEAR(changed / double(with_literals), 0.5, 5 * std::sqrt(0.25 / with_literals));
}

TEST(Adapter, CorruptingIsDeterministic) {
   const auto& env = school();
   auto a = make_builtin("corrupting", {kAdapterTimeout, 9});
   auto b = make_builtin("corrupting", {kAdapterTimeout, 9});
   for (const auto& q : sampled_queries(50, 44)) {
      const std::string u = generate_utterance(*a, q.ast, env);
      EXPECT_EQ(predict_sql(*a, u, env), predict_sql(*b, u, env));
   }
}

TEST(Adapter, LossyDropsConditions) {
   const auto& env = school();
   auto model = make_builtin("lossy");
   const SqlAst q = parse_sql("select name from Students where age > 15", env);
   EXPECT_EQ(predict_sql(*model, generate_utterance(*model, q, env), env), "select name from students");
}

TEST(Adapter, InvalidPrediction) {
   const auto& env = school();
   auto model = make_builtin("perfect");
   EXPECT_EQ(kind_of([&] { parse_utterance(*model, "selec x", env); }), ErrorKind::InvalidPrediction);
   auto echo = make_adapter("cmd:" + fake("echo"));
   EXPECT_EQ(kind_of([&] { parse_utterance(*echo, "SELEC x", env); }), ErrorKind::InvalidPrediction);
}

TEST(Adapter, MakeAdapterSpecs) {
   EXPECT_EQ(make_adapter("builtin:perfect")->name(), "builtin:perfect");
   EXPECT_THROW(make_adapter("builtin:nope"), Error);
   EXPECT_THROW(make_adapter("model.bin"), Error);
}

TEST(Adapter, RequestJson) {
   const ParseRequest p{"how many are there ?", "school", nlohmann::json::object(), "select name from Students"};
   const auto j = p.to_json();
   EXPECT_EQ(j["input"], "[PREV] select name from Students [UTT] how many are there ?");
   EXPECT_EQ(ParseRequest::from_json(j).prev_query, p.prev_query);
   const GenerateRequest g{"select count ( * ) from Friend", "school", schema_to_json(school()), std::nullopt};
   EXPECT_EQ(GenerateRequest::from_json(g.to_json()).query, g.query);
   EXPECT_TRUE(g.to_json()["prev_query"].is_null());
}

TEST(Adapter, ServeAnswersEveryRequest) {
   auto model = make_builtin("perfect");
   std::istringstream in(
      "{\"id\":1,\"method\":\"generate\",\"params\":{\"query\":\"select count ( * ) from Friend\"}}\n"
      "garbage\n"
      "{\"id\":2,\"method\":\"frobnicate\",\"params\":{}}\n"
      "{\"id\":3,\"method\":\"parse\",\"params\":{\"utterance\":\"how many friend are there ?\"}}\n");
   std::ostringstream out, log;
   serve_adapter(in, out, *model, log);
   std::istringstream lines(out.str());
   std::string line;
   std::getline(lines, line);
   EXPECT_EQ(nlohmann::json::parse(line), (nlohmann::json{{"protocol", "gazp-adapter/1"}, {"concurrent", false}}));
   std::vector<nlohmann::json> responses;
   while (std::getline(lines, line)) responses.push_back(nlohmann::json::parse(line));
   ASSERT_EQ(responses.size(), 3u);
   EXPECT_EQ(responses[0]["id"], 1);
   EXPECT_EQ(responses[0]["result"]["utterance"], "how many friend are there ?");
   EXPECT_EQ(responses[1], (nlohmann::json{{"id", 2}, {"error", "unknown method"}}));
   EXPECT_EQ(responses[2]["result"]["query"], "select count ( * ) from friend");
   EXPECT_FALSE(log.str().empty());
}

TEST(Adapter, SubprocessRoundTrip) {
   const auto& env = school();
   auto model = make_adapter("cmd:" + served("perfect"));
   EXPECT_FALSE(model->concurrent());
   auto builtin = make_builtin("perfect");
   for (const auto& q : sampled_queries(30, 45)) {
      const std::string u = generate_utterance(*model, q.ast, env);
      EXPECT_EQ(u, generate_utterance(*builtin, q.ast, env));
      EXPECT_EQ(render(parse_utterance(*model, u, env), env), q.sql);
   }
}

TEST(Adapter, SubprocessThreadsPrevQuery) {
   const auto& env = school();
   auto model = make_adapter("cmd:" + fake("echo"));
   const SqlAst prev = parse_sql("select name from Students", env);
   const SqlAst q = parse_sql("select count ( * ) from Students", env);
   EXPECT_EQ(generate_utterance(*model, q, env, &prev), "select count ( * ) from Students");
}

TEST(Adapter, EmptyUtteranceIsProtocolError) {
   auto model = make_adapter("cmd:" + fake("empty"));
   EXPECT_EQ(kind_of([&] { generate_utterance(*model, parse_sql("select name from Students", school()), school()); }),
             ErrorKind::Protocol);
}

TEST(Adapter, SilentAdapterTimesOut) {
   auto model = make_adapter("cmd:" + fake("silent"), {300ms, 0});
   const auto start = std::chrono::steady_clock::now();
   EXPECT_EQ(kind_of([&] { generate_utterance(*model, parse_sql("select name from Students", school()), school()); }),
             ErrorKind::Adapter);
   EXPECT_LT(std::chrono::steady_clock::now() - start, 3s);
}

TEST(Adapter, CrashedAdapterFailsRequestsNotProcess) {
   auto model = make_adapter("cmd:" + fake("crash"), {2000ms, 0});
   const SqlAst q = parse_sql("select name from Students", school());
   EXPECT_EQ(kind_of([&] { generate_utterance(*model, q, school()); }), ErrorKind::Adapter);
   EXPECT_EQ(kind_of([&] { generate_utterance(*model, q, school()); }), ErrorKind::Adapter);
}

TEST(Adapter, BadHandshakeRejected) {
   EXPECT_THROW(make_adapter("cmd:" + fake("badshake"), {2000ms, 0}), Error);
   EXPECT_THROW(make_adapter("cmd:/nonexistent/adapter", {2000ms, 0}), Error);
}

TEST(Adapter, ConformancePassesForServedBuiltin) {
   const auto report = check_conformance(served("perfect"), school(), 5s);
   EXPECT_TRUE(report.passed);
   for (const auto& f : report.failures) ADD_FAILURE() << f;
   EXPECT_TRUE(check_conformance(fake("echo"), school(), 5s).passed);
}

TEST(Adapter, ConformanceCatchesMisbehaviour) {
   for (const char* mode : {"empty", "silent", "crash", "badshake", "chatty", "dupe"}) {
      const auto report = check_conformance(fake(mode), school(), 500ms);
      EXPECT_FALSE(report.passed) << mode;
      EXPECT_FALSE(report.failures.empty()) << mode;
   }
}
