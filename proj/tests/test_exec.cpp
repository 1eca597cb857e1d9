#include <gtest/gtest.h>

#include <chrono>

#include <sqlite3.h>

#include "cyclesql/error.hpp"
#include "cyclesql/exec.hpp"
#include "cyclesql/random.hpp"
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

Denotation rows(std::vector<Row> r, bool ordered = false) {
   Denotation d;
   d.column_count = r.empty() ? 1 : r[0].size();
   d.rows = std::move(r);
   d.ordered = ordered;
   return d;
}

std::filesystem::path make_big_db(int n) {
   const auto path = scratch_dir("big") / "big.sqlite";
   sqlite3* db = nullptr;
   sqlite3_open(path.c_str(), &db);
   std::string sql = "create table big (v integer); insert into big select value from generate_series(1, " + std::to_string(n) + ");";
   char* err = nullptr;
   if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
      sqlite3_free(err);
      // Older engines lack generate_series.
      sqlite3_exec(db,
                   ("create table if not exists big (v integer); with recursive s(x) as (select 1 union all select x + 1 from s "
                    "where x < " + std::to_string(n) + ") insert into big select x from s;").c_str(),
                   nullptr, nullptr, nullptr);
   }
   sqlite3_close(db);
   return path;
}

} // namespace

TEST(Exec, CountFriendRows) {
   Database db(school().store_path);
   const auto d = db.execute("select count ( * ) from Friend");
   ASSERT_EQ(d.rows.size(), 1u);
   EXPECT_TRUE(cells_equal(d.rows[0][0], Cell::of(4.0)));
}

TEST(Exec, CellNormalization) {
   Database db(school().store_path);
   const auto d = db.execute("select 1, 1.0, 'a', null, 0.1 + 0.2");
   ASSERT_EQ(d.column_count, 5u);
   EXPECT_TRUE(cells_equal(d.rows[0][0], d.rows[0][1]));
   EXPECT_EQ(d.rows[0][2].kind, Cell::Kind::Text);
   EXPECT_EQ(d.rows[0][3].kind, Cell::Kind::Null);
   EXPECT_TRUE(cells_equal(d.rows[0][4], Cell::of(0.3)));
   EXPECT_FALSE(cells_equal(Cell::of(1.0), Cell::of(1.001)));
   EXPECT_FALSE(cells_equal(Cell::of("1"), Cell::of(1.0)));
   EXPECT_TRUE(cells_equal(Cell::null(), Cell::null()));
   EXPECT_FALSE(cells_equal(Cell::null(), Cell::of(0.0)));
}

TEST(Exec, SqlLiteral) {
   EXPECT_EQ(Cell::of(3.0).sql_literal(), "3");
   EXPECT_EQ(Cell::of(2.5).sql_literal(), "2.5");
   EXPECT_EQ(Cell::of("O'Brien").sql_literal(), "'O''Brien'");
   EXPECT_EQ(Cell::null().sql_literal(), "null");
}

TEST(Exec, BagVersusSet) {
   const auto a = rows({{Cell::of(1.0)}, {Cell::of(1.0)}, {Cell::of(2.0)}});
   const auto b = rows({{Cell::of(2.0)}, {Cell::of(1.0)}});
   EXPECT_FALSE(denotations_equal(a, b, EqualitySemantics::Bag));
   EXPECT_TRUE(denotations_equal(a, b, EqualitySemantics::Set));
}

TEST(Exec, OrderMattersOnlyWhenOrdered) {
   const auto a = rows({{Cell::of(1.0)}, {Cell::of(2.0)}});
   const auto b = rows({{Cell::of(2.0)}, {Cell::of(1.0)}});
   EXPECT_TRUE(denotations_equal(a, b));
   EXPECT_FALSE(denotations_equal(rows(a.rows, true), b));
   EXPECT_TRUE(denotations_equal(rows(a.rows, true), rows(a.rows, true)));
}

TEST(Exec, ColumnCountMustMatch) {
   Denotation a = rows({});
   Denotation b = rows({});
   b.column_count = 2;
   EXPECT_FALSE(denotations_equal(a, b));
}

TEST(Exec, PropertyEqualityIsPermutationInvariantAndSymmetric) {
   Rng rng(31);
   for (int trial = 0; trial < 300; ++trial) {
      std::vector<Row> r;
      const auto n = rng.index(8);
      for (std::size_t i = 0; i < n; ++i) {
         Row row;
         row.push_back(Cell::of(static_cast<double>(rng.integer(0, 3))));
         row.push_back(rng.bernoulli(0.2) ? Cell::null() : Cell::of(std::string(1, static_cast<char>('a' + rng.index(3)))));
         r.push_back(row);
      }
      auto shuffled = r;
      rng.shuffle(shuffled);
      Denotation a = rows(r), b = rows(shuffled);
      a.column_count = b.column_count = 2;
      EXPECT_TRUE(denotations_equal(a, b));
      EXPECT_TRUE(denotations_equal(b, a, EqualitySemantics::Set));
      if (!r.empty()) {
         auto dropped = shuffled;
         dropped.pop_back();
         Denotation c = rows(dropped);
         c.column_count = 2;
         EXPECT_FALSE(denotations_equal(a, c));
         EXPECT_EQ(denotations_equal(a, c), denotations_equal(c, a));
      }
   }
}

TEST(Exec, OrderedFlagFromTopLevelOrderBy) {
   Database db(school().store_path);
   EXPECT_TRUE(db.execute("select name from Students order by age").ordered);
   EXPECT_FALSE(db.execute("select name from Students where age > ( select min ( age ) from Students )").ordered);
}

TEST(Exec, RejectsWritesAndMultipleStatements) {
   Database db(school().store_path);
   EXPECT_EQ(kind_of([&] { db.execute("delete from Friend"); }), ErrorKind::RejectedStatement);
   EXPECT_EQ(kind_of([&] { db.execute("select 1; select 2"); }), ErrorKind::RejectedStatement);
   EXPECT_EQ(kind_of([&] { db.execute("select nosuch from Friend"); }), ErrorKind::Execution);
   EXPECT_EQ(db.execute("select count ( * ) from Friend").rows[0][0].number, 4.0);
}

TEST(Exec, MissingDatabase) {
   EXPECT_EQ(kind_of([] { Database db("/nonexistent/x.sqlite"); }), ErrorKind::Io);
}

TEST(Exec, TimeoutFiresWithinBudget) {
   const auto path = make_big_db(10000);
   Database db(path);
   ASSERT_EQ(db.execute("select count ( * ) from big").rows[0][0].number, 10000.0);
   const auto budget = std::chrono::milliseconds(200);
   const auto start = std::chrono::steady_clock::now();
   EXPECT_EQ(kind_of([&] { db.execute("select count ( * ) from big a, big b, big c", budget); }), ErrorKind::Timeout);
   EXPECT_LT(std::chrono::steady_clock::now() - start, 2 * budget);
   std::filesystem::remove_all(path.parent_path());
}

TEST(Exec, DistinctValues) {
   Database db(school().store_path);
   const auto& env = school();
   const auto& cities = db.distinct_values(env, env.column(0, 2));
   ASSERT_EQ(cities.size(), 4u);
   EXPECT_EQ(cities[0].text, "Fairview");
   const auto& ages = db.distinct_values(env, env.column(1, 3));
   EXPECT_EQ(ages.size(), 6u); // 12 13 14 15 16 18
   EXPECT_EQ(&db.distinct_values(env, env.column(0, 2)), &cities);
}

TEST(Exec, ConnectionCacheReuses) {
   ConnectionCache cache;
   Database& a = cache.open(school());
   Database& b = cache.open(school().store_path);
   EXPECT_EQ(&a, &b);
   EXPECT_NE(&a, &cache.open(counts()));
}

TEST(Exec, SemanticsNames) {
   EXPECT_EQ(equality_semantics_from_string("bag"), EqualitySemantics::Bag);
   EXPECT_EQ(equality_semantics_from_string("set"), EqualitySemantics::Set);
   EXPECT_EQ(kind_of([] { equality_semantics_from_string("list"); }), ErrorKind::Format);
   EXPECT_EQ(quote_identifier("a\"b"), "\"a\"\"b\"");
}
