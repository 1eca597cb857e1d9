#include <gtest/gtest.h>

#include <climits>

#include "cyclesql/error.hpp"
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

nlohmann::json school_entry() {
   auto doc = read_json_file(fixture_src() / "tables.json");
   return doc[0];
}

// Independent all-pairs shortest path over the undirected table graph.
std::vector<std::vector<int>> floyd(const DatabaseEnv& env) {
   const auto n = env.tables.size();
   std::vector<std::vector<int>> d(n, std::vector<int>(n, INT_MAX / 4));
   for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
   for (const auto& fk : env.foreign_keys) {
      const auto a = static_cast<std::size_t>(fk.from.table_index), b = static_cast<std::size_t>(fk.to.table_index);
      if (a != b) d[a][b] = d[b][a] = 1;
   }
   for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
         for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
   return d;
}

} // namespace

TEST(Schema, LoadsFixture) {
   const auto& env = school();
   ASSERT_EQ(env.tables.size(), 5u);
   EXPECT_EQ(env.tables[1].name, "Students");
   EXPECT_EQ(env.column_count(), 17u);
   EXPECT_EQ(env.primary_keys.size(), 7u);
   EXPECT_EQ(env.foreign_keys.size(), 5u);
   EXPECT_EQ(env.store_path, fixture_root() / "school" / "school.sqlite");
}

TEST(Schema, KeyAndLogicalTypes) {
   const auto& env = school();
   const auto& students = env.tables[1];
   EXPECT_TRUE(students.columns[0].is_key);  // id, primary key
   EXPECT_FALSE(students.columns[1].is_key); // name
   EXPECT_TRUE(students.columns[2].is_key);  // school, foreign key source
   EXPECT_EQ(students.columns[1].logical_type, LogicalType::Text);
   EXPECT_EQ(students.columns[3].logical_type, LogicalType::Number);
   EXPECT_TRUE(env.is_primary_key(students.columns[0]));
   EXPECT_FALSE(env.is_primary_key(students.columns[2]));
   EXPECT_TRUE(env.linked_by_foreign_key(env.tables[0].columns[0], students.columns[2]));
   EXPECT_TRUE(env.linked_by_foreign_key(students.columns[2], env.tables[0].columns[0]));
   for (const auto& fk : env.foreign_keys) {
      EXPECT_TRUE(fk.from.is_key);
      EXPECT_TRUE(fk.to.is_key);
   }
}

TEST(Schema, TypeMappingIsClosed) {
   EXPECT_EQ(logical_type_from_string("text"), LogicalType::Text);
   EXPECT_EQ(logical_type_from_string("NUMBER"), LogicalType::Number);
   EXPECT_EQ(logical_type_from_string("time"), LogicalType::Time);
   EXPECT_EQ(logical_type_from_string("boolean"), LogicalType::Boolean);
   EXPECT_EQ(logical_type_from_string("others"), LogicalType::Other);
   EXPECT_EQ(logical_type_from_string("blob"), LogicalType::Other);
}

TEST(Schema, LookupIsCaseInsensitive) {
   const auto& env = school();
   EXPECT_EQ(env.find_table("students"), 1);
   EXPECT_EQ(env.find_table("STUDENTS"), 1);
   EXPECT_FALSE(env.find_table("teachers").has_value());
   EXPECT_EQ(env.find_column(1, "AGE"), 3);
   EXPECT_EQ(kind_of([] { lookup_env(fixtures(), "nope"); }), ErrorKind::Resolution);
}

TEST(Schema, RejectsDanglingOrdinals) {
   auto entry = school_entry();
   entry["foreign_keys"].push_back({7, 99});
   EXPECT_EQ(kind_of([&] { parse_schema_entry(entry); }), ErrorKind::Integrity);
   entry = school_entry();
   entry["column_names_original"][3][0] = 9;
   EXPECT_EQ(kind_of([&] { parse_schema_entry(entry); }), ErrorKind::Integrity);
}

TEST(Schema, RejectsMalformedEntries) {
   auto entry = school_entry();
   entry.erase("column_types");
   EXPECT_EQ(kind_of([&] { parse_schema_entry(entry); }), ErrorKind::Format);
   EXPECT_EQ(kind_of([] { parse_schemas(nlohmann::json::object()); }), ErrorKind::Format);
   EXPECT_EQ(kind_of([] { load_schemas("/nonexistent/tables.json"); }), ErrorKind::Io);
}

TEST(Schema, RejectsDuplicates) {
   auto entry = school_entry();
   entry["table_names_original"][1] = "schools";
   EXPECT_EQ(kind_of([&] { parse_schema_entry(entry); }), ErrorKind::Integrity);
   auto doc = nlohmann::json::array({school_entry(), school_entry()});
   EXPECT_EQ(kind_of([&] { index_schemas(parse_schemas(doc)); }), ErrorKind::Integrity);
}

TEST(Schema, JsonRoundTrip) {
   const auto& env = school();
   const DatabaseEnv back = parse_schema_entry(schema_to_json(env));
   ASSERT_EQ(back.tables.size(), env.tables.size());
   for (std::size_t t = 0; t < env.tables.size(); ++t) {
      ASSERT_EQ(back.tables[t].columns.size(), env.tables[t].columns.size());
      for (std::size_t c = 0; c < env.tables[t].columns.size(); ++c) {
         EXPECT_EQ(back.tables[t].columns[c].name, env.tables[t].columns[c].name);
         EXPECT_EQ(back.tables[t].columns[c].is_key, env.tables[t].columns[c].is_key);
         EXPECT_EQ(back.tables[t].columns[c].logical_type, env.tables[t].columns[c].logical_type);
      }
   }
   EXPECT_EQ(back.primary_keys, env.primary_keys);
   ASSERT_EQ(back.foreign_keys.size(), env.foreign_keys.size());
}

TEST(Schema, JoinPathDirect) {
   const auto& env = school();
   const auto path = fk_join_path(env, {0, 1});
   ASSERT_EQ(path.size(), 1u);
   EXPECT_EQ(path[0].left.name, "school");
   EXPECT_EQ(path[0].right.name, "id");
   EXPECT_TRUE(fk_join_path(env, {3}).empty());
}

TEST(Schema, JoinPathThroughBridge) {
   // Students and Clubs meet only through Membership.
   const auto path = fk_join_path(school(), {1, 3});
   ASSERT_EQ(path.size(), 2u);
   const auto tables = tables_of(path);
   EXPECT_EQ(std::set<int>(tables.begin(), tables.end()), (std::set<int>{1, 3, 4}));
}

TEST(Schema, JoinPathDisconnected) {
   EXPECT_EQ(kind_of([] { fk_join_path(islands(), {0, 1}); }), ErrorKind::NoJoinPath);
   EXPECT_EQ(kind_of([] { fk_join_path(school(), {}); }), ErrorKind::Domain);
   EXPECT_EQ(kind_of([] { fk_join_path(school(), {0, 9}); }), ErrorKind::Domain);
}

TEST(Schema, PropertyPairPathsAreShortest) {
   const auto& env = school();
   const auto d = floyd(env);
   for (int a = 0; a < 5; ++a)
      for (int b = a + 1; b < 5; ++b) {
         const auto path = fk_join_path(env, {a, b});
         EXPECT_EQ(static_cast<int>(path.size()), d[a][b]) << a << "," << b;
         const auto t = tables_of(path);
         EXPECT_NE(std::find(t.begin(), t.end(), a), t.end());
         EXPECT_NE(std::find(t.begin(), t.end(), b), t.end());
      }
}

TEST(Schema, PropertyPathsConnectEveryRequestedTable) {
   const auto& env = school();
   Rng rng(17);
   for (int trial = 0; trial < 200; ++trial) {
      std::set<int> want;
      const auto k = 1 + rng.index(5);
      while (want.size() < k) want.insert(static_cast<int>(rng.index(5)));
      const auto path = fk_join_path(env, want);
      // Union-find over the path edges must put every requested table in one set.
      std::vector<int> parent(5);
      for (int i = 0; i < 5; ++i) parent[i] = i;
      std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
      for (const auto& c : path) {
         EXPECT_TRUE(env.linked_by_foreign_key(c.left, c.right));
         parent[find(c.left.table_index)] = find(c.right.table_index);
      }
      const int root = find(*want.begin());
      for (int t : want) EXPECT_EQ(find(t), root);
      EXPECT_EQ(path.size() + 1, tables_of(path).empty() ? 1 : tables_of(path).size()) << "path must be a tree";
   }
}

TEST(Schema, JoinPathDeterministic) {
   for (int i = 0; i < 5; ++i) EXPECT_EQ(fk_join_path(school(), {0, 2, 3}), fk_join_path(school(), {0, 2, 3}));
}
