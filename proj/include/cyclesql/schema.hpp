#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cyclesql {

enum class LogicalType : std::uint8_t { Text, Number, Time, Boolean, Other };

std::string_view to_string(LogicalType type);
/// Closed mapping from schema-file type strings; unknown strings map to Other.
LogicalType logical_type_from_string(std::string_view type_name);

/// A column of one database. Identity is (table_index, column_index); the
/// remaining fields are derived from the schema and carried for convenience.
struct ColumnRef {
   int table_index = -1;
   int column_index = -1;
   std::string name;
   LogicalType logical_type = LogicalType::Other;
   /// Primary key or endpoint of a foreign key.
   bool is_key = false;
   /// Type string as written in the schema file.
   std::string type_name;

   friend bool operator==(const ColumnRef& a, const ColumnRef& b) {
      return a.table_index == b.table_index && a.column_index == b.column_index;
   }
   friend std::strong_ordering operator<=>(const ColumnRef& a, const ColumnRef& b) {
      if (auto c = a.table_index <=> b.table_index; c != 0) return c;
      return a.column_index <=> b.column_index;
   }
};

struct Table {
   std::string name;
   std::vector<ColumnRef> columns;
};

struct ForeignKey {
   ColumnRef from;
   ColumnRef to;
};

/// An equality join between two columns, left = right.
struct JoinCondition {
   ColumnRef left;
   ColumnRef right;

   friend bool operator==(const JoinCondition&, const JoinCondition&) = default;
};

/// Schema plus the location of the executable database instance.
struct DatabaseEnv {
   std::string db_id;
   std::vector<Table> tables;
   std::vector<ForeignKey> foreign_keys;
   std::vector<ColumnRef> primary_keys;
   std::filesystem::path store_path;

   const ColumnRef& column(int table_index, int column_index) const;
   std::optional<int> find_table(std::string_view name) const;
   std::optional<int> find_column(int table_index, std::string_view name) const;
   std::size_t column_count() const;
   /// All columns in table order.
   std::vector<ColumnRef> all_columns() const;
   bool is_primary_key(const ColumnRef& column) const;
   /// True when a foreign key links the two columns in either direction.
   bool linked_by_foreign_key(const ColumnRef& a, const ColumnRef& b) const;
};

using SchemaIndex = std::map<std::string, DatabaseEnv, std::less<>>;

/// Reads a schema file in the Spider tables layout. Store paths resolve to
/// <data_root>/<db_id>/<db_id>.sqlite.
std::vector<DatabaseEnv> load_schemas(const std::filesystem::path& file,
                                      const std::filesystem::path& data_root = {});
std::vector<DatabaseEnv> parse_schemas(const nlohmann::json& document,
                                       const std::filesystem::path& data_root = {});
DatabaseEnv parse_schema_entry(const nlohmann::json& entry, const std::filesystem::path& data_root = {});
/// Serializes one database back into a schema-file entry.
nlohmann::json schema_to_json(const DatabaseEnv& env);

SchemaIndex index_schemas(std::vector<DatabaseEnv> envs);
const DatabaseEnv& lookup_env(const SchemaIndex& index, std::string_view db_id);

/// Join conditions linking every requested table along shortest paths in the
/// undirected foreign-key graph. Multiple targets are attached greedily: the
/// nearest unconnected table (ties to the smallest ordinal) is joined next.
std::vector<JoinCondition> fk_join_path(const DatabaseEnv& env, const std::set<int>& tables);

/// Tables that the join conditions touch, in first-appearance order.
std::vector<int> tables_of(const std::vector<JoinCondition>& conditions);

} // namespace cyclesql
