#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cyclesql/schema.hpp"

struct sqlite3;

namespace cyclesql {

/// Normalized result cell: integers and reals collapse into one numeric kind.
struct Cell {
   enum class Kind : std::uint8_t { Null, Number, Text };
   Kind kind = Kind::Null;
   double number = 0.0;
   std::string text;

   static Cell null() { return {}; }
   static Cell of(double v) { return {Kind::Number, v, {}}; }
   static Cell of(std::string v) { return {Kind::Text, 0.0, std::move(v)}; }
   /// Literal form suitable for embedding into SQL.
   std::string sql_literal() const;
};

inline constexpr double kNumericTolerance = 1e-6;

bool cells_equal(const Cell& a, const Cell& b);

using Row = std::vector<Cell>;

struct Denotation {
   std::vector<Row> rows;
   std::size_t column_count = 0;
   /// Produced by a query with a top-level ORDER BY.
   bool ordered = false;

   bool empty() const { return rows.empty(); }
};

enum class EqualitySemantics { Bag, Set };

std::string_view to_string(EqualitySemantics semantics);
EqualitySemantics equality_semantics_from_string(std::string_view name);

/// Column counts must agree. If either side is ordered, rows are compared as
/// sequences; otherwise as multisets (Bag) or after deduplication (Set).
bool denotations_equal(const Denotation& a, const Denotation& b, EqualitySemantics semantics = EqualitySemantics::Bag);

inline constexpr std::chrono::milliseconds kDefaultTimeout{5000};

/// Read-only connection to one database file. Not shareable across threads.
class Database {
   public:
   explicit Database(const std::filesystem::path& path);
   ~Database();
   Database(Database&& other) noexcept;
   Database& operator=(Database&& other) noexcept;
   Database(const Database&) = delete;
   Database& operator=(const Database&) = delete;

   /// Runs a single read-only statement. Errors: Execution (engine message),
   /// Timeout (budget exceeded), RejectedStatement (writes, multiple statements).
   Denotation execute(std::string_view sql, std::chrono::milliseconds timeout = kDefaultTimeout);

   /// Distinct non-null stored values of a column, in engine order; cached.
   const std::vector<Cell>& distinct_values(const DatabaseEnv& env, const ColumnRef& column);

   const std::filesystem::path& path() const { return path_; }

   private:
   std::filesystem::path path_;
   sqlite3* db_ = nullptr;
   std::map<std::pair<int, int>, std::vector<Cell>> value_cache_;
};

/// Per-worker cache of open connections keyed by database file.
class ConnectionCache {
   public:
   Database& open(const DatabaseEnv& env);
   Database& open(const std::filesystem::path& path);

   private:
   std::map<std::filesystem::path, std::unique_ptr<Database>> connections_;
};

/// One-shot execution against the environment's database file.
Denotation execute(std::string_view sql, const DatabaseEnv& env, std::chrono::milliseconds timeout = kDefaultTimeout);

/// Double-quoted SQL identifier.
std::string quote_identifier(std::string_view name);

} // namespace cyclesql
