#include "cyclesql/exec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include <sqlite3.h>

#include "cyclesql/error.hpp"
#include "cyclesql/sql_lexer.hpp"

namespace cyclesql {

std::string Cell::sql_literal() const {
   switch (kind) {
      case Kind::Null: return "null";
      case Kind::Number: {
         if (std::nearbyint(number) == number && std::fabs(number) < 1e15) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.0f", number);
            return buf;
         }
         char buf[40];
         std::snprintf(buf, sizeof buf, "%.17g", number);
         return buf;
      }
      case Kind::Text: {
         std::string out = "'";
         for (char c : text) {
            if (c == '\'') out += "''";
            else out.push_back(c);
         }
         return out + "'";
      }
   }
   return "null";
}

bool cells_equal(const Cell& a, const Cell& b) {
   if (a.kind != b.kind) return false;
   switch (a.kind) {
      case Cell::Kind::Null: return true;
      case Cell::Kind::Number: return std::fabs(a.number - b.number) <= kNumericTolerance;
      case Cell::Kind::Text: return a.text == b.text;
   }
   return false;
}

std::string_view to_string(EqualitySemantics semantics) {
   return semantics == EqualitySemantics::Bag ? "bag" : "set";
}

EqualitySemantics equality_semantics_from_string(std::string_view name) {
   if (name == "bag") return EqualitySemantics::Bag;
   if (name == "set") return EqualitySemantics::Set;
   throw Error(ErrorKind::Format, "unknown equality semantics '" + std::string(name) + "' (expected bag or set)");
}

namespace {

int compare_cells(const Cell& a, const Cell& b) {
   if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
   switch (a.kind) {
      case Cell::Kind::Null: return 0;
      case Cell::Kind::Number:
         if (std::fabs(a.number - b.number) <= kNumericTolerance) return 0;
         return a.number < b.number ? -1 : 1;
      case Cell::Kind::Text: return a.text.compare(b.text) < 0 ? -1 : (a.text == b.text ? 0 : 1);
   }
   return 0;
}

bool row_less(const Row& a, const Row& b) {
   for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
      if (int c = compare_cells(a[i], b[i]); c != 0) return c < 0;
   return a.size() < b.size();
}

bool rows_equal(const Row& a, const Row& b) {
   return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), cells_equal);
}

bool sequences_equal(const std::vector<Row>& a, const std::vector<Row>& b) {
   return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), rows_equal);
}

std::vector<Row> normalized(std::vector<Row> rows, EqualitySemantics semantics) {
   std::sort(rows.begin(), rows.end(), row_less);
   if (semantics == EqualitySemantics::Set) rows.erase(std::unique(rows.begin(), rows.end(), rows_equal), rows.end());
   return rows;
}

struct Deadline {
   std::chrono::steady_clock::time_point at;
   bool expired = false;
};

int progress_callback(void* data) {
   auto* d = static_cast<Deadline*>(data);
   if (std::chrono::steady_clock::now() >= d->at) {
      d->expired = true;
      return 1;
   }
   return 0;
}

Cell read_cell(sqlite3_stmt* stmt, int i) {
   switch (sqlite3_column_type(stmt, i)) {
      case SQLITE_NULL: return Cell::null();
      case SQLITE_INTEGER: return Cell::of(static_cast<double>(sqlite3_column_int64(stmt, i)));
      case SQLITE_FLOAT: return Cell::of(sqlite3_column_double(stmt, i));
      default: {
         const auto* p = static_cast<const char*>(sqlite3_column_blob(stmt, i));
         const int n = sqlite3_column_bytes(stmt, i);
         return Cell::of(std::string(p ? p : "", static_cast<std::size_t>(n)));
      }
   }
}

bool only_whitespace(const char* tail) {
   for (; tail && *tail; ++tail)
      if (!std::isspace(static_cast<unsigned char>(*tail)) && *tail != ';') return false;
   return true;
}

} // namespace

bool denotations_equal(const Denotation& a, const Denotation& b, EqualitySemantics semantics) {
   if (a.column_count != b.column_count) return false;
   if (a.ordered || b.ordered) {
      if (semantics == EqualitySemantics::Bag) return sequences_equal(a.rows, b.rows);
      auto dedup = [](std::vector<Row> rows) {
         std::vector<Row> out;
         for (auto& r : rows)
            if (std::none_of(out.begin(), out.end(), [&](const Row& o) { return rows_equal(o, r); })) out.push_back(std::move(r));
         return out;
      };
      return sequences_equal(dedup(a.rows), dedup(b.rows));
   }
   return sequences_equal(normalized(a.rows, semantics), normalized(b.rows, semantics));
}

Database::Database(const std::filesystem::path& path) : path_(path) {
   std::error_code ec;
   if (!std::filesystem::is_regular_file(path, ec))
      throw Error(ErrorKind::Io, "database file '" + path.string() + "' does not exist");
   const int rc = sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr);
   if (rc != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : sqlite3_errstr(rc);
      sqlite3_close(db_);
      db_ = nullptr;
      throw Error(ErrorKind::Io, "cannot open database '" + path.string() + "': " + msg);
   }
}

Database::~Database() {
   if (db_) sqlite3_close(db_);
}

Database::Database(Database&& other) noexcept
    : path_(std::move(other.path_)), db_(std::exchange(other.db_, nullptr)), value_cache_(std::move(other.value_cache_)) {}

Database& Database::operator=(Database&& other) noexcept {
   if (this != &other) {
      if (db_) sqlite3_close(db_);
      path_ = std::move(other.path_);
      db_ = std::exchange(other.db_, nullptr);
      value_cache_ = std::move(other.value_cache_);
   }
   return *this;
}

Denotation Database::execute(std::string_view sql, std::chrono::milliseconds timeout) {
   sqlite3_stmt* stmt = nullptr;
   const char* tail = nullptr;
   const std::string text(sql);
   Deadline deadline{std::chrono::steady_clock::now() + timeout};
   sqlite3_progress_handler(db_, 1000, progress_callback, &deadline);
   struct Cleanup {
      sqlite3* db;
      sqlite3_stmt*& stmt;
      ~Cleanup() {
         sqlite3_finalize(stmt);
         sqlite3_progress_handler(db, 0, nullptr, nullptr);
      }
   } cleanup{db_, stmt};

   int rc = sqlite3_prepare_v2(db_, text.c_str(), static_cast<int>(text.size()), &stmt, &tail);
   if (rc != SQLITE_OK) {
      if (deadline.expired) throw Error(ErrorKind::Timeout, "query exceeded " + std::to_string(timeout.count()) + " ms");
      throw Error(ErrorKind::Execution, sqlite3_errmsg(db_));
   }
   if (!stmt) throw Error(ErrorKind::Execution, "empty statement");
   if (!only_whitespace(tail)) throw Error(ErrorKind::RejectedStatement, "multiple statements are not executed");
   if (!sqlite3_stmt_readonly(stmt)) throw Error(ErrorKind::RejectedStatement, "statement would modify the database");

   Denotation out;
   out.column_count = static_cast<std::size_t>(sqlite3_column_count(stmt));
   out.ordered = has_top_level_order_by(sql);
   while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
      Row row;
      row.reserve(out.column_count);
      for (int i = 0; i < static_cast<int>(out.column_count); ++i) row.push_back(read_cell(stmt, i));
      out.rows.push_back(std::move(row));
   }
   if (rc != SQLITE_DONE) {
      if (deadline.expired || rc == SQLITE_INTERRUPT)
         throw Error(ErrorKind::Timeout, "query exceeded " + std::to_string(timeout.count()) + " ms");
      throw Error(ErrorKind::Execution, sqlite3_errmsg(db_));
   }
   return out;
}

const std::vector<Cell>& Database::distinct_values(const DatabaseEnv& env, const ColumnRef& column) {
   const auto key = std::make_pair(column.table_index, column.column_index);
   if (auto it = value_cache_.find(key); it != value_cache_.end()) return it->second;
   const ColumnRef& c = env.column(column.table_index, column.column_index);
   const std::string& table = env.tables[static_cast<std::size_t>(c.table_index)].name;
   const std::string col = quote_identifier(c.name);
   const std::string sql = "select distinct " + col + " from " + quote_identifier(table) + " where " + col +
                           " is not null order by " + col;
   Denotation d = execute(sql, kDefaultTimeout);
   std::vector<Cell> values;
   values.reserve(d.rows.size());
   for (auto& r : d.rows) values.push_back(std::move(r.front()));
   return value_cache_.emplace(key, std::move(values)).first->second;
}

Database& ConnectionCache::open(const DatabaseEnv& env) { return open(env.store_path); }

Database& ConnectionCache::open(const std::filesystem::path& path) {
   auto it = connections_.find(path);
   if (it == connections_.end()) it = connections_.emplace(path, std::make_unique<Database>(path)).first;
   return *it->second;
}

Denotation execute(std::string_view sql, const DatabaseEnv& env, std::chrono::milliseconds timeout) {
   Database db(env.store_path);
   return db.execute(sql, timeout);
}

std::string quote_identifier(std::string_view name) {
   std::string out = "\"";
   for (char c : name) {
      if (c == '"') out += "\"\"";
      else out.push_back(c);
   }
   return out + "\"";
}

} // namespace cyclesql
