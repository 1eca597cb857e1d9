#include "cyclesql/fuzz.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <set>

#include <sqlite3.h>

#include "cyclesql/error.hpp"
#include "cyclesql/random.hpp"

namespace cyclesql {

nlohmann::json ValuePools::to_json() const {
   return {{"number_min", number_min},
           {"number_max", number_max},
           {"decimal_fraction", decimal_fraction},
           {"text_pool_size", text_pool_size},
           {"original_text_fraction", original_text_fraction},
           {"year_min", year_min},
           {"year_max", year_max}};
}

void FuzzConfig::validate() const {
   if (instances < 1) throw Error(ErrorKind::Domain, "fuzz testing needs at least one instance");
   if (min_rows < 1 || max_rows < min_rows)
      throw Error(ErrorKind::Domain, "fuzz row range " + std::to_string(min_rows) + ".." + std::to_string(max_rows) + " is empty");
   if (pools.number_max < pools.number_min || pools.year_max < pools.year_min || pools.text_pool_size < 1)
      throw Error(ErrorKind::Domain, "fuzz value pools have an empty range");
}

nlohmann::json FuzzConfig::to_json() const {
   return {{"instances", instances},
           {"rows_per_table", {min_rows, max_rows}},
           {"seed", seed},
           {"value_pools", pools.to_json()},
           {"semantics", std::string(to_string(semantics))},
           {"timeout_ms", timeout.count()}};
}

std::filesystem::path instance_path(const DatabaseEnv& env, const FuzzConfig& cfg, int instance_index) {
   return cfg.scratch / env.db_id / ("fuzz_" + std::to_string(cfg.seed) + "_" + std::to_string(instance_index) + ".sqlite");
}

namespace {

class Writer {
   public:
   explicit Writer(const std::filesystem::path& path) {
      if (sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr) != SQLITE_OK) {
         std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
         sqlite3_close(db_);
         throw Error(ErrorKind::Io, "cannot create '" + path.string() + "': " + msg);
      }
   }
   ~Writer() { sqlite3_close(db_); }
   Writer(const Writer&) = delete;
   Writer& operator=(const Writer&) = delete;

   void exec(const std::string& sql) {
      char* err = nullptr;
      if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
         std::string msg = err ? err : "unknown error";
         sqlite3_free(err);
         throw Error(ErrorKind::Generation, msg + " in: " + sql);
      }
   }

   sqlite3* handle() { return db_; }

   private:
   sqlite3* db_ = nullptr;
};

class Statement {
   public:
   Statement(sqlite3* db, const std::string& sql) {
      if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK)
         throw Error(ErrorKind::Generation, std::string(sqlite3_errmsg(db)) + " in: " + sql);
   }
   ~Statement() { sqlite3_finalize(stmt_); }
   Statement(const Statement&) = delete;
   Statement& operator=(const Statement&) = delete;
   sqlite3_stmt* get() { return stmt_; }

   private:
   sqlite3_stmt* stmt_ = nullptr;
};

struct Schema {
   std::vector<std::string> ddl;
   std::map<std::string, bool> not_null; // lowercase "table.column"
};

std::string lower(std::string s) {
   std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
   return s;
}

Schema read_schema(Database& original, const DatabaseEnv& env) {
   Schema schema;
   const Denotation ddl = original.execute(
      "select sql from sqlite_master where sql is not null and type in ('table', 'index', 'view') "
      "and name not like 'sqlite_%' order by rowid");
   for (const auto& row : ddl.rows) schema.ddl.push_back(row[0].text);
   for (const auto& t : env.tables) {
      const Denotation info = original.execute("select name, \"notnull\", pk from pragma_table_info(" +
                                               Cell::of(t.name).sql_literal() + ")");
      for (const auto& row : info.rows)
         schema.not_null[lower(t.name + "." + row[0].text)] = row[1].number != 0.0 || row[2].number != 0.0;
   }
   return schema;
}

std::string random_word(Rng& rng, int min_len, int max_len) {
   const auto len = rng.integer(min_len, max_len);
   std::string s;
   for (std::int64_t i = 0; i < len; ++i) s.push_back(static_cast<char>('a' + rng.index(26)));
   return s;
}

std::string random_date(Rng& rng, const ValuePools& pools) {
   using namespace std::chrono;
   const sys_days first = year{pools.year_min} / January / 1;
   const sys_days last = year{pools.year_max} / December / 31;
   const year_month_day d{first + days{rng.integer(0, (last - first).count())}};
   char buf[16];
   std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                 static_cast<unsigned>(d.day()));
   return buf;
}

enum class Storage { Integer, Real, Text, Date, Boolean };

Storage storage_of(const ColumnRef& c) {
   switch (c.logical_type) {
      case LogicalType::Number: return Storage::Real;
      case LogicalType::Text: return Storage::Text;
      case LogicalType::Time: return Storage::Date;
      case LogicalType::Boolean: return Storage::Boolean;
      case LogicalType::Other: break;
   }
   const std::string t = lower(c.type_name);
   if (t.find("int") != std::string::npos) return Storage::Integer;
   if (t.find("real") != std::string::npos || t.find("floa") != std::string::npos || t.find("doub") != std::string::npos ||
       t.find("num") != std::string::npos || t.find("dec") != std::string::npos)
      return Storage::Real;
   return Storage::Text;
}

class Generator {
   public:
   Generator(const DatabaseEnv& env, const FuzzConfig& cfg, Rng& rng, Database& original, const Schema& schema)
       : env_(env), cfg_(cfg), rng_(rng), original_(original), schema_(schema) {
      for (const auto& fk : env.foreign_keys) references_.try_emplace(key(fk.from), fk.to);
      for (const auto& pk : env.primary_keys) pk_columns_[pk.table_index].push_back(pk.column_index);
   }

   void run(Writer& out) {
      for (int t : table_order()) fill_table(out, t);
   }

   private:
   using Key = std::pair<int, int>;
   static Key key(const ColumnRef& c) { return {c.table_index, c.column_index}; }

   // Parents before children; tables on FK cycles follow in ordinal order.
   std::vector<int> table_order() const {
      const int n = static_cast<int>(env_.tables.size());
      std::vector<std::set<int>> parents(static_cast<std::size_t>(n));
      for (const auto& [child, parent] : references_)
         if (child.first != parent.table_index) parents[static_cast<std::size_t>(child.first)].insert(parent.table_index);
      std::vector<int> order;
      std::vector<bool> done(static_cast<std::size_t>(n), false);
      for (bool progress = true; progress;) {
         progress = false;
         for (int t = 0; t < n; ++t) {
            if (done[static_cast<std::size_t>(t)]) continue;
            const auto& ps = parents[static_cast<std::size_t>(t)];
            if (std::all_of(ps.begin(), ps.end(), [&](int p) { return done[static_cast<std::size_t>(p)]; })) {
               done[static_cast<std::size_t>(t)] = true;
               order.push_back(t);
               progress = true;
               break;
            }
         }
      }
      for (int t = 0; t < n; ++t)
         if (!done[static_cast<std::size_t>(t)]) order.push_back(t);
      return order;
   }

   bool required(const ColumnRef& c) const {
      auto it = schema_.not_null.find(lower(env_.tables[static_cast<std::size_t>(c.table_index)].name + "." + c.name));
      return it != schema_.not_null.end() && it->second;
   }

   std::vector<std::string> text_pool(const ColumnRef& c) {
      const auto& pools = cfg_.pools;
      std::vector<std::string> pool;
      auto add = [&](std::string v) {
         if (std::find(pool.begin(), pool.end(), v) == pool.end()) pool.push_back(std::move(v));
      };
      std::vector<std::string> stored;
      for (const auto& cell : original_.distinct_values(env_, c))
         if (cell.kind == Cell::Kind::Text) stored.push_back(cell.text);
      const auto from_original = static_cast<std::size_t>(pools.text_pool_size * pools.original_text_fraction + 0.5);
      for (std::size_t i = 0; i < from_original && !stored.empty(); ++i) {
         const std::size_t j = rng_.index(stored.size());
         add(stored[j]);
         stored.erase(stored.begin() + static_cast<std::ptrdiff_t>(j));
      }
      for (int guard = 0; pool.size() < static_cast<std::size_t>(pools.text_pool_size) && guard < 1000; ++guard) {
         if (rng_.bernoulli(0.5)) {
            const auto& t = env_.tables[rng_.index(env_.tables.size())];
            add(rng_.bernoulli(0.5) ? t.name : t.columns[rng_.index(t.columns.size())].name);
         } else {
            add(random_word(rng_, 3, 8));
         }
      }
      return pool;
   }

   Cell number_cell(bool unique_key, std::size_t rows) {
      const auto& p = cfg_.pools;
      if (unique_key) return Cell::of(static_cast<double>(rng_.integer(1, std::max<std::int64_t>(p.number_max, 4 * static_cast<std::int64_t>(rows)))));
      if (rng_.bernoulli(p.decimal_fraction)) return Cell::of(static_cast<double>(rng_.integer(p.number_min * 100, p.number_max * 100)) / 100.0);
      return Cell::of(static_cast<double>(rng_.integer(p.number_min, p.number_max)));
   }

   Cell fresh_value(const ColumnRef& c, const std::vector<std::string>& pool, bool unique_key, std::size_t rows) {
      switch (storage_of(c)) {
         case Storage::Integer:
            return unique_key ? number_cell(true, rows) : Cell::of(static_cast<double>(rng_.integer(cfg_.pools.number_min, cfg_.pools.number_max)));
         case Storage::Real: return number_cell(unique_key, rows);
         case Storage::Date: return Cell::of(random_date(rng_, cfg_.pools));
         case Storage::Boolean: return Cell::of(static_cast<double>(rng_.integer(0, 1)));
         case Storage::Text:
            if (unique_key || pool.empty()) return Cell::of(random_word(rng_, 4, 10));
            return Cell::of(pool[rng_.index(pool.size())]);
      }
      return Cell::null();
   }

   void fill_table(Writer& out, int t) {
      const auto& table = env_.tables[static_cast<std::size_t>(t)];
      if (table.columns.empty()) return;
      const auto& pk = pk_columns_[t];
      const bool single_pk = pk.size() == 1;
      const auto rows = static_cast<std::size_t>(rng_.integer(cfg_.min_rows, cfg_.max_rows));

      // Plain columns first so same-row self references can see them.
      std::vector<int> order;
      for (const auto& c : table.columns)
         if (!references_.contains(key(c))) order.push_back(c.column_index);
      for (const auto& c : table.columns)
         if (references_.contains(key(c))) order.push_back(c.column_index);

      std::map<int, std::vector<std::string>> pools;
      for (const auto& c : table.columns)
         if (storage_of(c) == Storage::Text && !references_.contains(key(c))) pools[c.column_index] = text_pool(c);

      std::string sql = "insert into " + quote_identifier(table.name) + " (";
      for (std::size_t i = 0; i < order.size(); ++i)
         sql += (i ? ", " : "") + quote_identifier(table.columns[static_cast<std::size_t>(order[i])].name);
      sql += ") values (";
      for (std::size_t i = 0; i < order.size(); ++i) sql += i ? ", ?" : "?";
      sql += ")";
      Statement insert(out.handle(), sql);

      std::set<std::vector<std::string>> seen_keys;
      for (std::size_t r = 0; r < rows; ++r) {
         for (int attempt = 0; attempt < 50; ++attempt) {
            std::map<int, Cell> row;
            for (int ci : order) {
               const ColumnRef& c = table.columns[static_cast<std::size_t>(ci)];
               const bool unique_key = single_pk && pk.front() == ci;
               auto ref = references_.find(key(c));
               if (ref == references_.end()) {
                  row[ci] = fresh_value(c, pools[ci], unique_key, rows);
                  continue;
               }
               const ColumnRef& target = ref->second;
               std::vector<Cell> candidates;
               if (auto it = generated_.find(key(target)); it != generated_.end()) candidates = it->second;
               if (target.table_index == t && row.contains(target.column_index)) candidates.push_back(row[target.column_index]);
               if (candidates.empty()) {
                  if (required(c) || std::find(pk.begin(), pk.end(), ci) != pk.end())
                     throw Error(ErrorKind::Generation, "'" + table.name + "." + c.name + "' references '" +
                                                           env_.tables[static_cast<std::size_t>(target.table_index)].name +
                                                           "." + target.name + "' which has no generated values");
                  row[ci] = Cell::null();
               } else {
                  row[ci] = candidates[rng_.index(candidates.size())];
               }
            }
            if (!pk.empty()) {
               std::vector<std::string> tuple;
               for (int ci : pk) tuple.push_back(row[ci].sql_literal());
               if (seen_keys.contains(tuple)) continue;
               if (!try_insert(out, insert, order, row)) continue;
               seen_keys.insert(std::move(tuple));
            } else if (!try_insert(out, insert, order, row)) {
               continue;
            }
            for (auto& [ci, cell] : row)
               if (cell.kind != Cell::Kind::Null) generated_[{t, ci}].push_back(cell);
            break;
         }
      }
   }

   bool try_insert(Writer& out, Statement& insert, const std::vector<int>& order, std::map<int, Cell>& row) {
      sqlite3_stmt* stmt = insert.get();
      sqlite3_reset(stmt);
      sqlite3_clear_bindings(stmt);
      for (std::size_t i = 0; i < order.size(); ++i) {
         const Cell& cell = row[order[i]];
         const int pos = static_cast<int>(i) + 1;
         switch (cell.kind) {
            case Cell::Kind::Null: sqlite3_bind_null(stmt, pos); break;
            case Cell::Kind::Number:
               if (cell.number == static_cast<double>(static_cast<std::int64_t>(cell.number)))
                  sqlite3_bind_int64(stmt, pos, static_cast<std::int64_t>(cell.number));
               else
                  sqlite3_bind_double(stmt, pos, cell.number);
               break;
            case Cell::Kind::Text:
               sqlite3_bind_text(stmt, pos, cell.text.data(), static_cast<int>(cell.text.size()), SQLITE_TRANSIENT);
               break;
         }
      }
      const int rc = sqlite3_step(stmt);
      if (rc == SQLITE_DONE) return true;
      if ((rc & 0xff) == SQLITE_CONSTRAINT) return false;
      throw Error(ErrorKind::Generation, sqlite3_errmsg(out.handle()));
   }

   const DatabaseEnv& env_;
   const FuzzConfig& cfg_;
   Rng& rng_;
   Database& original_;
   const Schema& schema_;
   std::map<Key, ColumnRef> references_;
   std::map<int, std::vector<int>> pk_columns_;
   std::map<Key, std::vector<Cell>> generated_;
};

void check_integrity(const DatabaseEnv& env, const std::filesystem::path& path) {
   Database db(path);
   auto count = [&](const std::string& sql) { return db.execute(sql).rows.at(0).at(0).number; };
   for (const auto& fk : env.foreign_keys) {
      const auto& child = env.tables[static_cast<std::size_t>(fk.from.table_index)].name;
      const auto& parent = env.tables[static_cast<std::size_t>(fk.to.table_index)].name;
      const std::string c = quote_identifier(fk.from.name);
      if (count("select count(*) from " + quote_identifier(child) + " where " + c + " is not null and " + c +
                " not in (select " + quote_identifier(fk.to.name) + " from " + quote_identifier(parent) + ")") != 0)
         throw Error(ErrorKind::Generation, "generated '" + env.db_id + "' violates " + child + "." + fk.from.name +
                                               " -> " + parent + "." + fk.to.name);
   }
   std::map<int, std::vector<std::string>> pk_columns;
   for (const auto& pk : env.primary_keys) pk_columns[pk.table_index].push_back(quote_identifier(pk.name));
   for (const auto& [t, cols] : pk_columns) {
      std::string list;
      for (const auto& c : cols) list += (list.empty() ? "" : ", ") + c;
      const auto& table = env.tables[static_cast<std::size_t>(t)].name;
      if (count("select count(*) from (select 1 from " + quote_identifier(table) + " group by " + list +
                " having count(*) > 1)") != 0)
         throw Error(ErrorKind::Generation, "generated '" + env.db_id + "' repeats a primary key of " + table);
   }
}

} // namespace

DatabaseEnv randomize_db(const DatabaseEnv& env, const FuzzConfig& cfg, int instance_index) {
   cfg.validate();
   const auto path = instance_path(env, cfg, instance_index);
   std::error_code ec;
   std::filesystem::create_directories(path.parent_path(), ec);
   if (ec) throw Error(ErrorKind::Io, "cannot create scratch directory '" + path.parent_path().string() + "': " + ec.message());
   std::filesystem::remove(path, ec);

   Rng rng(derive_seed(derive_seed(cfg.seed, hash_bytes(env.db_id)), static_cast<std::uint64_t>(instance_index)));
   Database original(env.store_path);
   const Schema schema = read_schema(original, env);
   {
      Writer out(path);
      out.exec("pragma journal_mode = off; pragma synchronous = off; pragma foreign_keys = off; begin");
      for (const auto& ddl : schema.ddl) out.exec(ddl);
      Generator(env, cfg, rng, original, schema).run(out);
      out.exec("commit");
   }
   check_integrity(env, path);
   DatabaseEnv copy = env;
   copy.store_path = path;
   return copy;
}

FuzzInstanceCache::FuzzInstanceCache(FuzzConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

FuzzInstanceCache::~FuzzInstanceCache() {
   if (cfg_.keep) return;
   std::error_code ec;
   for (const auto& [key, entry] : entries_)
      if (!entry->path.empty()) std::filesystem::remove(entry->path, ec);
}

const std::filesystem::path& FuzzInstanceCache::instance(const DatabaseEnv& env, int instance_index) {
   std::shared_ptr<Entry> entry;
   {
      std::lock_guard lock(mutex_);
      auto& slot = entries_[{env.db_id, instance_index}];
      if (!slot) slot = std::make_shared<Entry>();
      entry = slot;
   }
   std::call_once(entry->once, [&] {
      try {
         entry->path = randomize_db(env, cfg_, instance_index).store_path;
      } catch (...) {
         entry->error = std::current_exception();
      }
   });
   if (entry->error) std::rethrow_exception(entry->error);
   return entry->path;
}

int FuzzResult::fragile_count() const { return static_cast<int>(std::count(fragile.begin(), fragile.end(), true)); }

FuzzResult fuzz_match(std::string_view gold, std::string_view pred, const DatabaseEnv& env, FuzzInstanceCache& cache) {
   const FuzzConfig& cfg = cache.config();
   FuzzResult result;
   result.per_instance.assign(static_cast<std::size_t>(cfg.instances), false);
   result.fragile.assign(static_cast<std::size_t>(cfg.instances), false);
   bool all_agree = true;
   for (int i = 0; i < cfg.instances; ++i) {
      Database db(cache.instance(env, i));
      Denotation g;
      try {
         g = db.execute(gold, cfg.timeout);
      } catch (const Error&) {
         result.fragile[static_cast<std::size_t>(i)] = true;
         continue;
      }
      bool ok = false;
      try {
         ok = denotations_equal(g, db.execute(pred, cfg.timeout), cfg.semantics);
      } catch (const Error&) {
      }
      result.per_instance[static_cast<std::size_t>(i)] = ok;
      all_agree = all_agree && ok;
   }
   result.match = all_agree && result.fragile_count() < cfg.instances;
   return result;
}

FuzzResult fuzz_match(std::string_view gold, std::string_view pred, const DatabaseEnv& env, const FuzzConfig& cfg) {
   FuzzInstanceCache cache(cfg);
   return fuzz_match(gold, pred, env, cache);
}

} // namespace cyclesql
