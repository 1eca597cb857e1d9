#include "cyclesql/schema.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <unordered_set>

#include "cyclesql/error.hpp"

namespace cyclesql {

namespace {

std::string lower(std::string_view text) {
   std::string out(text);
   std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
   return out;
}

bool iequals(std::string_view a, std::string_view b) {
   return a.size() == b.size() &&
          std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
             return std::tolower(x) == std::tolower(y);
          });
}

[[noreturn]] void format_error(const std::string& db_id, const std::string& what) {
   throw Error(ErrorKind::Format, "database '" + db_id + "': " + what);
}

const nlohmann::json& field(const nlohmann::json& entry, const std::string& db_id, const char* name) {
   auto it = entry.find(name);
   if (it == entry.end()) format_error(db_id, std::string("missing field '") + name + "'");
   return *it;
}

int as_ordinal(const nlohmann::json& value, const std::string& db_id, const char* name) {
   if (!value.is_number_integer()) format_error(db_id, std::string("field '") + name + "' holds a non-integer ordinal");
   return value.get<int>();
}

} // namespace

std::string_view to_string(LogicalType type) {
   switch (type) {
      case LogicalType::Text: return "text";
      case LogicalType::Number: return "number";
      case LogicalType::Time: return "time";
      case LogicalType::Boolean: return "boolean";
      case LogicalType::Other: return "other";
   }
   return "other";
}

LogicalType logical_type_from_string(std::string_view type_name) {
   const std::string t = lower(type_name);
   if (t == "text") return LogicalType::Text;
   if (t == "number" || t == "int" || t == "real") return LogicalType::Number;
   if (t == "time" || t == "date" || t == "datetime") return LogicalType::Time;
   if (t == "boolean") return LogicalType::Boolean;
   return LogicalType::Other;
}

const ColumnRef& DatabaseEnv::column(int table_index, int column_index) const {
   return tables.at(static_cast<std::size_t>(table_index)).columns.at(static_cast<std::size_t>(column_index));
}

std::optional<int> DatabaseEnv::find_table(std::string_view name) const {
   for (std::size_t i = 0; i < tables.size(); ++i)
      if (iequals(tables[i].name, name)) return static_cast<int>(i);
   return std::nullopt;
}

std::optional<int> DatabaseEnv::find_column(int table_index, std::string_view name) const {
   const auto& cols = tables.at(static_cast<std::size_t>(table_index)).columns;
   for (std::size_t i = 0; i < cols.size(); ++i)
      if (iequals(cols[i].name, name)) return static_cast<int>(i);
   return std::nullopt;
}

std::size_t DatabaseEnv::column_count() const {
   std::size_t n = 0;
   for (const auto& t : tables) n += t.columns.size();
   return n;
}

std::vector<ColumnRef> DatabaseEnv::all_columns() const {
   std::vector<ColumnRef> out;
   out.reserve(column_count());
   for (const auto& t : tables) out.insert(out.end(), t.columns.begin(), t.columns.end());
   return out;
}

bool DatabaseEnv::is_primary_key(const ColumnRef& c) const {
   return std::find(primary_keys.begin(), primary_keys.end(), c) != primary_keys.end();
}

bool DatabaseEnv::linked_by_foreign_key(const ColumnRef& a, const ColumnRef& b) const {
   return std::any_of(foreign_keys.begin(), foreign_keys.end(), [&](const ForeignKey& fk) {
      return (fk.from == a && fk.to == b) || (fk.from == b && fk.to == a);
   });
}

DatabaseEnv parse_schema_entry(const nlohmann::json& entry, const std::filesystem::path& data_root) {
   if (!entry.is_object()) throw Error(ErrorKind::Format, "schema entry is not an object");
   auto id_it = entry.find("db_id");
   if (id_it == entry.end() || !id_it->is_string()) throw Error(ErrorKind::Format, "schema entry without string db_id");

   DatabaseEnv env;
   env.db_id = id_it->get<std::string>();
   const std::string& id = env.db_id;

   const auto& table_names = field(entry, id, "table_names_original");
   const auto& column_names = field(entry, id, "column_names_original");
   const auto& column_types = field(entry, id, "column_types");
   const auto& primary_keys = field(entry, id, "primary_keys");
   const auto& foreign_keys = field(entry, id, "foreign_keys");
   if (!table_names.is_array()) format_error(id, "field 'table_names_original' is not an array");
   if (!column_names.is_array()) format_error(id, "field 'column_names_original' is not an array");
   if (!column_types.is_array()) format_error(id, "field 'column_types' is not an array");
   if (!primary_keys.is_array()) format_error(id, "field 'primary_keys' is not an array");
   if (!foreign_keys.is_array()) format_error(id, "field 'foreign_keys' is not an array");
   if (column_types.size() != column_names.size())
      format_error(id, "field 'column_types' length differs from 'column_names_original'");

   for (const auto& name : table_names) {
      if (!name.is_string()) format_error(id, "field 'table_names_original' holds a non-string");
      env.tables.push_back(Table{name.get<std::string>(), {}});
   }

   // Global column ordinal (as used by primary_keys/foreign_keys) -> ColumnRef position.
   std::vector<std::optional<std::pair<int, int>>> by_ordinal;
   by_ordinal.reserve(column_names.size());
   for (std::size_t i = 0; i < column_names.size(); ++i) {
      const auto& pair = column_names[i];
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() || !pair[1].is_string())
         format_error(id, "field 'column_names_original' entry " + std::to_string(i) + " is not [table_index, name]");
      if (!column_types[i].is_string()) format_error(id, "field 'column_types' entry " + std::to_string(i) + " is not a string");
      const int table = pair[0].get<int>();
      if (table < 0) {
         by_ordinal.emplace_back(std::nullopt); // the "*" pseudo column
         continue;
      }
      if (static_cast<std::size_t>(table) >= env.tables.size())
         throw Error(ErrorKind::Integrity, "database '" + id + "': column " + std::to_string(i) + " references table " +
                                              std::to_string(table) + " which does not exist");
      auto& cols = env.tables[static_cast<std::size_t>(table)].columns;
      ColumnRef ref;
      ref.table_index = table;
      ref.column_index = static_cast<int>(cols.size());
      ref.name = pair[1].get<std::string>();
      ref.type_name = column_types[i].get<std::string>();
      ref.logical_type = logical_type_from_string(ref.type_name);
      cols.push_back(ref);
      by_ordinal.emplace_back(std::make_pair(table, ref.column_index));
   }

   auto resolve = [&](int ordinal, const char* what) -> ColumnRef& {
      if (ordinal < 0 || static_cast<std::size_t>(ordinal) >= by_ordinal.size() || !by_ordinal[ordinal])
         throw Error(ErrorKind::Integrity, "database '" + id + "': " + what + " references column ordinal " +
                                              std::to_string(ordinal) + " which does not exist");
      auto [t, c] = *by_ordinal[ordinal];
      return env.tables[static_cast<std::size_t>(t)].columns[static_cast<std::size_t>(c)];
   };

   for (const auto& pk : primary_keys) {
      // Newer releases list composite keys as nested arrays.
      if (pk.is_array()) {
         for (const auto& part : pk) env.primary_keys.push_back(resolve(as_ordinal(part, id, "primary_keys"), "primary key"));
      } else {
         env.primary_keys.push_back(resolve(as_ordinal(pk, id, "primary_keys"), "primary key"));
      }
   }
   for (const auto& fk : foreign_keys) {
      if (!fk.is_array() || fk.size() != 2) format_error(id, "field 'foreign_keys' entry is not a pair");
      const ColumnRef& from = resolve(as_ordinal(fk[0], id, "foreign_keys"), "foreign key");
      const ColumnRef& to = resolve(as_ordinal(fk[1], id, "foreign_keys"), "foreign key");
      env.foreign_keys.push_back(ForeignKey{from, to});
   }

   auto mark_key = [&](const ColumnRef& c) {
      env.tables[static_cast<std::size_t>(c.table_index)].columns[static_cast<std::size_t>(c.column_index)].is_key = true;
   };
   for (const auto& pk : env.primary_keys) mark_key(pk);
   for (const auto& fk : env.foreign_keys) {
      mark_key(fk.from);
      mark_key(fk.to);
   }
   // Refresh the copies held by the key lists so they carry is_key too.
   for (auto& pk : env.primary_keys) pk = env.column(pk.table_index, pk.column_index);
   for (auto& fk : env.foreign_keys) {
      fk.from = env.column(fk.from.table_index, fk.from.column_index);
      fk.to = env.column(fk.to.table_index, fk.to.column_index);
   }

   std::unordered_set<std::string> seen_tables;
   for (const auto& t : env.tables) {
      if (!seen_tables.insert(lower(t.name)).second)
         throw Error(ErrorKind::Integrity, "database '" + id + "': duplicate table name '" + t.name + "'");
      std::unordered_set<std::string> seen_columns;
      for (const auto& c : t.columns)
         if (!seen_columns.insert(lower(c.name)).second)
            throw Error(ErrorKind::Integrity, "database '" + id + "': duplicate column '" + c.name + "' in table '" +
                                                 t.name + "'");
   }

   if (!data_root.empty()) env.store_path = data_root / id / (id + ".sqlite");
   return env;
}

std::vector<DatabaseEnv> parse_schemas(const nlohmann::json& document, const std::filesystem::path& data_root) {
   if (!document.is_array()) throw Error(ErrorKind::Format, "schema file is not a JSON array");
   std::vector<DatabaseEnv> envs;
   envs.reserve(document.size());
   for (const auto& entry : document) envs.push_back(parse_schema_entry(entry, data_root));
   return envs;
}

std::vector<DatabaseEnv> load_schemas(const std::filesystem::path& file, const std::filesystem::path& data_root) {
   std::ifstream in(file);
   if (!in) throw Error(ErrorKind::Io, "cannot open schema file " + file.string());
   nlohmann::json document;
   try {
      document = nlohmann::json::parse(in);
   } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Format, "schema file " + file.string() + " is not valid JSON: " + e.what());
   }
   return parse_schemas(document, data_root);
}

nlohmann::json schema_to_json(const DatabaseEnv& env) {
   nlohmann::json table_names = nlohmann::json::array();
   nlohmann::json column_names = nlohmann::json::array({nlohmann::json::array({-1, "*"})});
   nlohmann::json column_types = nlohmann::json::array({"text"});
   std::map<std::pair<int, int>, int> ordinal;
   for (const auto& t : env.tables) {
      table_names.push_back(t.name);
      for (const auto& c : t.columns) {
         ordinal[{c.table_index, c.column_index}] = static_cast<int>(column_names.size());
         column_names.push_back(nlohmann::json::array({c.table_index, c.name}));
         column_types.push_back(c.type_name.empty() ? std::string(to_string(c.logical_type)) : c.type_name);
      }
   }
   nlohmann::json pks = nlohmann::json::array();
   for (const auto& pk : env.primary_keys) pks.push_back(ordinal.at({pk.table_index, pk.column_index}));
   nlohmann::json fks = nlohmann::json::array();
   for (const auto& fk : env.foreign_keys)
      fks.push_back({ordinal.at({fk.from.table_index, fk.from.column_index}), ordinal.at({fk.to.table_index, fk.to.column_index})});
   return nlohmann::json{{"db_id", env.db_id},
                         {"table_names_original", table_names},
                         {"column_names_original", column_names},
                         {"column_types", column_types},
                         {"primary_keys", pks},
                         {"foreign_keys", fks}};
}

SchemaIndex index_schemas(std::vector<DatabaseEnv> envs) {
   SchemaIndex index;
   for (auto& env : envs) {
      std::string id = env.db_id;
      if (!index.emplace(id, std::move(env)).second) throw Error(ErrorKind::Integrity, "duplicate db_id '" + id + "'");
   }
   return index;
}

const DatabaseEnv& lookup_env(const SchemaIndex& index, std::string_view db_id) {
   auto it = index.find(db_id);
   if (it == index.end()) throw Error(ErrorKind::Resolution, "unknown database '" + std::string(db_id) + "'");
   return it->second;
}

namespace {

struct Edge {
   int neighbor;
   JoinCondition condition;
};

std::vector<std::vector<Edge>> fk_adjacency(const DatabaseEnv& env) {
   std::vector<ForeignKey> fks = env.foreign_keys;
   // Tie-break order: smallest (table_index, column_index) endpoints first.
   std::sort(fks.begin(), fks.end(), [](const ForeignKey& a, const ForeignKey& b) {
      return std::tie(a.from, a.to) < std::tie(b.from, b.to);
   });
   std::vector<std::vector<Edge>> adj(env.tables.size());
   for (const auto& fk : fks) {
      if (fk.from.table_index == fk.to.table_index) continue;
      JoinCondition cond{fk.from, fk.to};
      adj[static_cast<std::size_t>(fk.from.table_index)].push_back(Edge{fk.to.table_index, cond});
      adj[static_cast<std::size_t>(fk.to.table_index)].push_back(Edge{fk.from.table_index, cond});
   }
   return adj;
}

} // namespace

std::vector<JoinCondition> fk_join_path(const DatabaseEnv& env, const std::set<int>& tables) {
   if (tables.empty()) throw Error(ErrorKind::Domain, "fk_join_path needs at least one table");
   for (int t : tables)
      if (t < 0 || static_cast<std::size_t>(t) >= env.tables.size())
         throw Error(ErrorKind::Domain, "table ordinal " + std::to_string(t) + " out of range in '" + env.db_id + "'");
   if (tables.size() == 1) return {};

   const auto adj = fk_adjacency(env);
   std::vector<char> connected(env.tables.size(), 0);
   std::set<int> remaining(std::next(tables.begin()), tables.end());
   connected[static_cast<std::size_t>(*tables.begin())] = 1;
   std::vector<JoinCondition> out;

   while (!remaining.empty()) {
      std::vector<int> dist(env.tables.size(), -1);
      std::vector<const Edge*> via(env.tables.size(), nullptr);
      std::vector<int> parent(env.tables.size(), -1);
      std::vector<int> frontier;
      for (std::size_t t = 0; t < connected.size(); ++t)
         if (connected[t]) {
            dist[t] = 0;
            frontier.push_back(static_cast<int>(t));
         }
      int target = -1;
      while (!frontier.empty() && target < 0) {
         std::vector<int> next;
         for (int t : frontier)
            for (const auto& e : adj[static_cast<std::size_t>(t)]) {
               if (dist[static_cast<std::size_t>(e.neighbor)] >= 0) continue;
               dist[static_cast<std::size_t>(e.neighbor)] = dist[static_cast<std::size_t>(t)] + 1;
               via[static_cast<std::size_t>(e.neighbor)] = &e;
               parent[static_cast<std::size_t>(e.neighbor)] = t;
               next.push_back(e.neighbor);
            }
         for (int t : remaining)
            if (dist[static_cast<std::size_t>(t)] >= 0) {
               target = t; // remaining is ordered, so this is the smallest ordinal at this depth
               break;
            }
         frontier = std::move(next);
      }
      if (target < 0) {
         throw Error(ErrorKind::NoJoinPath, "tables of '" + env.db_id + "' are not connected by foreign keys (table '" +
                                               env.tables[static_cast<std::size_t>(*remaining.begin())].name + "')");
      }
      std::vector<int> path;
      for (int t = target; !connected[static_cast<std::size_t>(t)]; t = parent[static_cast<std::size_t>(t)]) path.push_back(t);
      std::reverse(path.begin(), path.end());
      for (int t : path) {
         out.push_back(via[static_cast<std::size_t>(t)]->condition);
         connected[static_cast<std::size_t>(t)] = 1;
         remaining.erase(t);
      }
   }
   return out;
}

std::vector<int> tables_of(const std::vector<JoinCondition>& conditions) {
   std::vector<int> out;
   auto add = [&](int t) {
      if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
   };
   for (const auto& c : conditions) {
      add(c.left.table_index);
      add(c.right.table_index);
   }
   return out;
}

} // namespace cyclesql
