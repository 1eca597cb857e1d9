#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cyclesql/exec.hpp"
#include "cyclesql/schema.hpp"

namespace cyclesql {

struct ValuePools {
   std::int64_t number_min = 0;
   std::int64_t number_max = 100;
   /// Share of numeric cells drawn as two-decimal reals.
   double decimal_fraction = 0.1;
   /// Distinct text values per column; drawn with replacement so rows repeat them.
   int text_pool_size = 8;
   /// Share of each text pool taken from values stored in the original database.
   double original_text_fraction = 0.5;
   int year_min = 2000;
   int year_max = 2020;

   nlohmann::json to_json() const;
};

struct FuzzConfig {
   int instances = 10;
   int min_rows = 5;
   int max_rows = 50;
   std::uint64_t seed = 0;
   ValuePools pools;
   std::filesystem::path scratch = std::filesystem::temp_directory_path() / "cyclesql-fuzz";
   bool keep = false;
   EqualitySemantics semantics = EqualitySemantics::Bag;
   std::chrono::milliseconds timeout = kDefaultTimeout;

   /// Errors: Domain when instances < 1 or the row range is empty.
   void validate() const;
   nlohmann::json to_json() const;
};

/// <scratch>/<db_id>/fuzz_<seed>_<index>.sqlite
std::filesystem::path instance_path(const DatabaseEnv& env, const FuzzConfig& cfg, int instance_index);

/// Writes a copy of the schema filled with fresh random rows: primary keys
/// unique, foreign keys drawn from the referenced column's generated values.
/// Deterministic per (db_id, seed, instance_index). Errors: Generation.
DatabaseEnv randomize_db(const DatabaseEnv& env, const FuzzConfig& cfg, int instance_index);

/// Generates each (database, instance) once and shares it between threads.
/// Generated files are removed on destruction unless cfg.keep is set.
class FuzzInstanceCache {
   public:
   explicit FuzzInstanceCache(FuzzConfig cfg);
   ~FuzzInstanceCache();
   FuzzInstanceCache(const FuzzInstanceCache&) = delete;
   FuzzInstanceCache& operator=(const FuzzInstanceCache&) = delete;

   const std::filesystem::path& instance(const DatabaseEnv& env, int instance_index);
   const FuzzConfig& config() const { return cfg_; }

   private:
   struct Entry {
      std::once_flag once;
      std::filesystem::path path;
      std::exception_ptr error;
   };
   FuzzConfig cfg_;
   std::mutex mutex_;
   std::map<std::pair<std::string, int>, std::shared_ptr<Entry>> entries_;
};

struct FuzzResult {
   /// True iff every non-fragile instance agrees and at least one is non-fragile.
   bool match = false;
   std::vector<bool> per_instance;
   /// Instances on which the gold query itself failed; excluded from match.
   std::vector<bool> fragile;

   int fragile_count() const;
};

FuzzResult fuzz_match(std::string_view gold, std::string_view pred, const DatabaseEnv& env, FuzzInstanceCache& cache);
/// Convenience overload with a private cache.
FuzzResult fuzz_match(std::string_view gold, std::string_view pred, const DatabaseEnv& env, const FuzzConfig& cfg);

} // namespace cyclesql
