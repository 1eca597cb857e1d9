#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "cyclesql/canon.hpp"
#include "cyclesql/corpus.hpp"
#include "cyclesql/random.hpp"
#include "cyclesql/schema.hpp"

namespace cyclesql {

struct TemplateEntry {
   CoarseTemplate tpl;
   std::uint64_t count = 0;
};

/// Empirical distribution over coarse templates plus previous -> current
/// template transition counts for multi-turn corpora. Keys are canonical
/// template texts, so iteration order is deterministic.
class TemplateDistribution {
   public:
   using Bigram = std::map<std::pair<std::string, std::string>, std::uint64_t>;

   void add(const CoarseTemplate& tpl, std::uint64_t count = 1);
   void add_transition(const CoarseTemplate& prev, const CoarseTemplate& cur, std::uint64_t count = 1);
   /// Adds another shard's counts.
   void merge(const TemplateDistribution& other);

   const std::map<std::string, TemplateEntry>& unigram() const { return unigram_; }
   const Bigram& bigram() const { return bigram_; }
   std::uint64_t total() const { return total_; }
   bool empty() const { return unigram_.empty(); }
   std::uint64_t count(const CoarseTemplate& tpl) const;
   bool contains(const CoarseTemplate& tpl) const { return unigram_.contains(tpl.text()); }

   /// Corpus entries that could not be canonicalized during fitting.
   std::uint64_t skipped() const { return skipped_; }
   void add_skipped(std::uint64_t n) { skipped_ += n; }

   nlohmann::json to_json() const;
   static TemplateDistribution from_json(const nlohmann::json& document);

   private:
   std::map<std::string, TemplateEntry> unigram_;
   Bigram bigram_;
   std::uint64_t total_ = 0;
   std::uint64_t skipped_ = 0;
};

/// Counts coarse templates of gold queries (and previous -> current pairs for
/// later turns). Entries that fail to parse are skipped and counted.
TemplateDistribution fit(std::span<const CorpusExample> corpus, const SchemaIndex& envs);

/// Fraction of evaluation examples whose coarse template occurs in the
/// distribution's support. Unparseable examples count as uncovered.
double coverage(const TemplateDistribution& dist, std::span<const CorpusExample> eval_corpus, const SchemaIndex& envs);

using FillablePredicate = std::function<bool(const CoarseTemplate&)>;

/// Draws a template proportionally to its count among fillable templates.
const CoarseTemplate& sample_template(const TemplateDistribution& dist, const FillablePredicate& fillable, Rng& rng);

/// Draws from the transition counts out of `prev`, restricted to fillable
/// templates; with no fillable continuation it backs off to sample_template.
const CoarseTemplate& sample_template_conditional(const TemplateDistribution& dist, const CoarseTemplate& prev,
                                                  const FillablePredicate& fillable, Rng& rng);

/// (templates * C(columns, slots)) ^ turns, exact.
boost::multiprecision::cpp_int variety_bound(std::uint64_t templates, std::uint64_t slots, std::uint64_t columns,
                                             std::uint64_t turns);

} // namespace cyclesql
