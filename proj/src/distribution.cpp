#include "cyclesql/distribution.hpp"

#include <algorithm>
#include <optional>
#include <vector>

#include "cyclesql/error.hpp"

namespace cyclesql {

void TemplateDistribution::add(const CoarseTemplate& tpl, std::uint64_t count) {
   if (count == 0) return;
   auto [it, inserted] = unigram_.try_emplace(tpl.text(), TemplateEntry{tpl, 0});
   // Keep the most permissive arity seen for this template text.
   if (!inserted && tpl.join_arity() < it->second.tpl.join_arity()) it->second.tpl.set_join_arity(tpl.join_arity());
   it->second.count += count;
   total_ += count;
}

void TemplateDistribution::add_transition(const CoarseTemplate& prev, const CoarseTemplate& cur, std::uint64_t count) {
   if (count == 0) return;
   if (!contains(prev) || !contains(cur))
      throw Error(ErrorKind::Internal, "transition over templates missing from the unigram counts");
   bigram_[{prev.text(), cur.text()}] += count;
}

void TemplateDistribution::merge(const TemplateDistribution& other) {
   for (const auto& [text, entry] : other.unigram_) add(entry.tpl, entry.count);
   for (const auto& [key, n] : other.bigram_) bigram_[key] += n;
   skipped_ += other.skipped_;
}

std::uint64_t TemplateDistribution::count(const CoarseTemplate& tpl) const {
   auto it = unigram_.find(tpl.text());
   return it == unigram_.end() ? 0 : it->second.count;
}

nlohmann::json TemplateDistribution::to_json() const {
   nlohmann::json uni = nlohmann::json::array();
   for (const auto& [text, entry] : unigram_)
      uni.push_back({{"template", text}, {"count", entry.count}, {"join_arity", entry.tpl.join_arity()}});
   nlohmann::json bi = nlohmann::json::array();
   for (const auto& [key, n] : bigram_) bi.push_back({{"prev", key.first}, {"cur", key.second}, {"count", n}});
   return {{"unigram", uni}, {"bigram", bi}, {"meta", {{"skipped", skipped_}, {"total", total_}}}};
}

TemplateDistribution TemplateDistribution::from_json(const nlohmann::json& document) {
   TemplateDistribution dist;
   try {
      for (const auto& e : document.at("unigram"))
         dist.add(parse_template(e.at("template").get<std::string>(), e.value("join_arity", 1)), e.at("count").get<std::uint64_t>());
      if (document.contains("bigram"))
         for (const auto& e : document.at("bigram")) {
            const std::string prev = e.at("prev").get<std::string>();
            const std::string cur = e.at("cur").get<std::string>();
            if (!dist.unigram_.contains(prev) || !dist.unigram_.contains(cur))
               throw Error(ErrorKind::Format, "distribution bigram references a template missing from unigram");
            dist.bigram_[{prev, cur}] += e.at("count").get<std::uint64_t>();
         }
      if (document.contains("meta")) dist.skipped_ = document.at("meta").value("skipped", std::uint64_t{0});
   } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, std::string("malformed distribution file: ") + e.what());
   }
   return dist;
}

TemplateDistribution fit(std::span<const CorpusExample> corpus, const SchemaIndex& envs) {
   if (corpus.empty()) throw Error(ErrorKind::EmptyDistribution, "cannot fit a template distribution on an empty corpus");
   TemplateDistribution dist;
   std::vector<std::pair<CoarseTemplate, CoarseTemplate>> transitions;
   for (const auto& ex : corpus) {
      try {
         const DatabaseEnv& env = lookup_env(envs, ex.db_id);
         const CoarseTemplate cur = to_coarse(parse_sql(ex.gold_sql, env), env);
         dist.add(cur);
         if (ex.turn_index > 1 && ex.prev_sql) {
            try {
               transitions.emplace_back(to_coarse(parse_sql(*ex.prev_sql, env), env), cur);
            } catch (const Error&) {
            }
         }
      } catch (const Error&) {
         dist.add_skipped(1);
      }
   }
   if (dist.empty()) throw Error(ErrorKind::EmptyDistribution, "no corpus entry could be canonicalized");
   // Previous turns whose own example was skipped or absent carry no unigram mass.
   for (const auto& [prev, cur] : transitions)
      if (dist.contains(prev)) dist.add_transition(prev, cur);
   return dist;
}

double coverage(const TemplateDistribution& dist, std::span<const CorpusExample> eval_corpus, const SchemaIndex& envs) {
   if (eval_corpus.empty()) throw Error(ErrorKind::UndefinedCoverage, "coverage of an empty evaluation corpus is undefined");
   std::size_t covered = 0;
   for (const auto& ex : eval_corpus) {
      try {
         const DatabaseEnv& env = lookup_env(envs, ex.db_id);
         if (dist.contains(to_coarse(parse_sql(ex.gold_sql, env), env))) ++covered;
      } catch (const Error&) {
      }
   }
   return static_cast<double>(covered) / static_cast<double>(eval_corpus.size());
}

const CoarseTemplate& sample_template(const TemplateDistribution& dist, const FillablePredicate& fillable, Rng& rng) {
   std::vector<const TemplateEntry*> entries;
   std::vector<double> weights;
   for (const auto& [text, entry] : dist.unigram()) {
      if (!fillable(entry.tpl)) continue;
      entries.push_back(&entry);
      weights.push_back(static_cast<double>(entry.count));
   }
   if (entries.empty()) throw Error(ErrorKind::UnfillableEnvironment, "no template in the distribution can be filled");
   return entries[rng.weighted(weights)]->tpl;
}

const CoarseTemplate& sample_template_conditional(const TemplateDistribution& dist, const CoarseTemplate& prev,
                                                  const FillablePredicate& fillable, Rng& rng) {
   std::vector<const CoarseTemplate*> entries;
   std::vector<double> weights;
   const auto& bigram = dist.bigram();
   for (auto it = bigram.lower_bound({prev.text(), std::string()}); it != bigram.end() && it->first.first == prev.text(); ++it) {
      const auto& entry = dist.unigram().at(it->first.second);
      if (!fillable(entry.tpl)) continue;
      entries.push_back(&entry.tpl);
      weights.push_back(static_cast<double>(it->second));
   }
   if (entries.empty()) return sample_template(dist, fillable, rng);
   return *entries[rng.weighted(weights)];
}

boost::multiprecision::cpp_int variety_bound(std::uint64_t templates, std::uint64_t slots, std::uint64_t columns,
                                             std::uint64_t turns) {
   using boost::multiprecision::cpp_int;
   if (slots > columns)
      throw Error(ErrorKind::Domain, "variety bound needs slots <= columns (got " + std::to_string(slots) + " > " +
                                        std::to_string(columns) + ")");
   cpp_int choose = 1;
   const std::uint64_t k = std::min(slots, columns - slots);
   for (std::uint64_t i = 1; i <= k; ++i) choose = choose * (columns - k + i) / i;
   const cpp_int per_turn = cpp_int(templates) * choose;
   cpp_int result = 1;
   for (std::uint64_t i = 0; i < turns; ++i) result *= per_turn;
   return result;
}

} // namespace cyclesql
