#include "cyclesql/builtin_adapters.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>

#include "cyclesql/error.hpp"
#include "cyclesql/exec.hpp"
#include "cyclesql/random.hpp"
#include "cyclesql/sql_lexer.hpp"

namespace cyclesql {

namespace {

struct Phrase {
   std::string_view sql;
   std::string_view words;
};

constexpr std::array<Phrase, 9> kPhrases = {{
   {"select", "show me"},
   {"=", "equals"},
   {"!=", "differs from"},
   {"<", "is below"},
   {"<=", "is at most"},
   {">", "is above"},
   {">=", "is at least"},
   {"desc", "descending"},
   {"*", "everything"},
}};

std::string lower(std::string s) {
   std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
   return s;
}

std::string quoted(const std::string& text) { return Cell::of(text).sql_literal(); }

const std::regex& how_many_sql() {
   static const std::regex re(R"(^select count \( \* \) from (\S+)$)");
   return re;
}

const std::regex& how_many_words() {
   static const std::regex re(R"(^how many (\S+) are there$)");
   return re;
}

std::vector<std::string> split_words(std::string_view text) {
   std::vector<std::string> words;
   std::size_t i = 0;
   while (i < text.size()) {
      if (text[i] == ' ') {
         ++i;
         continue;
      }
      const std::size_t start = i;
      if (text[i] == '\'') {
         // Quoted literal with '' escapes stays one word.
         ++i;
         while (i < text.size()) {
            if (text[i] == '\'') {
               if (i + 1 < text.size() && text[i + 1] == '\'') {
                  i += 2;
                  continue;
               }
               ++i;
               break;
            }
            ++i;
         }
      } else {
         while (i < text.size() && text[i] != ' ') ++i;
      }
      words.emplace_back(text.substr(start, i - start));
   }
   return words;
}

void drop_conditions(Query& q) {
   q.where = {};
   q.having = {};
   if (q.set_rhs) drop_conditions(*q.set_rhs);
}

class Builtin final : public ModelAdapter {
   public:
   enum class Kind { Perfect, Corrupting, Lossy };

   Builtin(Kind kind, std::uint64_t seed) : kind_(kind), seed_(seed) {}

   std::string generate(const GenerateRequest& request) override {
      if (kind_ != Kind::Lossy) return gloss(request.query);
      const DatabaseEnv env = parse_schema_entry(request.schema);
      Query q = parse_sql(request.query, env);
      drop_conditions(q);
      return gloss(render(q, env));
   }

   std::string parse(const ParseRequest& request) override {
      std::string sql = ungloss(request.utterance);
      if (kind_ != Kind::Corrupting) return sql;
      Rng rng(hash_bytes(request.utterance, derive_seed(seed_, 0x636f7272)));
      if (!rng.bernoulli(0.5)) return sql;
      try {
         const DatabaseEnv env = parse_schema_entry(request.schema);
         Query q = parse_sql(sql, env);
         auto literals = collect_literals(q);
         if (literals.empty()) return sql;
         Literal& lit = *literals[rng.index(literals.size())];
         if (lit.kind == Literal::Kind::Number) {
            const double v = std::stod(lit.text) + 1.0;
            lit.text = Cell::of(v).sql_literal();
         } else {
            lit.text += "_x";
         }
         return render(q, env);
      } catch (const std::exception&) {
         return sql;
      }
   }

   bool concurrent() const override { return true; }

   std::string name() const override {
      switch (kind_) {
         case Kind::Perfect: return "builtin:perfect";
         case Kind::Corrupting: return "builtin:corrupting";
         case Kind::Lossy: return "builtin:lossy";
      }
      return "builtin";
   }

   private:
   Kind kind_;
   std::uint64_t seed_;
};

} // namespace

std::string gloss(std::string_view canonical_sql) {
   const std::string sql(canonical_sql);
   std::smatch m;
   if (std::regex_match(sql, m, how_many_sql())) return "how many " + lower(m[1].str()) + " are there ?";
   std::string out;
   for (const auto& t : tokenize_sql(sql)) {
      if (t.kind == Token::Kind::End) break;
      std::string word;
      if (t.kind == Token::Kind::String) {
         word = quoted(t.text);
      } else {
         word = t.kind == Token::Kind::Identifier ? lower(t.text) : t.text;
         for (const auto& p : kPhrases)
            if (word == p.sql) word = std::string(p.words);
      }
      if (!out.empty()) out.push_back(' ');
      out += word;
   }
   return out + " ?";
}

std::string ungloss(std::string_view utterance) {
   std::string text(utterance);
   if (text.ends_with(" ?")) text.resize(text.size() - 2);
   std::smatch m;
   if (std::regex_match(text, m, how_many_words())) return "select count ( * ) from " + m[1].str();
   const auto words = split_words(text);
   std::string out;
   for (std::size_t i = 0; i < words.size();) {
      std::string token = words[i];
      std::size_t used = 1;
      // Longest phrase first.
      for (std::size_t len = 3; len >= 1; --len) {
         if (i + len > words.size()) continue;
         std::string joined = words[i];
         for (std::size_t k = 1; k < len; ++k) joined += " " + words[i + k];
         auto hit = std::find_if(kPhrases.begin(), kPhrases.end(), [&](const Phrase& p) { return joined == p.words; });
         if (hit != kPhrases.end()) {
            token = std::string(hit->sql);
            used = len;
            break;
         }
      }
      if (!out.empty()) out.push_back(' ');
      out += token;
      i += used;
   }
   return out;
}

std::unique_ptr<ModelAdapter> make_builtin(std::string_view name, const AdapterOptions& options) {
   if (name == "perfect") return std::make_unique<Builtin>(Builtin::Kind::Perfect, options.seed);
   if (name == "corrupting") return std::make_unique<Builtin>(Builtin::Kind::Corrupting, options.seed);
   if (name == "lossy") return std::make_unique<Builtin>(Builtin::Kind::Lossy, options.seed);
   throw Error(ErrorKind::Adapter, "unknown builtin adapter '" + std::string(name) + "' (expected perfect, corrupting or lossy)");
}

} // namespace cyclesql
