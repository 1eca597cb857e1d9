#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <regex>

#include "canon_internal.hpp"
#include "cyclesql/canon.hpp"
#include "cyclesql/error.hpp"
#include "cyclesql/sql_lexer.hpp"

namespace cyclesql::detail {

namespace {

bool iequals(std::string_view a, std::string_view b) {
   return a.size() == b.size() &&
          std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) { return std::tolower(x) == std::tolower(y); });
}

std::string upper(std::string_view s) {
   std::string out(s);
   std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
   return out;
}

// Words that end a table reference, so they are never taken as a bare alias.
constexpr std::array<std::string_view, 18> kClauseWords = {
   "where", "group", "order", "having", "limit", "join", "on", "inner", "intersect",
   "union", "except", "from", "select", "as", "and", "or", "asc", "desc"};

// Constructs outside the supported subset, reported by name before resolution.
constexpr std::array<std::pair<std::string_view, std::string_view>, 22> kUnsupportedWords = {{
   {"window", "WINDOW"},   {"over", "OVER"},       {"with", "WITH"},       {"case", "CASE"},
   {"exists", "EXISTS"},   {"cast", "CAST"},       {"left", "LEFT JOIN"},  {"right", "RIGHT JOIN"},
   {"outer", "OUTER JOIN"}, {"cross", "CROSS JOIN"}, {"natural", "NATURAL JOIN"}, {"using", "USING"},
   {"is", "IS"},           {"null", "NULL"},       {"insert", "INSERT"},   {"update", "UPDATE"},
   {"delete", "DELETE"},   {"create", "CREATE"},   {"drop", "DROP"},       {"alter", "ALTER"},
   {"partition", "PARTITION"}, {"glob", "GLOB"},
}};

bool is_clause_word(const Token& t) {
   return std::any_of(kClauseWords.begin(), kClauseWords.end(), [&](std::string_view w) { return t.is_word(w); });
}

AggOp agg_of(const Token& t) {
   if (t.is_word("count")) return AggOp::Count;
   if (t.is_word("sum")) return AggOp::Sum;
   if (t.is_word("avg")) return AggOp::Avg;
   if (t.is_word("min")) return AggOp::Min;
   if (t.is_word("max")) return AggOp::Max;
   return AggOp::None;
}

SetOp set_op_of(const Token& t) {
   if (t.is_word("intersect")) return SetOp::Intersect;
   if (t.is_word("union")) return SetOp::Union;
   if (t.is_word("except")) return SetOp::Except;
   return SetOp::None;
}

std::optional<SlotId> slot_from_name(std::string_view name) {
   static const std::regex pattern("(key|text|number|time|boolean|other)([1-9][0-9]*)", std::regex::icase);
   std::match_results<std::string_view::const_iterator> m;
   if (!std::regex_match(name.begin(), name.end(), m, pattern)) return std::nullopt;
   static constexpr std::array<std::string_view, kSlotTypeCount> names = {"key", "text", "number", "time", "boolean", "other"};
   SlotId id;
   const std::string type = m[1].str();
   for (std::size_t i = 0; i < names.size(); ++i)
      if (iequals(type, names[i])) id.type = static_cast<SlotType>(i);
   id.index = std::stoi(m[2].str());
   return id;
}

[[noreturn]] void unsupported(const std::string& what) { throw Error(ErrorKind::UnsupportedSyntax, what); }

class Parser {
   public:
   Parser(std::vector<Token> tokens, const DatabaseEnv* env) : tokens_(std::move(tokens)), env_(env) {}

   Query parse_statement() {
      for (const auto& t : tokens_)
         for (const auto& [word, name] : kUnsupportedWords)
            if (t.is_word(word)) unsupported(std::string(name) + " is outside the supported SQL subset");
      std::vector<const Scope*> outer;
      Query q = parse_query(outer);
      if (peek().kind != Token::Kind::End) unsupported("unexpected token '" + peek().text + "' at offset " + std::to_string(peek().offset));
      return q;
   }

   private:
   struct ScopeEntry {
      int table;
      std::string alias;
   };
   using Scope = std::vector<ScopeEntry>;

   bool template_mode() const { return env_ == nullptr; }

   const Token& peek(std::size_t k = 0) const {
      const std::size_t i = std::min(pos_ + k, tokens_.size() - 1);
      return tokens_[i];
   }
   const Token& advance() {
      const Token& t = tokens_[pos_];
      if (pos_ + 1 < tokens_.size()) ++pos_;
      return t;
   }
   bool accept_word(std::string_view w) {
      if (!peek().is_word(w)) return false;
      advance();
      return true;
   }
   bool accept_symbol(std::string_view s) {
      if (!peek().is_symbol(s)) return false;
      advance();
      return true;
   }
   [[noreturn]] void fail_expected(std::string_view what) const {
      const auto& t = peek();
      const std::string got = t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
      unsupported("expected " + std::string(what) + " but found " + got + " at offset " + std::to_string(t.offset));
   }
   void expect_word(std::string_view w) {
      if (!accept_word(w)) fail_expected(upper(w));
   }
   void expect_symbol(std::string_view s) {
      if (!accept_symbol(s)) fail_expected("'" + std::string(s) + "'");
   }

   Query parse_query(std::vector<const Scope*>& outer) {
      Query q = parse_select_core(outer);
      if (SetOp op = set_op_of(peek()); op != SetOp::None) {
         advance();
         if (peek().is_word("all")) unsupported("UNION ALL is outside the supported SQL subset");
         q.set_op = op;
         q.set_rhs = Box<Query>(parse_query(outer));
      }
      return q;
   }

   // Position of the FROM keyword belonging to the select core starting at pos_.
   std::optional<std::size_t> find_from() const {
      int depth = 0;
      for (std::size_t i = pos_; i < tokens_.size(); ++i) {
         const auto& t = tokens_[i];
         if (t.kind == Token::Kind::End) break;
         if (t.is_symbol("(")) ++depth;
         else if (t.is_symbol(")")) {
            if (--depth < 0) break;
         } else if (depth == 0) {
            if (t.is_word("from")) return i;
            if (set_op_of(t) != SetOp::None) break;
         }
      }
      return std::nullopt;
   }

   Query parse_select_core(std::vector<const Scope*>& outer) {
      expect_word("select");
      Query q;
      Scope scope;
      const std::size_t select_start = pos_;
      std::size_t after_from = pos_;
      const auto from_pos = find_from();
      if (template_mode()) {
         if (from_pos) unsupported("templates carry no FROM clause");
      } else {
         if (!from_pos) unsupported("SELECT without FROM is outside the supported SQL subset");
         pos_ = *from_pos + 1;
         parse_from(q, scope, outer);
         after_from = pos_;
         pos_ = select_start;
      }

      outer.push_back(&scope);
      if (accept_word("distinct")) q.distinct = true;
      q.select.push_back(parse_val_unit(scope, outer));
      while (accept_symbol(",")) q.select.push_back(parse_val_unit(scope, outer));
      if (!template_mode()) {
         if (pos_ != *from_pos) fail_expected("FROM");
         pos_ = after_from;
      }

      if (accept_word("where")) q.where = parse_condition(scope, outer);
      if (accept_word("group")) {
         expect_word("by");
         q.group_by.push_back(parse_col_unit(scope, outer));
         while (accept_symbol(",")) q.group_by.push_back(parse_col_unit(scope, outer));
      }
      if (accept_word("having")) q.having = parse_condition(scope, outer);
      if (accept_word("order")) {
         expect_word("by");
         do {
            OrderItem item;
            item.value = parse_val_unit(scope, outer);
            if (accept_word("desc")) item.descending = true;
            else accept_word("asc");
            q.order_by.push_back(std::move(item));
         } while (accept_symbol(","));
      }
      if (accept_word("limit")) {
         const Token& t = advance();
         std::int64_t value = 0;
         if (t.kind != Token::Kind::Number ||
             std::from_chars(t.text.data(), t.text.data() + t.text.size(), value).ec != std::errc{} ||
             t.text.find_first_not_of("0123456789") != std::string::npos)
            unsupported("LIMIT takes an integer literal");
         q.limit = value;
         if (peek().is_word("offset") || peek().is_symbol(",")) unsupported("LIMIT offsets are outside the supported SQL subset");
      }
      outer.pop_back();
      return q;
   }

   void parse_table_ref(Query& q, Scope& scope) {
      if (peek().is_symbol("(")) unsupported("subquery in FROM is outside the supported SQL subset");
      const Token& name = advance();
      if (name.kind != Token::Kind::Identifier) fail_expected("table name");
      auto table = env_->find_table(name.text);
      if (!table) throw Error(ErrorKind::Resolution, "unknown table '" + name.text + "' in database '" + env_->db_id + "'");
      std::string alias;
      if (accept_word("as")) {
         const Token& a = advance();
         if (a.kind != Token::Kind::Identifier) fail_expected("alias");
         alias = a.text;
      } else if (peek().kind == Token::Kind::Identifier && !is_clause_word(peek())) {
         alias = advance().text;
      }
      if (!alias.empty())
         for (const auto& e : scope)
            if (iequals(e.alias, alias)) throw Error(ErrorKind::Resolution, "duplicate alias '" + alias + "'");
      q.from.push_back(*table);
      scope.push_back(ScopeEntry{*table, alias});
   }

   void parse_from(Query& q, Scope& scope, std::vector<const Scope*>& outer) {
      parse_table_ref(q, scope);
      for (;;) {
         if (accept_symbol(",")) {
            parse_table_ref(q, scope);
            continue;
         }
         if (peek().is_word("inner") && peek(1).is_word("join")) advance();
         if (!accept_word("join")) break;
         parse_table_ref(q, scope);
         if (accept_word("on")) {
            do {
               outer.push_back(&scope);
               JoinOn on;
               on.left = parse_column(scope, outer);
               if (!accept_symbol("=")) unsupported("ON conditions must be column equalities");
               if (peek().kind != Token::Kind::Identifier) unsupported("ON conditions must be column equalities");
               on.right = parse_column(scope, outer);
               outer.pop_back();
               if (on.left.kind != ColumnLeaf::Kind::Column || on.right.kind != ColumnLeaf::Kind::Column)
                  unsupported("ON conditions must compare two columns");
               q.joins.push_back(on);
            } while (accept_word("and"));
         }
      }
      // Canonical join order: a condition belongs to the join introducing its later table.
      std::stable_sort(q.joins.begin(), q.joins.end(), [](const JoinOn& a, const JoinOn& b) {
         return std::max(a.left.source, a.right.source) < std::max(b.left.source, b.right.source);
      });
   }

   ColumnLeaf resolve_column(const Scope& scope, const std::vector<const Scope*>& outer, std::optional<std::string> qualifier,
                             const std::string& name) {
      auto lookup = [&](const Scope& s, std::vector<std::pair<int, int>>& hits) {
         std::vector<std::size_t> entries;
         if (qualifier) {
            // Aliases take precedence; fall back to bare table names.
            for (std::size_t i = 0; i < s.size(); ++i)
               if (iequals(s[i].alias, *qualifier)) entries.push_back(i);
            if (entries.empty())
               for (std::size_t i = 0; i < s.size(); ++i)
                  if (iequals(env_->tables[static_cast<std::size_t>(s[i].table)].name, *qualifier)) entries.push_back(i);
         } else {
            for (std::size_t i = 0; i < s.size(); ++i) entries.push_back(i);
         }
         for (std::size_t i : entries)
            if (auto c = env_->find_column(s[i].table, name)) hits.emplace_back(static_cast<int>(i), *c);
      };
      std::vector<std::pair<int, int>> hits;
      lookup(scope, hits);
      const std::string shown = qualifier ? *qualifier + "." + name : name;
      if (hits.size() > 1) throw Error(ErrorKind::Resolution, "ambiguous column '" + shown + "'");
      if (hits.empty()) {
         for (const Scope* s : outer) {
            if (s == &scope) continue;
            std::vector<std::pair<int, int>> outer_hits;
            lookup(*s, outer_hits);
            if (!outer_hits.empty()) unsupported("correlated reference to '" + shown + "' is outside the supported SQL subset");
         }
         throw Error(ErrorKind::Resolution, "unknown column '" + shown + "' in database '" + env_->db_id + "'");
      }
      const auto [source, column] = hits.front();
      return ColumnLeaf::of(source, env_->column(scope[static_cast<std::size_t>(source)].table, column));
   }

   ColumnLeaf parse_column(const Scope& scope, const std::vector<const Scope*>& outer) {
      if (accept_symbol("*")) return ColumnLeaf::star();
      const Token& t = advance();
      if (t.kind != Token::Kind::Identifier) {
         --pos_;
         fail_expected("column");
      }
      if (template_mode()) {
         auto slot = slot_from_name(t.text);
         if (!slot) unsupported("template token '" + t.text + "' is not a column slot");
         return ColumnLeaf::of_slot(*slot);
      }
      if (accept_symbol(".")) {
         if (peek().is_symbol("*")) unsupported("qualified * is outside the supported SQL subset");
         const Token& col = advance();
         if (col.kind != Token::Kind::Identifier) fail_expected("column name");
         return resolve_column(scope, outer, t.text, col.text);
      }
      return resolve_column(scope, outer, std::nullopt, t.text);
   }

   ColUnit parse_col_unit(const Scope& scope, const std::vector<const Scope*>& outer) {
      ColUnit unit;
      if (peek().is_symbol("(")) unsupported("parenthesized expressions are outside the supported SQL subset");
      if (peek().kind == Token::Kind::Identifier && peek(1).is_symbol("(")) {
         unit.agg = agg_of(peek());
         if (unit.agg == AggOp::None) unsupported("function call '" + peek().text + "' is outside the supported SQL subset");
         advance();
         advance();
         if (accept_word("distinct")) unit.distinct = true;
         unit.column = parse_column(scope, outer);
         if (!peek().is_symbol(")")) unsupported("aggregate arguments must be a single column");
         advance();
         return unit;
      }
      if (peek().kind != Token::Kind::Identifier && !peek().is_symbol("*")) fail_expected("column");
      unit.column = parse_column(scope, outer);
      return unit;
   }

   ValUnit parse_val_unit(const Scope& scope, const std::vector<const Scope*>& outer) {
      ValUnit u;
      u.left = parse_col_unit(scope, outer);
      static constexpr std::array<std::pair<std::string_view, ArithOp>, 4> ops = {
         {{"+", ArithOp::Add}, {"-", ArithOp::Sub}, {"*", ArithOp::Mul}, {"/", ArithOp::Div}}};
      for (const auto& [sym, op] : ops) {
         if (peek().is_symbol(sym)) {
            advance();
            u.op = op;
            u.right = parse_col_unit(scope, outer);
            break;
         }
      }
      for (const auto& [sym, op] : ops)
         if (peek().is_symbol(sym)) unsupported("arithmetic over more than two columns is outside the supported SQL subset");
      return u;
   }

   Operand parse_operand(const Scope& scope, std::vector<const Scope*>& outer) {
      if (peek().is_symbol("(")) {
         if (!peek(1).is_word("select")) unsupported("value lists and parenthesized expressions are outside the supported SQL subset");
         advance();
         Query sub = parse_query(outer);
         expect_symbol(")");
         return Box<Query>(std::move(sub));
      }
      if (peek().kind == Token::Kind::Number) return Literal{Literal::Kind::Number, advance().text, LogicalType::Other, {}};
      if (peek().is_symbol("-") && peek(1).kind == Token::Kind::Number) {
         advance();
         return Literal{Literal::Kind::Number, "-" + advance().text, LogicalType::Other, {}};
      }
      if (peek().kind == Token::Kind::String) {
         if (template_mode()) unsupported("templates carry no literal values");
         return Literal{Literal::Kind::String, advance().text, LogicalType::Other, {}};
      }
      if (template_mode() && peek().is_word("val")) {
         advance();
         return Literal{Literal::Kind::Slot, "", LogicalType::Other, {}};
      }
      return parse_val_unit(scope, outer);
   }

   Predicate parse_predicate(const Scope& scope, std::vector<const Scope*>& outer) {
      if (peek().is_word("not")) unsupported("NOT before a predicate is outside the supported SQL subset");
      Predicate p;
      p.left = parse_val_unit(scope, outer);
      const Token& t = peek();
      if (t.is_symbol("=")) p.op = CmpOp::Eq;
      else if (t.is_symbol("!=")) p.op = CmpOp::Ne;
      else if (t.is_symbol("<")) p.op = CmpOp::Lt;
      else if (t.is_symbol("<=")) p.op = CmpOp::Le;
      else if (t.is_symbol(">")) p.op = CmpOp::Gt;
      else if (t.is_symbol(">=")) p.op = CmpOp::Ge;
      else if (t.is_word("like")) p.op = CmpOp::Like;
      else if (t.is_word("in")) p.op = CmpOp::In;
      else if (t.is_word("between")) p.op = CmpOp::Between;
      else if (t.is_word("not") && peek(1).is_word("like")) {
         p.op = CmpOp::NotLike;
         advance();
      } else if (t.is_word("not") && peek(1).is_word("in")) {
         p.op = CmpOp::NotIn;
         advance();
      } else if (t.is_word("not") && peek(1).is_word("between")) {
         unsupported("NOT BETWEEN is outside the supported SQL subset");
      } else {
         fail_expected("comparison operator");
      }
      advance();
      p.right = parse_operand(scope, outer);
      if (p.op == CmpOp::Between) {
         expect_word("and");
         p.upper = parse_operand(scope, outer);
      }
      if ((p.op == CmpOp::In || p.op == CmpOp::NotIn) && !std::holds_alternative<Box<Query>>(p.right))
         unsupported("IN requires a subquery");
      type_literals(p);
      return p;
   }

   // Literals take the logical type of the column they compare against; template
   // value slots bind to that column's slot.
   static void type_literals(Predicate& p) {
      std::optional<ColumnLeaf> anchor;
      for (const ColUnit* u : {&p.left.left, &p.left.right}) {
         if (u == &p.left.right && p.left.op == ArithOp::None) break;
         if (u->column.kind != ColumnLeaf::Kind::Star) {
            anchor = u->column;
            break;
         }
      }
      auto apply = [&](Operand& op) {
         auto* lit = std::get_if<Literal>(&op);
         if (!lit || !anchor) return;
         if (anchor->kind == ColumnLeaf::Kind::Column) lit->type = anchor->column.logical_type;
         if (anchor->kind == ColumnLeaf::Kind::Slot && lit->kind == Literal::Kind::Slot) lit->bound = anchor->slot;
      };
      apply(p.right);
      if (p.upper) apply(*p.upper);
   }

   Condition parse_condition(const Scope& scope, std::vector<const Scope*>& outer) {
      Condition c;
      if (peek().is_symbol("(")) unsupported("parenthesized conditions are outside the supported SQL subset");
      c.predicates.push_back(parse_predicate(scope, outer));
      for (;;) {
         if (accept_word("and")) c.connectives.push_back(Connective::And);
         else if (accept_word("or")) c.connectives.push_back(Connective::Or);
         else break;
         if (peek().is_symbol("(")) unsupported("parenthesized conditions are outside the supported SQL subset");
         c.predicates.push_back(parse_predicate(scope, outer));
      }
      return c;
   }

   std::vector<Token> tokens_;
   const DatabaseEnv* env_;
   std::size_t pos_ = 0;
};

} // namespace

Query parse_query_text(std::string_view text, const DatabaseEnv* env) {
   return Parser(tokenize_sql(text), env).parse_statement();
}

} // namespace cyclesql::detail
