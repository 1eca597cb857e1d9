#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cyclesql {

struct Token {
   enum class Kind { Identifier, Number, String, Symbol, End };
   Kind kind = Kind::End;
   /// Identifier/symbol text as written; number text; string contents unescaped.
   std::string text;
   std::size_t offset = 0;

   bool is_symbol(std::string_view s) const { return kind == Kind::Symbol && text == s; }
   /// Case-insensitive keyword test on bare identifiers.
   bool is_word(std::string_view word) const;
};

/// Splits SQL into tokens, always terminated by an End token. Double-quoted
/// text is read as a string literal. A trailing semicolon is dropped.
std::vector<Token> tokenize_sql(std::string_view sql);

/// True when the statement has an ORDER BY outside any parentheses.
bool has_top_level_order_by(std::string_view sql);

} // namespace cyclesql
