#include "cyclesql/sql_lexer.hpp"

#include <algorithm>
#include <cctype>

#include "cyclesql/error.hpp"

namespace cyclesql {

bool Token::is_word(std::string_view word) const {
   return kind == Kind::Identifier && text.size() == word.size() &&
          std::equal(text.begin(), text.end(), word.begin(),
                     [](unsigned char a, unsigned char b) { return std::tolower(a) == std::tolower(b); });
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

} // namespace

std::vector<Token> tokenize_sql(std::string_view sql) {
   std::vector<Token> tokens;
   std::size_t i = 0;
   const std::size_t n = sql.size();
   auto push = [&](Token::Kind kind, std::string text, std::size_t at) { tokens.push_back(Token{kind, std::move(text), at}); };

   while (i < n) {
      const char c = sql[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
         ++i;
         continue;
      }
      const std::size_t start = i;
      if (ident_start(c)) {
         while (i < n && ident_char(sql[i])) ++i;
         push(Token::Kind::Identifier, std::string(sql.substr(start, i - start)), start);
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
         while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
         if (i < n && sql[i] == '.') {
            ++i;
            while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
         }
         if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
            std::size_t j = i + 1;
            if (j < n && (sql[j] == '+' || sql[j] == '-')) ++j;
            if (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) {
               i = j;
               while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
            }
         }
         push(Token::Kind::Number, std::string(sql.substr(start, i - start)), start);
      } else if (c == '\'' || c == '"') {
         std::string text;
         ++i;
         bool closed = false;
         while (i < n) {
            if (sql[i] == c) {
               if (i + 1 < n && sql[i + 1] == c) {
                  text.push_back(c);
                  i += 2;
                  continue;
               }
               ++i;
               closed = true;
               break;
            }
            text.push_back(sql[i++]);
         }
         if (!closed) throw Error(ErrorKind::UnsupportedSyntax, "unterminated string literal at offset " + std::to_string(start));
         push(Token::Kind::String, std::move(text), start);
      } else if (c == '`' || c == '[') {
         const char close = c == '`' ? '`' : ']';
         ++i;
         const std::size_t body = i;
         while (i < n && sql[i] != close) ++i;
         if (i >= n) throw Error(ErrorKind::UnsupportedSyntax, "unterminated quoted identifier at offset " + std::to_string(start));
         push(Token::Kind::Identifier, std::string(sql.substr(body, i - body)), start);
         ++i;
      } else {
         static constexpr std::string_view two_char[] = {"!=", "<>", "<=", ">=", "=="};
         std::string_view rest = sql.substr(i);
         bool matched = false;
         for (auto op : two_char) {
            if (rest.starts_with(op)) {
               push(Token::Kind::Symbol, op == "<>" ? "!=" : (op == "==" ? "=" : std::string(op)), start);
               i += 2;
               matched = true;
               break;
            }
         }
         if (matched) continue;
         if (std::string_view("(),.*=<>+-/;%").find(c) == std::string_view::npos)
            throw Error(ErrorKind::UnsupportedSyntax, std::string("unexpected character '") + c + "' at offset " + std::to_string(start));
         push(Token::Kind::Symbol, std::string(1, c), start);
         ++i;
      }
   }
   while (!tokens.empty() && tokens.back().is_symbol(";")) tokens.pop_back();
   tokens.push_back(Token{Token::Kind::End, "", n});
   return tokens;
}

bool has_top_level_order_by(std::string_view sql) {
   std::vector<Token> tokens;
   try {
      tokens = tokenize_sql(sql);
   } catch (const Error&) {
      return false;
   }
   int depth = 0;
   for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      const auto& t = tokens[i];
      if (t.is_symbol("(")) ++depth;
      else if (t.is_symbol(")")) --depth;
      else if (depth == 0 && t.is_word("order") && tokens[i + 1].is_word("by")) return true;
   }
   return false;
}

} // namespace cyclesql
