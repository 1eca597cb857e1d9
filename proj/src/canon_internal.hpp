#pragma once

#include <string>
#include <string_view>

#include "cyclesql/schema.hpp"
#include "cyclesql/sql_ast.hpp"

namespace cyclesql::detail {

/// Parses SQL when env is set; parses a template skeleton (slot names, val,
/// no FROM) when env is null.
Query parse_query_text(std::string_view text, const DatabaseEnv* env);

/// Renders a query; env may be null only when every FROM list is empty.
std::string render_query(const Query& q, const DatabaseEnv* env);

} // namespace cyclesql::detail
