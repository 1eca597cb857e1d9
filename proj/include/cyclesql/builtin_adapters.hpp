#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "cyclesql/adapter.hpp"

namespace cyclesql {

/// Pseudo-English rendering of a canonical query. "select count ( * ) from X"
/// becomes "how many x are there ?"; otherwise keywords and operators are
/// spelled out word by word, identifiers lowercased, literals kept verbatim.
std::string gloss(std::string_view canonical_sql);

/// Exact inverse of gloss up to identifier case.
std::string ungloss(std::string_view utterance);

/// perfect: G = gloss, F = ungloss.
/// corrupting: as perfect, but F perturbs one literal with probability 0.5,
///   decided by a hash of the seed and the utterance.
/// lossy: G drops every WHERE and HAVING clause, F = ungloss.
std::unique_ptr<ModelAdapter> make_builtin(std::string_view name, const AdapterOptions& options = {});

} // namespace cyclesql
