#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cyclesql/schema.hpp"
#include "cyclesql/sql_ast.hpp"

namespace cyclesql {

// Supported SQL: select [distinct] with aggregates and two-column arithmetic,
// inner joins (ON equalities or comma), where/having and/or chains over
// =, !=, <, <=, >, >=, like, not like, in, not in, between, nested subqueries
// as comparison operands, group by, order by asc/desc, limit, and
// intersect/union/except. Anything else raises ErrorKind::UnsupportedSyntax.

/// Parses SQL against a schema into an alias-free AST.
SqlAst parse_sql(std::string_view sql, const DatabaseEnv& env);

enum class RenderStyle { Canonical };

/// Canonical surface form: lowercase keywords, single spaces, T1..Tn aliases
/// in FROM order when a block reads from more than one table.
std::string render(const SqlAst& ast, const DatabaseEnv& env, RenderStyle style = RenderStyle::Canonical);

/// Replaces every comparison literal with a type-erased placeholder.
SqlAst strip_values(SqlAst ast);

/// Value-stripped canonical form used for exact-match comparison.
std::string em_key(std::string_view sql, const DatabaseEnv& env);

/// Coarse template: a query skeleton whose columns are typed slots and whose
/// comparison values are value slots, with FROM and join conditions removed.
/// Identity is the canonical token text; join_arity is metadata.
class CoarseTemplate {
   public:
   struct ValueSlot {
      /// Column slot the value compares against; empty for column-less
      /// comparisons such as count ( * ) > val.
      std::optional<SlotId> bound;
   };

   CoarseTemplate() = default;
   CoarseTemplate(Query skeleton, int join_arity);

   const Query& skeleton() const { return skeleton_; }
   const std::string& text() const { return text_; }
   int join_arity() const { return join_arity_; }
   void set_join_arity(int arity) { join_arity_ = arity; }

   /// Distinct column slots in first-appearance order.
   const std::vector<SlotId>& column_slots() const { return column_slots_; }
   const std::vector<ValueSlot>& value_slots() const { return value_slots_; }
   /// Number of column slots per SlotType.
   const std::array<int, kSlotTypeCount>& slot_counts() const { return slot_counts_; }
   int slot_count(SlotType type) const { return slot_counts_[static_cast<std::size_t>(type)]; }
   /// Column slots referenced inside each block (preorder block numbering).
   const std::vector<std::vector<SlotId>>& block_slots() const { return block_slots_; }

   friend bool operator==(const CoarseTemplate& a, const CoarseTemplate& b) { return a.text_ == b.text_; }

   private:
   Query skeleton_;
   std::string text_;
   int join_arity_ = 1;
   std::vector<SlotId> column_slots_;
   std::vector<ValueSlot> value_slots_;
   std::array<int, kSlotTypeCount> slot_counts_{};
   std::vector<std::vector<SlotId>> block_slots_;
};

/// Concrete columns, values and tables that instantiate a template.
struct TemplateBinding {
   std::map<SlotId, ColumnRef> columns;
   /// Literal for each value slot, in value-slot order.
   std::vector<Literal> values;
   /// Table for each block that has no column slots (-1 for other blocks).
   std::vector<int> block_tables;
};

struct TemplateExtraction {
   CoarseTemplate tpl;
   TemplateBinding binding;
};

/// Template plus the bindings that reproduce the original query.
TemplateExtraction extract_template(const SqlAst& ast, const DatabaseEnv& env);
CoarseTemplate to_coarse(const SqlAst& ast, const DatabaseEnv& env);

/// Reads a template back from its canonical token text.
CoarseTemplate parse_template(std::string_view text, int join_arity = 1);

/// Instantiates a template; FROM lists and join conditions are rebuilt from
/// the tables of the assigned columns via fk_join_path.
SqlAst from_coarse(const CoarseTemplate& tpl, const TemplateBinding& binding, const DatabaseEnv& env);

/// All concrete literals of a query in rendering order (mutable access).
std::vector<Literal*> collect_literals(SqlAst& ast);

} // namespace cyclesql
