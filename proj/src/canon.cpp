#include "cyclesql/canon.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "ast_walk.hpp"
#include "canon_internal.hpp"
#include "cyclesql/error.hpp"

namespace cyclesql {

using detail::Region;

SqlAst parse_sql(std::string_view sql, const DatabaseEnv& env) { return detail::parse_query_text(sql, &env); }

std::string render(const SqlAst& ast, const DatabaseEnv& env, RenderStyle) { return detail::render_query(ast, &env); }

namespace {

struct LiteralStripper {
   void block_begin(Query&, int) {}
   void block_end(Query&, int) {}
   void column(ColumnLeaf&, int, Region) {}
   void literal(Literal& lit, const ValUnit&, int) {
      if (lit.kind == Literal::Kind::Number || lit.kind == Literal::Kind::String) {
         lit.kind = Literal::Kind::Placeholder;
         lit.text.clear();
         lit.type = LogicalType::Other;
      }
   }
};

struct LiteralCollector {
   std::vector<Literal*> out;
   void block_begin(Query&, int) {}
   void block_end(Query&, int) {}
   void column(ColumnLeaf&, int, Region) {}
   void literal(Literal& lit, const ValUnit&, int) {
      if (lit.kind == Literal::Kind::Number || lit.kind == Literal::Kind::String) out.push_back(&lit);
   }
};

// Gathers the shape of a template skeleton.
struct ShapeCollector {
   std::vector<SlotId> column_slots;
   std::vector<CoarseTemplate::ValueSlot> value_slots;
   std::vector<std::vector<SlotId>> block_slots;

   void block_begin(Query&, int block) {
      if (static_cast<std::size_t>(block) >= block_slots.size()) block_slots.resize(static_cast<std::size_t>(block) + 1);
   }
   void block_end(Query&, int) {}
   void column(ColumnLeaf& leaf, int block, Region) {
      if (leaf.kind == ColumnLeaf::Kind::Column)
         throw Error(ErrorKind::Internal, "template skeleton holds a concrete column");
      if (leaf.kind != ColumnLeaf::Kind::Slot) return;
      if (std::find(column_slots.begin(), column_slots.end(), leaf.slot) == column_slots.end()) column_slots.push_back(leaf.slot);
      auto& bs = block_slots[static_cast<std::size_t>(block)];
      if (std::find(bs.begin(), bs.end(), leaf.slot) == bs.end()) bs.push_back(leaf.slot);
   }
   void literal(Literal& lit, const ValUnit&, int) {
      if (lit.kind == Literal::Kind::Slot) value_slots.push_back({lit.bound});
   }
};

} // namespace

SqlAst strip_values(SqlAst ast) {
   LiteralStripper s;
   detail::walk_ast(ast, s);
   return ast;
}

std::string em_key(std::string_view sql, const DatabaseEnv& env) { return render(strip_values(parse_sql(sql, env)), env); }

std::vector<Literal*> collect_literals(SqlAst& ast) {
   LiteralCollector c;
   detail::walk_ast(ast, c);
   return std::move(c.out);
}

CoarseTemplate::CoarseTemplate(Query skeleton, int join_arity) : skeleton_(std::move(skeleton)), join_arity_(join_arity) {
   text_ = detail::render_query(skeleton_, nullptr);
   ShapeCollector shape;
   detail::walk_ast(skeleton_, shape);
   column_slots_ = std::move(shape.column_slots);
   value_slots_ = std::move(shape.value_slots);
   block_slots_ = std::move(shape.block_slots);
   // Slots must be dense per type and numbered by first appearance.
   std::array<int, kSlotTypeCount> seen{};
   for (const auto& s : column_slots_) {
      auto& n = seen[static_cast<std::size_t>(s.type)];
      if (s.index != n + 1)
         throw Error(ErrorKind::Format, "template '" + text_ + "' has non-dense slot numbering at " + s.name());
      n = s.index;
   }
   slot_counts_ = seen;
}

namespace {

bool plain_column(const ColUnit& u) { return u.agg == AggOp::None && u.column.kind == ColumnLeaf::Kind::Column; }

// Drops `a = b` conjuncts over foreign-key linked columns of different FROM
// entries; these are join conditions written in WHERE.
void drop_join_predicates(Query& q, const DatabaseEnv& env) {
   if (!q.where.empty() && q.where.all_and()) {
      Condition kept;
      for (auto& p : q.where.predicates) {
         const auto* rhs = std::get_if<ValUnit>(&p.right);
         const bool is_join = p.op == CmpOp::Eq && p.left.op == ArithOp::None && plain_column(p.left.left) && rhs &&
                              rhs->op == ArithOp::None && plain_column(rhs->left) &&
                              p.left.left.column.source != rhs->left.column.source &&
                              env.linked_by_foreign_key(p.left.left.column.column, rhs->left.column.column);
         if (!is_join) kept.predicates.push_back(std::move(p));
      }
      if (!kept.predicates.empty()) kept.connectives.assign(kept.predicates.size() - 1, Connective::And);
      q.where = std::move(kept);
   }
   auto recurse_operand = [&](Operand& op) {
      if (auto* sub = std::get_if<Box<Query>>(&op)) drop_join_predicates(**sub, env);
   };
   for (auto* c : {&q.where, &q.having})
      for (auto& p : c->predicates) {
         recurse_operand(p.right);
         if (p.upper) recurse_operand(*p.upper);
      }
   if (q.set_rhs) drop_join_predicates(*q.set_rhs, env);
}

struct Slotter {
   TemplateBinding binding;
   std::map<std::pair<Region, ColumnRef>, SlotId> slots;
   std::array<int, kSlotTypeCount> counters{};
   std::vector<int> first_table;
   std::vector<bool> has_columns;
   int join_arity = 1;

   void block_begin(Query& q, int block) {
      const auto b = static_cast<std::size_t>(block);
      if (b >= first_table.size()) {
         first_table.resize(b + 1, -1);
         has_columns.resize(b + 1, false);
      }
      first_table[b] = q.from.empty() ? -1 : q.from.front();
      const std::set<int> distinct(q.from.begin(), q.from.end());
      join_arity = std::max(join_arity, static_cast<int>(distinct.size()));
   }
   void block_end(Query& q, int) {
      q.from.clear();
      q.joins.clear();
   }
   void column(ColumnLeaf& leaf, int block, Region region) {
      if (leaf.kind != ColumnLeaf::Kind::Column) return;
      has_columns[static_cast<std::size_t>(block)] = true;
      const auto key = std::make_pair(region, leaf.column);
      auto it = slots.find(key);
      if (it == slots.end()) {
         const SlotType type = slot_type_of(leaf.column);
         SlotId id{type, ++counters[static_cast<std::size_t>(type)]};
         it = slots.emplace(key, id).first;
         binding.columns.emplace(id, leaf.column);
      }
      leaf = ColumnLeaf::of_slot(it->second);
   }
   void literal(Literal& lit, const ValUnit& left, int) {
      if (lit.kind != Literal::Kind::Number && lit.kind != Literal::Kind::String) return;
      binding.values.push_back(lit);
      std::optional<SlotId> bound;
      if (left.left.column.kind == ColumnLeaf::Kind::Slot) bound = left.left.column.slot;
      else if (left.op != ArithOp::None && left.right.column.kind == ColumnLeaf::Kind::Slot) bound = left.right.column.slot;
      lit = Literal{Literal::Kind::Slot, "", LogicalType::Other, bound};
   }
};

} // namespace

TemplateExtraction extract_template(const SqlAst& ast, const DatabaseEnv& env) {
   Query skeleton = ast;
   drop_join_predicates(skeleton, env);
   Slotter slotter;
   detail::walk_ast(skeleton, slotter);
   TemplateBinding binding = std::move(slotter.binding);
   binding.block_tables.assign(slotter.first_table.size(), -1);
   for (std::size_t b = 0; b < slotter.first_table.size(); ++b)
      if (!slotter.has_columns[b]) binding.block_tables[b] = slotter.first_table[b];
   return TemplateExtraction{CoarseTemplate(std::move(skeleton), slotter.join_arity), std::move(binding)};
}

CoarseTemplate to_coarse(const SqlAst& ast, const DatabaseEnv& env) { return extract_template(ast, env).tpl; }

CoarseTemplate parse_template(std::string_view text, int join_arity) {
   return CoarseTemplate(detail::parse_query_text(text, nullptr), join_arity);
}

namespace {

struct Filler {
   const CoarseTemplate& tpl;
   const TemplateBinding& binding;
   const DatabaseEnv& env;
   std::vector<std::vector<int>> block_tables;
   std::size_t next_value = 0;

   void block_begin(Query&, int block) {
      if (static_cast<std::size_t>(block) >= block_tables.size()) block_tables.resize(static_cast<std::size_t>(block) + 1);
   }

   void column(ColumnLeaf& leaf, int block, Region) {
      if (leaf.kind != ColumnLeaf::Kind::Slot) return;
      const ColumnRef& c = binding.columns.at(leaf.slot);
      auto& tables = block_tables[static_cast<std::size_t>(block)];
      if (std::find(tables.begin(), tables.end(), c.table_index) == tables.end()) tables.push_back(c.table_index);
      // Source is fixed up once the block's FROM list is known.
      leaf = ColumnLeaf::of(c.table_index, c);
   }

   void literal(Literal& lit, const ValUnit&, int) {
      if (lit.kind != Literal::Kind::Slot) return;
      Literal value = binding.values.at(next_value++);
      if (lit.bound) value.type = binding.columns.at(*lit.bound).logical_type;
      lit = std::move(value);
   }

   void block_end(Query& q, int block) {
      std::vector<int> tables = block_tables[static_cast<std::size_t>(block)];
      if (tables.empty()) {
         const int t = static_cast<std::size_t>(block) < binding.block_tables.size() ? binding.block_tables[static_cast<std::size_t>(block)] : -1;
         if (t < 0 || static_cast<std::size_t>(t) >= env.tables.size())
            throw Error(ErrorKind::Assignment, "block " + std::to_string(block) + " of '" + tpl.text() + "' has no columns and no table");
         tables.push_back(t);
      }
      const auto conditions = fk_join_path(env, std::set<int>(tables.begin(), tables.end()));
      for (int t : tables_of(conditions))
         if (std::find(tables.begin(), tables.end(), t) == tables.end()) tables.push_back(t);
      auto source_of = [&](int table) {
         return static_cast<int>(std::find(tables.begin(), tables.end(), table) - tables.begin());
      };
      q.from = tables;
      q.joins.clear();
      for (const auto& c : conditions)
         q.joins.push_back(JoinOn{ColumnLeaf::of(source_of(c.left.table_index), c.left),
                                  ColumnLeaf::of(source_of(c.right.table_index), c.right)});
      std::stable_sort(q.joins.begin(), q.joins.end(), [](const JoinOn& a, const JoinOn& b) {
         return std::max(a.left.source, a.right.source) < std::max(b.left.source, b.right.source);
      });
      SourceFixer fixer{source_of};
      detail::walk_block(q, fixer);
   }

   struct SourceFixer {
      std::function<int(int)> source_of;
      void block_begin(Query&, int) {}
      void block_end(Query&, int) {}
      void column(ColumnLeaf& leaf, int, Region) {
         if (leaf.kind == ColumnLeaf::Kind::Column) leaf.source = source_of(leaf.column.table_index);
      }
      void literal(Literal&, const ValUnit&, int) {}
   };
};

} // namespace

SqlAst from_coarse(const CoarseTemplate& tpl, const TemplateBinding& binding, const DatabaseEnv& env) {
   for (const auto& slot : tpl.column_slots()) {
      auto it = binding.columns.find(slot);
      if (it == binding.columns.end()) throw Error(ErrorKind::Assignment, "slot " + slot.name() + " is unassigned");
      const ColumnRef& c = it->second;
      if (c.table_index < 0 || static_cast<std::size_t>(c.table_index) >= env.tables.size() || c.column_index < 0 ||
          static_cast<std::size_t>(c.column_index) >= env.tables[static_cast<std::size_t>(c.table_index)].columns.size())
         throw Error(ErrorKind::Assignment, "slot " + slot.name() + " is assigned a column outside '" + env.db_id + "'");
      const ColumnRef& actual = env.column(c.table_index, c.column_index);
      if (slot_type_of(actual) != slot.type)
         throw Error(ErrorKind::Assignment, "slot " + slot.name() + " cannot take column '" + actual.name + "' of type " +
                                               std::string(to_string(slot_type_of(actual))));
   }
   if (binding.values.size() < tpl.value_slots().size())
      throw Error(ErrorKind::Assignment, "template '" + tpl.text() + "' needs " + std::to_string(tpl.value_slots().size()) +
                                            " values, got " + std::to_string(binding.values.size()));

   // Resolve against the schema's own ColumnRef copies.
   TemplateBinding resolved = binding;
   for (auto& [slot, c] : resolved.columns) c = env.column(c.table_index, c.column_index);

   Query q = tpl.skeleton();
   Filler filler{tpl, resolved, env, {}, 0};
   detail::walk_ast(q, filler);
   return q;
}

} // namespace cyclesql
