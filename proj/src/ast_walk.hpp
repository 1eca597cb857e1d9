#pragma once

#include <variant>

#include "cyclesql/sql_ast.hpp"

namespace cyclesql::detail {

/// Clause group a column mention belongs to. Template slot numbering reuses
/// an index for a repeated column only within the same region.
enum class Region { Projection, Condition };

/// Visits column leaves and literals in canonical rendering order. Blocks
/// (select cores, subqueries, set-operation branches) are numbered in
/// preorder as they are entered.
///
/// Visitor needs:
///   void block_begin(Query&, int block);
///   void block_end(Query&, int block);
///   void column(ColumnLeaf&, int block, Region);
///   void literal(Literal&, const ValUnit& compared_with, int block);
template <typename Visitor>
class AstWalker {
   public:
   explicit AstWalker(Visitor& v, bool recurse = true) : v_(v), recurse_(recurse) {}

   void walk(Query& q) {
      const int block = next_block_++;
      v_.block_begin(q, block);
      for (auto& item : q.select) val_unit(item, block, Region::Projection);
      condition(q.where, block);
      for (auto& g : q.group_by) v_.column(g.column, block, Region::Projection);
      condition(q.having, block);
      for (auto& o : q.order_by) val_unit(o.value, block, Region::Projection);
      v_.block_end(q, block);
      if (recurse_ && q.set_rhs) walk(*q.set_rhs);
   }

   int blocks_seen() const { return next_block_; }

   private:
   void val_unit(ValUnit& u, int block, Region region) {
      v_.column(u.left.column, block, region);
      if (u.op != ArithOp::None) v_.column(u.right.column, block, region);
   }

   void operand(Operand& op, const ValUnit& left, int block) {
      if (auto* lit = std::get_if<Literal>(&op)) {
         v_.literal(*lit, left, block);
      } else if (auto* vu = std::get_if<ValUnit>(&op)) {
         val_unit(*vu, block, Region::Condition);
      } else if (recurse_) {
         walk(*std::get<Box<Query>>(op));
      }
   }

   void condition(Condition& c, int block) {
      for (auto& p : c.predicates) {
         val_unit(p.left, block, Region::Condition);
         operand(p.right, p.left, block);
         if (p.upper) operand(*p.upper, p.left, block);
      }
   }

   Visitor& v_;
   bool recurse_;
   int next_block_ = 0;
};

template <typename Visitor>
void walk_ast(Query& q, Visitor& v) {
   AstWalker<Visitor>(v, true).walk(q);
}

/// Visits only the leaves owned by this block (no subqueries, no set branches).
template <typename Visitor>
void walk_block(Query& q, Visitor& v) {
   AstWalker<Visitor>(v, false).walk(q);
}

} // namespace cyclesql::detail
