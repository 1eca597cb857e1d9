#include <sstream>

#include "canon_internal.hpp"
#include "cyclesql/error.hpp"

namespace cyclesql {

std::string_view to_string(SlotType type) {
   switch (type) {
      case SlotType::Key: return "key";
      case SlotType::Text: return "text";
      case SlotType::Number: return "number";
      case SlotType::Time: return "time";
      case SlotType::Boolean: return "boolean";
      case SlotType::Other: return "other";
   }
   return "other";
}

SlotType slot_type_of(const ColumnRef& column) {
   if (column.is_key) return SlotType::Key;
   switch (column.logical_type) {
      case LogicalType::Text: return SlotType::Text;
      case LogicalType::Number: return SlotType::Number;
      case LogicalType::Time: return SlotType::Time;
      case LogicalType::Boolean: return SlotType::Boolean;
      case LogicalType::Other: return SlotType::Other;
   }
   return SlotType::Other;
}

std::string SlotId::name() const { return std::string(to_string(type)) + std::to_string(index); }

std::string_view to_string(AggOp op) {
   switch (op) {
      case AggOp::None: return "";
      case AggOp::Count: return "count";
      case AggOp::Sum: return "sum";
      case AggOp::Avg: return "avg";
      case AggOp::Min: return "min";
      case AggOp::Max: return "max";
   }
   return "";
}

std::string_view to_string(CmpOp op) {
   switch (op) {
      case CmpOp::Eq: return "=";
      case CmpOp::Ne: return "!=";
      case CmpOp::Lt: return "<";
      case CmpOp::Le: return "<=";
      case CmpOp::Gt: return ">";
      case CmpOp::Ge: return ">=";
      case CmpOp::Like: return "like";
      case CmpOp::NotLike: return "not like";
      case CmpOp::In: return "in";
      case CmpOp::NotIn: return "not in";
      case CmpOp::Between: return "between";
   }
   return "";
}

std::string_view to_string(SetOp op) {
   switch (op) {
      case SetOp::None: return "";
      case SetOp::Intersect: return "intersect";
      case SetOp::Union: return "union";
      case SetOp::Except: return "except";
   }
   return "";
}

bool Condition::all_and() const {
   for (auto c : connectives)
      if (c != Connective::And) return false;
   return true;
}

namespace detail {

namespace {

std::string quote(std::string_view text) {
   std::string out = "'";
   for (char c : text) {
      if (c == '\'') out += "''";
      else out.push_back(c);
   }
   out.push_back('\'');
   return out;
}

class Renderer {
   public:
   explicit Renderer(const DatabaseEnv* env) : env_(env) {}

   void query(const Query& q) {
      const bool aliased = q.from.size() > 1;
      out_ << "select ";
      if (q.distinct) out_ << "distinct ";
      for (std::size_t i = 0; i < q.select.size(); ++i) {
         if (i) out_ << " , ";
         val_unit(q.select[i], aliased);
      }
      if (!q.from.empty()) from(q);
      if (!q.where.empty()) {
         out_ << " where ";
         condition(q.where, aliased);
      }
      if (!q.group_by.empty()) {
         out_ << " group by ";
         for (std::size_t i = 0; i < q.group_by.size(); ++i) {
            if (i) out_ << " , ";
            col_unit(q.group_by[i], aliased);
         }
      }
      if (!q.having.empty()) {
         out_ << " having ";
         condition(q.having, aliased);
      }
      if (!q.order_by.empty()) {
         out_ << " order by ";
         for (std::size_t i = 0; i < q.order_by.size(); ++i) {
            if (i) out_ << " , ";
            val_unit(q.order_by[i].value, aliased);
            if (q.order_by[i].descending) out_ << " desc";
         }
      }
      if (q.limit) out_ << " limit " << *q.limit;
      if (q.set_op != SetOp::None && q.set_rhs) {
         out_ << ' ' << to_string(q.set_op) << ' ';
         query(*q.set_rhs);
      }
   }

   std::string str() const { return out_.str(); }

   private:
   const std::string& table_name(int table) const {
      if (!env_) throw Error(ErrorKind::Internal, "rendering a FROM clause needs a schema");
      return env_->tables.at(static_cast<std::size_t>(table)).name;
   }

   void from(const Query& q) {
      out_ << " from ";
      if (q.from.size() == 1) {
         out_ << table_name(q.from[0]);
         return;
      }
      std::size_t next_join = 0;
      for (std::size_t i = 0; i < q.from.size(); ++i) {
         if (i) out_ << " join ";
         out_ << table_name(q.from[i]) << " as T" << (i + 1);
         bool first = true;
         while (next_join < q.joins.size() &&
                static_cast<std::size_t>(std::max(q.joins[next_join].left.source, q.joins[next_join].right.source)) <= i) {
            out_ << (first ? " on " : " and ");
            first = false;
            column(q.joins[next_join].left, true);
            out_ << " = ";
            column(q.joins[next_join].right, true);
            ++next_join;
         }
      }
   }

   void column(const ColumnLeaf& leaf, bool aliased) {
      switch (leaf.kind) {
         case ColumnLeaf::Kind::Star: out_ << '*'; break;
         case ColumnLeaf::Kind::Slot: out_ << leaf.slot.name(); break;
         case ColumnLeaf::Kind::Column:
            if (aliased) out_ << 'T' << (leaf.source + 1) << '.';
            out_ << leaf.column.name;
            break;
      }
   }

   void col_unit(const ColUnit& u, bool aliased) {
      if (u.agg == AggOp::None) {
         column(u.column, aliased);
         return;
      }
      out_ << to_string(u.agg) << " ( ";
      if (u.distinct) out_ << "distinct ";
      column(u.column, aliased);
      out_ << " )";
   }

   void val_unit(const ValUnit& u, bool aliased) {
      col_unit(u.left, aliased);
      if (u.op == ArithOp::None) return;
      static constexpr const char* ops[] = {"", " + ", " - ", " * ", " / "};
      out_ << ops[static_cast<int>(u.op)];
      col_unit(u.right, aliased);
   }

   void literal(const Literal& lit) {
      switch (lit.kind) {
         case Literal::Kind::Number: out_ << lit.text; break;
         case Literal::Kind::String: out_ << quote(lit.text); break;
         case Literal::Kind::Placeholder: out_ << "<val>"; break;
         case Literal::Kind::Slot: out_ << "val"; break;
      }
   }

   void operand(const Operand& op, bool aliased) {
      if (const auto* lit = std::get_if<Literal>(&op)) {
         literal(*lit);
      } else if (const auto* vu = std::get_if<ValUnit>(&op)) {
         val_unit(*vu, aliased);
      } else {
         out_ << "( ";
         query(*std::get<Box<Query>>(op));
         out_ << " )";
      }
   }

   void condition(const Condition& c, bool aliased) {
      for (std::size_t i = 0; i < c.predicates.size(); ++i) {
         if (i) out_ << (c.connectives[i - 1] == Connective::And ? " and " : " or ");
         const auto& p = c.predicates[i];
         val_unit(p.left, aliased);
         out_ << ' ' << to_string(p.op) << ' ';
         operand(p.right, aliased);
         if (p.upper) {
            out_ << " and ";
            operand(*p.upper, aliased);
         }
      }
   }

   const DatabaseEnv* env_;
   std::ostringstream out_;
};

} // namespace

std::string render_query(const Query& q, const DatabaseEnv* env) {
   Renderer r(env);
   r.query(q);
   return r.str();
}

} // namespace detail
} // namespace cyclesql
