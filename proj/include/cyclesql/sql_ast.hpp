#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cyclesql/schema.hpp"

namespace cyclesql {

/// Copyable owning pointer for recursive AST nodes (deep copy, deep compare).
template <typename T>
class Box {
   public:
   Box() = default;
   Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
   Box(const Box& other) : ptr_(other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr) {}
   Box(Box&&) noexcept = default;
   Box& operator=(const Box& other) {
      if (this != &other) ptr_ = other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr;
      return *this;
   }
   Box& operator=(Box&&) noexcept = default;

   explicit operator bool() const { return static_cast<bool>(ptr_); }
   T& operator*() { return *ptr_; }
   const T& operator*() const { return *ptr_; }
   T* operator->() { return ptr_.get(); }
   const T* operator->() const { return ptr_.get(); }
   T* get() { return ptr_.get(); }
   const T* get() const { return ptr_.get(); }

   friend bool operator==(const Box& a, const Box& b) {
      if (!a.ptr_ || !b.ptr_) return !a.ptr_ && !b.ptr_;
      return *a.ptr_ == *b.ptr_;
   }

   private:
   std::unique_ptr<T> ptr_;
};

enum class AggOp : std::uint8_t { None, Count, Sum, Avg, Min, Max };
enum class ArithOp : std::uint8_t { None, Add, Sub, Mul, Div };
enum class CmpOp : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge, Like, NotLike, In, NotIn, Between };
enum class Connective : std::uint8_t { And, Or };
enum class SetOp : std::uint8_t { None, Intersect, Union, Except };

/// Column slot types of coarse templates. Key columns take Key slots,
/// everything else follows its logical type.
enum class SlotType : std::uint8_t { Key, Text, Number, Time, Boolean, Other };

inline constexpr int kSlotTypeCount = 6;

std::string_view to_string(SlotType type);
SlotType slot_type_of(const ColumnRef& column);

struct SlotId {
   SlotType type = SlotType::Other;
   int index = 0; // 1-based, dense per type

   std::string name() const;
   friend bool operator==(const SlotId&, const SlotId&) = default;
   friend auto operator<=>(const SlotId&, const SlotId&) = default;
};

/// Column position in an expression: "*", a concrete column drawn from one of
/// the enclosing FROM entries, or a template slot.
struct ColumnLeaf {
   enum class Kind : std::uint8_t { Star, Column, Slot };
   Kind kind = Kind::Star;
   /// Ordinal of the FROM entry providing the column (Kind::Column only).
   int source = -1;
   ColumnRef column;
   SlotId slot;

   static ColumnLeaf star() { return {}; }
   static ColumnLeaf of(int source, ColumnRef column) { return {Kind::Column, source, std::move(column), {}}; }
   static ColumnLeaf of_slot(SlotId slot) { return {Kind::Slot, -1, {}, slot}; }

   friend bool operator==(const ColumnLeaf& a, const ColumnLeaf& b) {
      if (a.kind != b.kind) return false;
      switch (a.kind) {
         case Kind::Star: return true;
         case Kind::Column: return a.source == b.source && a.column == b.column;
         case Kind::Slot: return a.slot == b.slot;
      }
      return false;
   }
};

struct ColUnit {
   AggOp agg = AggOp::None;
   bool distinct = false;
   ColumnLeaf column;

   friend bool operator==(const ColUnit&, const ColUnit&) = default;
};

/// A column unit, optionally combined arithmetically with a second one.
struct ValUnit {
   ColUnit left;
   ArithOp op = ArithOp::None;
   ColUnit right;

   static ValUnit of(ColUnit unit) { return ValUnit{std::move(unit), ArithOp::None, {}}; }
   friend bool operator==(const ValUnit& a, const ValUnit& b) {
      return a.left == b.left && a.op == b.op && (a.op == ArithOp::None || a.right == b.right);
   }
};

struct Literal {
   enum class Kind : std::uint8_t {
      Number,
      String,
      /// Type-erased value produced by strip_values.
      Placeholder,
      /// Template value slot.
      Slot,
   };
   Kind kind = Kind::Number;
   std::string text;
   /// Logical type of the column compared against, when known.
   LogicalType type = LogicalType::Other;
   /// Column slot a template value slot is bound to; empty for column-less comparisons.
   std::optional<SlotId> bound;

   friend bool operator==(const Literal& a, const Literal& b) {
      if (a.kind != b.kind) return false;
      if (a.kind == Kind::Slot) return a.bound == b.bound;
      if (a.kind == Kind::Placeholder) return true;
      return a.text == b.text;
   }
};

struct Query;

using Operand = std::variant<Literal, ValUnit, Box<Query>>;

struct Predicate {
   ValUnit left;
   CmpOp op = CmpOp::Eq;
   Operand right;
   /// Upper bound of BETWEEN.
   std::optional<Operand> upper;

   friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Flat and/or chain, evaluated with SQL precedence by the engine.
struct Condition {
   std::vector<Predicate> predicates;
   /// connectives[i] joins predicates[i] and predicates[i + 1].
   std::vector<Connective> connectives;

   bool empty() const { return predicates.empty(); }
   bool all_and() const;
   friend bool operator==(const Condition&, const Condition&) = default;
};

struct JoinOn {
   ColumnLeaf left;
   ColumnLeaf right;

   friend bool operator==(const JoinOn&, const JoinOn&) = default;
};

struct OrderItem {
   ValUnit value;
   bool descending = false;

   friend bool operator==(const OrderItem&, const OrderItem&) = default;
};

/// One select block plus an optional set-operation continuation. Templates
/// use the same structure with an empty FROM list.
struct Query {
   bool distinct = false;
   std::vector<ValUnit> select;
   /// Table ordinals; ColumnLeaf::source indexes into this list.
   std::vector<int> from;
   std::vector<JoinOn> joins;
   Condition where;
   std::vector<ColUnit> group_by;
   Condition having;
   std::vector<OrderItem> order_by;
   std::optional<std::int64_t> limit;
   SetOp set_op = SetOp::None;
   Box<Query> set_rhs;

   friend bool operator==(const Query&, const Query&) = default;
};

using SqlAst = Query;

std::string_view to_string(AggOp op);
std::string_view to_string(CmpOp op);
std::string_view to_string(SetOp op);

} // namespace cyclesql
