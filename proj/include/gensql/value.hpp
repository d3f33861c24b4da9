#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gensql/error.hpp"
#include "gensql/numeric.hpp"

namespace gensql {

// Visitor helper for std::variant nodes.
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// ---------------------------------------------------------------------------
// Base types
// ---------------------------------------------------------------------------

enum class TypeKind { Real, PosReal, Ranged, Int, Nat, Bool, Str, Categorical };

struct BaseType {
  TypeKind kind = TypeKind::Real;
  double lo = 0.0, hi = 0.0;        // Ranged bounds
  std::vector<std::string> labels;  // Categorical labels, in declaration order

  static BaseType of(TypeKind k) {
    BaseType t;
    t.kind = k;
    return t;
  }
  static BaseType real() { return of(TypeKind::Real); }
  static BaseType posreal() { return of(TypeKind::PosReal); }
  static BaseType ranged(double lo, double hi) {
    if (!(lo < hi)) throw Error(Stage::Io, "base-type", "ranged type requires lo < hi");
    BaseType t = of(TypeKind::Ranged);
    t.lo = lo;
    t.hi = hi;
    return t;
  }
  static BaseType integer() { return of(TypeKind::Int); }
  static BaseType natural() { return of(TypeKind::Nat); }
  static BaseType boolean() { return of(TypeKind::Bool); }
  static BaseType str() { return of(TypeKind::Str); }
  static BaseType categorical(std::vector<std::string> labels) {
    if (labels.empty())
      throw Error(Stage::Io, "base-type", "categorical type requires at least one label");
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (std::size_t j = i + 1; j < labels.size(); ++j)
        if (labels[i] == labels[j])
          throw Error(Stage::Io, "base-type", "duplicate categorical label '" + labels[i] + "'");
    BaseType t = of(TypeKind::Categorical);
    t.labels = std::move(labels);
    return t;
  }

  bool is_continuous() const {
    return kind == TypeKind::Real || kind == TypeKind::PosReal || kind == TypeKind::Ranged;
  }
  bool is_discrete() const { return !is_continuous(); }
  bool is_numeric() const {
    return is_continuous() || kind == TypeKind::Int || kind == TypeKind::Nat;
  }
  bool is_integer_kind() const { return kind == TypeKind::Int || kind == TypeKind::Nat; }
  bool is_label_kind() const {
    return kind == TypeKind::Bool || kind == TypeKind::Str || kind == TypeKind::Categorical;
  }

  bool operator==(const BaseType& o) const {
    return kind == o.kind && lo == o.lo && hi == o.hi && labels == o.labels;
  }
  bool operator!=(const BaseType& o) const { return !(*this == o); }

  std::string to_string() const {
    switch (kind) {
      case TypeKind::Real: return "real";
      case TypeKind::PosReal: return "posreal";
      case TypeKind::Ranged:
        return "ranged(" + format_double(lo) + "," + format_double(hi) + ")";
      case TypeKind::Int: return "int";
      case TypeKind::Nat: return "nat";
      case TypeKind::Bool: return "bool";
      case TypeKind::Str: return "str";
      case TypeKind::Categorical: {
        std::string s = "categorical(";
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (i) s += ",";
          s += labels[i];
        }
        return s + ")";
      }
    }
    return "?";
  }

  // Shortest text that round-trips through strtod.
  static std::string format_double(double d) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), d);
    return std::string(buf, res.ptr);
  }
};

// Numeric coercion lattice: Nat <= Int <= Real, PosReal <= Real, Ranged <= Real.
inline bool coercible(const BaseType& from, const BaseType& to) {
  if (from == to) return true;
  if (to.kind == TypeKind::Real) return from.is_numeric();
  if (to.kind == TypeKind::Int) return from.kind == TypeKind::Nat;
  return false;
}

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

// A cell value. monostate is Null, the missing-value constant every base type
// admits. Strings carry both Str and Categorical values.
class Value {
 public:
  using Storage = std::variant<std::monostate, double, std::int64_t, bool, std::string>;

  Value() = default;

  static Value null() { return Value(); }
  static Value real(double d) { return Value(Storage{d}); }
  static Value integer(std::int64_t i) { return Value(Storage{i}); }
  static Value boolean(bool b) { return Value(Storage{b}); }
  static Value text(std::string s) { return Value(Storage{std::move(s)}); }

  bool is_null() const { return v_.index() == 0; }
  bool is_real() const { return v_.index() == 1; }
  bool is_int() const { return v_.index() == 2; }
  bool is_bool() const { return v_.index() == 3; }
  bool is_string() const { return v_.index() == 4; }

  double as_real() const { return std::get<double>(v_); }
  std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
  bool as_bool() const { return std::get<bool>(v_); }
  const std::string& as_string() const { return std::get<std::string>(v_); }

  // Numeric view with Int/Nat promoted to double.
  double as_number() const {
    if (is_real()) return as_real();
    if (is_int()) return static_cast<double>(as_int());
    throw EvalError("value", "expected a numeric value, got " + to_string());
  }
  bool is_number() const { return is_real() || is_int(); }

  bool operator==(const Value& o) const { return v_ == o.v_; }
  bool operator!=(const Value& o) const { return v_ != o.v_; }

  // Total order used for canonical row sorting and multiset comparison only;
  // it has no query-level meaning.
  bool operator<(const Value& o) const {
    if (v_.index() != o.v_.index()) return v_.index() < o.v_.index();
    return v_ < o.v_;
  }

  bool well_typed(const BaseType& t) const {
    if (is_null()) return true;
    switch (t.kind) {
      case TypeKind::Real: return is_real();
      case TypeKind::PosReal: return is_real() && as_real() >= 0.0;
      case TypeKind::Ranged: return is_real() && as_real() >= t.lo && as_real() <= t.hi;
      case TypeKind::Int: return is_int();
      case TypeKind::Nat: return is_int() && as_int() >= 0;
      case TypeKind::Bool: return is_bool();
      case TypeKind::Str: return is_string();
      case TypeKind::Categorical:
        return is_string() &&
               std::find(t.labels.begin(), t.labels.end(), as_string()) != t.labels.end();
    }
    return false;
  }

  std::string to_string() const {
    switch (v_.index()) {
      case 0: return "NULL";
      case 1: return BaseType::format_double(as_real());
      case 2: return std::to_string(as_int());
      case 3: return as_bool() ? "true" : "false";
      case 4: return as_string();
    }
    return "?";
  }

  std::size_t hash() const {
    switch (v_.index()) {
      case 0: return 0x9e3779b9u;
      case 1: {
        double d = as_real();
        if (d == 0.0) d = 0.0;  // collapse -0.0
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(d));
        __builtin_memcpy(&bits, &d, sizeof(d));
        return std::hash<std::uint64_t>{}(bits ^ 0x1);
      }
      case 2: return std::hash<std::int64_t>{}(as_int()) ^ 0x2;
      case 3: return std::hash<bool>{}(as_bool()) ^ 0x4;
      case 4: return std::hash<std::string>{}(as_string()) ^ 0x8;
    }
    return 0;
  }

 private:
  explicit Value(Storage v) : v_(std::move(v)) {}
  Storage v_;
};

// ---------------------------------------------------------------------------
// Scalar operators with Null lifting
// ---------------------------------------------------------------------------

enum class OpKind { Add, Sub, Mul, Div, Neg, Lt, Gt, Eq, And, Or, Log, Exp, Sqrt };

inline const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Add: return "+";
    case OpKind::Sub: return "-";
    case OpKind::Mul: return "*";
    case OpKind::Div: return "/";
    case OpKind::Neg: return "-";
    case OpKind::Lt: return "<";
    case OpKind::Gt: return ">";
    case OpKind::Eq: return "=";
    case OpKind::And: return "AND";
    case OpKind::Or: return "OR";
    case OpKind::Log: return "LOG";
    case OpKind::Exp: return "EXP";
    case OpKind::Sqrt: return "SQRT";
  }
  return "?";
}

// op_s: any Null argument forces a Null result. Division by zero also yields
// Null (Null doubles as the undefined value; see the project notes).
inline Value op_apply(OpKind op, const std::vector<Value>& args) {
  for (const Value& a : args)
    if (a.is_null()) return Value::null();

  auto need = [&](std::size_t n) {
    if (args.size() != n)
      throw EvalError("op-arity", std::string(op_name(op)) + " expects " + std::to_string(n) +
                                      " arguments, got " + std::to_string(args.size()));
  };
  auto number = [&](std::size_t i) {
    if (!args[i].is_number())
      throw EvalError("op-type", std::string(op_name(op)) + " applied to non-numeric value " +
                                     args[i].to_string());
    return args[i].as_number();
  };

  switch (op) {
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul: {
      need(2);
      if (args[0].is_int() && args[1].is_int()) {
        std::int64_t a = args[0].as_int(), b = args[1].as_int();
        switch (op) {
          case OpKind::Add: return Value::integer(a + b);
          case OpKind::Sub: return Value::integer(a - b);
          default: return Value::integer(a * b);
        }
      }
      double a = number(0), b = number(1);
      switch (op) {
        case OpKind::Add: return Value::real(a + b);
        case OpKind::Sub: return Value::real(a - b);
        default: return Value::real(a * b);
      }
    }
    case OpKind::Div: {
      need(2);
      double a = number(0), b = number(1);
      if (b == 0.0) return Value::null();
      return Value::real(a / b);
    }
    case OpKind::Neg: {
      need(1);
      if (args[0].is_int()) return Value::integer(-args[0].as_int());
      return Value::real(-number(0));
    }
    case OpKind::Lt:
    case OpKind::Gt: {
      need(2);
      double a = number(0), b = number(1);
      return Value::boolean(op == OpKind::Lt ? a < b : a > b);
    }
    case OpKind::Eq: {
      need(2);
      if (args[0].is_number() && args[1].is_number())
        return Value::boolean(args[0].as_number() == args[1].as_number());
      if (args[0].is_bool() && args[1].is_bool())
        return Value::boolean(args[0].as_bool() == args[1].as_bool());
      if (args[0].is_string() && args[1].is_string())
        return Value::boolean(args[0].as_string() == args[1].as_string());
      throw EvalError("op-type", "= applied to incompatible values " + args[0].to_string() +
                                     " and " + args[1].to_string());
    }
    case OpKind::And:
    case OpKind::Or: {
      need(2);
      if (!args[0].is_bool() || !args[1].is_bool())
        throw EvalError("op-type", std::string(op_name(op)) + " applied to non-boolean value");
      bool a = args[0].as_bool(), b = args[1].as_bool();
      return Value::boolean(op == OpKind::And ? (a && b) : (a || b));
    }
    case OpKind::Log: {
      need(1);
      double a = number(0);
      if (a < 0.0) return Value::null();
      return Value::real(std::log(a));
    }
    case OpKind::Exp: {
      need(1);
      return Value::real(std::exp(number(0)));
    }
    case OpKind::Sqrt: {
      need(1);
      double a = number(0);
      if (a < 0.0) return Value::null();
      return Value::real(std::sqrt(a));
    }
  }
  throw EvalError("op", "unknown operator");
}

// ---------------------------------------------------------------------------
// Schemas and tables
// ---------------------------------------------------------------------------

struct Column {
  std::string name;
  BaseType type;
};

struct Schema {
  std::vector<Column> columns;
  std::optional<std::string> identifier;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return static_cast<int>(i);
    return -1;
  }

  void validate() const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      for (std::size_t j = i + 1; j < columns.size(); ++j)
        if (columns[i].name == columns[j].name)
          throw Error(Stage::Io, "schema",
                      "duplicate column name '" + columns[i].name + "'");
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.name);
    return out;
  }

  bool same_columns(const Schema& o) const {
    if (columns.size() != o.columns.size()) return false;
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name != o.columns[i].name || columns[i].type != o.columns[i].type)
        return false;
    return true;
  }
};

using Row = std::vector<Value>;

// Bag of rows. Multiplicity is represented by repetition; every operation is
// observed only up to multiset equality.
struct Table {
  Schema schema;
  std::vector<Row> rows;

  std::size_t size() const { return rows.size(); }

  void check_row(const Row& r) const {
    if (r.size() != schema.columns.size())
      throw EvalError("row-arity", "row arity " + std::to_string(r.size()) +
                                       " does not match schema arity " +
                                       std::to_string(schema.columns.size()));
    for (std::size_t i = 0; i < r.size(); ++i)
      if (!r[i].well_typed(schema.columns[i].type))
        throw EvalError("cell-type", "value " + r[i].to_string() + " is not valid for column '" +
                                         schema.columns[i].name + "' of type " +
                                         schema.columns[i].type.to_string());
  }

  void validate() const {
    schema.validate();
    for (const Row& r : rows) check_row(r);
  }
};

inline bool row_less(const Row& a, const Row& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline bool multiset_equal(const Table& a, const Table& b) {
  if (!a.schema.same_columns(b.schema) || a.rows.size() != b.rows.size()) return false;
  std::vector<Row> ra = a.rows, rb = b.rows;
  std::sort(ra.begin(), ra.end(), row_less);
  std::sort(rb.begin(), rb.end(), row_less);
  return ra == rb;
}

inline Table bag_union(const Table& a, const Table& b) {
  if (!a.schema.same_columns(b.schema))
    throw EvalError("union-schema", "UNION requires identical column lists");
  Table out;
  out.schema = a.schema;
  out.schema.identifier.reset();  // T[] per the UNION rule
  out.rows = a.rows;
  out.rows.insert(out.rows.end(), b.rows.begin(), b.rows.end());
  return out;
}

inline Table bag_dedup(const Table& a) {
  Table out;
  out.schema = a.schema;
  std::vector<Row> sorted = a.rows;
  std::sort(sorted.begin(), sorted.end(), row_less);
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  out.rows = std::move(sorted);
  return out;
}

inline Table bag_duplicate(const Table& a, std::uint64_t n) {
  Table out;
  out.schema = a.schema;
  out.rows.reserve(a.rows.size() * n);
  for (std::uint64_t k = 0; k < n; ++k)
    out.rows.insert(out.rows.end(), a.rows.begin(), a.rows.end());
  return out;
}

inline Table bag_join(const Table& a, const Table& b) {
  for (const auto& ca : a.schema.columns)
    if (b.schema.index_of(ca.name) >= 0)
      throw EvalError("join-columns", "JOIN requires disjoint column names; '" + ca.name +
                                          "' appears on both sides");
  Table out;
  out.schema.columns = a.schema.columns;
  out.schema.columns.insert(out.schema.columns.end(), b.schema.columns.begin(),
                            b.schema.columns.end());
  out.rows.reserve(a.rows.size() * b.rows.size());
  for (const Row& ra : a.rows)
    for (const Row& rb : b.rows) {
      Row r = ra;
      r.insert(r.end(), rb.begin(), rb.end());
      out.rows.push_back(std::move(r));
    }
  return out;
}

}  // namespace gensql
