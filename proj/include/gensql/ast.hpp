#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gensql/error.hpp"
#include "gensql/value.hpp"

namespace gensql {

struct ScalarExpr;
struct CondExpr;
struct ModelExpr;
struct TableExpr;

using ScalarPtr = std::shared_ptr<const ScalarExpr>;
using CondPtr = std::shared_ptr<const CondExpr>;
using ModelPtr = std::shared_ptr<const ModelExpr>;
using TablePtr = std::shared_ptr<const TableExpr>;

// Possibly-unqualified column reference as written in the source. An empty id
// is resolved during desugaring.
struct ColName {
  std::string id;
  std::string col;

  std::string to_string() const { return id.empty() ? col : id + "." + col; }
  bool operator==(const ColName& o) const { return id == o.id && col == o.col; }
};

// ---------------------------------------------------------------------------
// Conditions (events and event-0s; the distinction is made by the checker)
// ---------------------------------------------------------------------------

struct CondAtom {
  ColName lhs;
  OpKind op;  // Lt, Gt or Eq
  ScalarPtr rhs;
};

// Bare column shorthand: GIVEN weight, PROBABILITY OF age. Expanded during
// desugaring to model.col = table.col.
struct CondBareCol {
  std::string col;
};

// The * condition with an optional EXCEPT list.
struct CondStar {
  std::vector<ColName> except;
};

struct CondAnd {
  CondPtr left, right;
};

struct CondOr {
  CondPtr left, right;
};

// Internal sentinel produced while simplifying probability targets; it is
// eliminated before evaluation and never printed or parsed.
struct CondTrue {};

struct CondExpr {
  std::variant<CondAtom, CondBareCol, CondStar, CondAnd, CondOr, CondTrue> node;
  Span span;
};

// ---------------------------------------------------------------------------
// Scalar expressions
// ---------------------------------------------------------------------------

struct ScalarConst {
  Value value;
  bool decimal_literal = false;  // 1.0 vs 1; drives literal typing
};

struct ScalarColRef {
  ColName ref;
};

struct ScalarOp {
  OpKind op;
  std::vector<ScalarPtr> args;
};

struct ScalarProb {
  CondPtr cond;
  ModelPtr model;
  bool density_keyword = false;  // PROBABILITY DENSITY OF
};

struct ScalarMutualInfo {
  std::vector<ColName> lhs;
  std::vector<ColName> rhs;
  CondPtr cond;  // may be null
  ModelPtr model;
};

struct ScalarExpr {
  std::variant<ScalarConst, ScalarColRef, ScalarOp, ScalarProb, ScalarMutualInfo> node;
  Span span;
};

// ---------------------------------------------------------------------------
// Model expressions
// ---------------------------------------------------------------------------

struct ModelId {
  std::string id;
};

struct ModelGiven {
  ModelPtr base;
  CondPtr cond;
};

struct ModelRename {
  ModelPtr base;
  std::string new_id;
};

struct ModelExpr {
  std::variant<ModelId, ModelGiven, ModelRename> node;
  Span span;
};

// ---------------------------------------------------------------------------
// Table expressions
// ---------------------------------------------------------------------------

enum class AggKind { Sum, Avg, Max, Min, Count, CountDistinct, Concat };

inline const char* agg_name(AggKind a) {
  switch (a) {
    case AggKind::Sum: return "SUM";
    case AggKind::Avg: return "AVG";
    case AggKind::Max: return "MAX";
    case AggKind::Min: return "MIN";
    case AggKind::Count: return "COUNT";
    case AggKind::CountDistinct: return "COUNT_DISTINCT";
    case AggKind::Concat: return "CONCAT";
  }
  return "?";
}

struct SelectItem {
  enum class Kind { Star, Expr };
  Kind kind = Kind::Expr;
  ScalarPtr expr;                    // Kind::Expr
  std::optional<std::string> alias;  // AS name
  std::vector<ColName> except;       // Kind::Star
  Span span;
};

struct AggItem {
  AggKind agg;
  ScalarPtr arg;
  std::string as;
  Span span;
};

struct TableId {
  std::string id;
};

struct TableUnion {
  TablePtr left, right;
};

struct TableJoin {
  TablePtr left, right;
};

struct TableRename {
  TablePtr base;
  std::string new_id;
};

struct TableDedup {
  TablePtr base;
};

struct TableDuplicate {
  TablePtr base;
  ScalarPtr times;
};

struct TableWhere {
  TablePtr base;
  ScalarPtr pred;
};

// WITH t AS id: body. Also binds conditioned models (WITH m GIVEN c AS id: body),
// which desugaring inlines by substitution.
struct TableWith {
  std::optional<TablePtr> bound_table;
  std::optional<ModelPtr> bound_model;
  std::string name;
  TablePtr body;
};

struct TableSelect {
  std::vector<SelectItem> items;
  TablePtr from;
};

struct TableGroupBy {
  TablePtr base;
  std::vector<std::pair<ScalarPtr, std::string>> keys;  // e AS col
  std::vector<AggItem> aggs;
};

struct TableGenerate {
  ModelPtr model;
  ScalarPtr limit;
};

struct TableGenJoin {
  TablePtr base;
  ModelPtr model;
};

struct TableExpr {
  std::variant<TableId, TableUnion, TableJoin, TableRename, TableDedup, TableDuplicate,
               TableWhere, TableWith, TableSelect, TableGroupBy, TableGenerate, TableGenJoin>
      node;
  Span span;
};

// ---------------------------------------------------------------------------
// Top-level query
// ---------------------------------------------------------------------------

// ORDER BY / LIMIT on final results are result post-processing directives, not
// part of the core grammar.
struct OrderBy {
  std::string column;
  bool ascending = true;
};

struct Query {
  std::variant<TablePtr, ScalarPtr> root;
  std::optional<OrderBy> order_by;
  std::optional<std::uint64_t> limit;

  bool is_scalar() const { return root.index() == 1; }
  const TablePtr& table() const { return std::get<TablePtr>(root); }
  const ScalarPtr& scalar() const { return std::get<ScalarPtr>(root); }
};

// ---------------------------------------------------------------------------
// Construction helpers
// ---------------------------------------------------------------------------

inline ScalarPtr mk_scalar(ScalarExpr e) { return std::make_shared<const ScalarExpr>(std::move(e)); }
inline CondPtr mk_cond(CondExpr e) { return std::make_shared<const CondExpr>(std::move(e)); }
inline ModelPtr mk_model(ModelExpr e) { return std::make_shared<const ModelExpr>(std::move(e)); }
inline TablePtr mk_table(TableExpr e) { return std::make_shared<const TableExpr>(std::move(e)); }

inline ScalarPtr sc_const(Value v, Span sp = {}, bool decimal = false) {
  return mk_scalar({ScalarConst{std::move(v), decimal}, sp});
}
inline ScalarPtr sc_col(std::string id, std::string col, Span sp = {}) {
  return mk_scalar({ScalarColRef{ColName{std::move(id), std::move(col)}}, sp});
}
inline ScalarPtr sc_op(OpKind op, std::vector<ScalarPtr> args, Span sp = {}) {
  return mk_scalar({ScalarOp{op, std::move(args)}, sp});
}
inline ScalarPtr sc_prob(CondPtr c, ModelPtr m, Span sp = {}, bool density = false) {
  return mk_scalar({ScalarProb{std::move(c), std::move(m), density}, sp});
}
inline CondPtr cd_atom(std::string id, std::string col, OpKind op, ScalarPtr rhs, Span sp = {}) {
  return mk_cond({CondAtom{ColName{std::move(id), std::move(col)}, op, std::move(rhs)}, sp});
}
inline CondPtr cd_and(CondPtr l, CondPtr r, Span sp = {}) {
  return mk_cond({CondAnd{std::move(l), std::move(r)}, sp});
}
inline CondPtr cd_or(CondPtr l, CondPtr r, Span sp = {}) {
  return mk_cond({CondOr{std::move(l), std::move(r)}, sp});
}
inline CondPtr cd_true(Span sp = {}) { return mk_cond({CondTrue{}, sp}); }
inline ModelPtr md_id(std::string id, Span sp = {}) {
  return mk_model({ModelId{std::move(id)}, sp});
}
inline ModelPtr md_given(ModelPtr m, CondPtr c, Span sp = {}) {
  return mk_model({ModelGiven{std::move(m), std::move(c)}, sp});
}
inline ModelPtr md_rename(ModelPtr m, std::string id, Span sp = {}) {
  return mk_model({ModelRename{std::move(m), std::move(id)}, sp});
}
inline TablePtr tb_id(std::string id, Span sp = {}) {
  return mk_table({TableId{std::move(id)}, sp});
}

// ---------------------------------------------------------------------------
// Printer. Emits text that reparses to a structurally identical tree, which
// the tests use both for the round-trip property and as a structural equality
// key.
// ---------------------------------------------------------------------------

std::string to_text(const ScalarPtr& e);
std::string to_text(const CondPtr& c);
std::string to_text(const ModelPtr& m);
std::string to_text(const TablePtr& t);

namespace detail {

inline std::string quote_string(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  out += '"';
  return out;
}

inline std::string const_text(const ScalarConst& c) {
  if (c.value.is_string()) return quote_string(c.value.as_string());
  if (c.value.is_real()) {
    std::string s = BaseType::format_double(c.value.as_real());
    // Keep decimal literals recognizable as such when reparsed.
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
      s += ".0";
    return s;
  }
  return c.value.to_string();
}

}  // namespace detail

inline std::string to_text(const ScalarPtr& e) {
  return std::visit(
      overloaded{
          [](const ScalarConst& c) { return detail::const_text(c); },
          [](const ScalarColRef& r) { return r.ref.to_string(); },
          [](const ScalarOp& o) -> std::string {
            switch (o.op) {
              case OpKind::Log:
              case OpKind::Exp:
              case OpKind::Sqrt:
                return std::string(op_name(o.op)) + "(" + to_text(o.args[0]) + ")";
              case OpKind::Neg:
                return "(-" + to_text(o.args[0]) + ")";
              default:
                return "(" + to_text(o.args[0]) + " " + op_name(o.op) + " " + to_text(o.args[1]) +
                       ")";
            }
          },
          [](const ScalarProb& p) {
            return std::string("PROBABILITY ") + (p.density_keyword ? "DENSITY " : "") + "OF " +
                   to_text(p.cond) + " UNDER " + to_text(p.model);
          },
          [](const ScalarMutualInfo& mi) {
            auto list = [](const std::vector<ColName>& cols) {
              std::string s = "[";
              for (std::size_t i = 0; i < cols.size(); ++i) {
                if (i) s += ", ";
                s += cols[i].to_string();
              }
              return s + "]";
            };
            std::string s = "MUTUAL INFO (" + list(mi.lhs) + ", " + list(mi.rhs);
            if (mi.cond) s += ", " + to_text(mi.cond);
            s += ") UNDER " + to_text(mi.model);
            return s;
          },
      },
      e->node);
}

inline std::string to_text(const CondPtr& c) {
  return std::visit(
      overloaded{
          [](const CondAtom& a) {
            return a.lhs.to_string() + " " + op_name(a.op) + " " + to_text(a.rhs);
          },
          [](const CondBareCol& b) { return b.col; },
          [](const CondStar& s) {
            std::string out = "*";
            for (const auto& e : s.except) out += " EXCEPT " + e.to_string();
            return out;
          },
          [](const CondAnd& a) {
            return "(" + to_text(a.left) + " AND " + to_text(a.right) + ")";
          },
          [](const CondOr& o) { return "(" + to_text(o.left) + " OR " + to_text(o.right) + ")"; },
          [](const CondTrue&) { return std::string("TRUE"); },
      },
      c->node);
}

inline std::string to_text(const ModelPtr& m) {
  return std::visit(
      overloaded{
          [](const ModelId& i) { return i.id; },
          [](const ModelGiven& g) {
            return "(" + to_text(g.base) + " GIVEN " + to_text(g.cond) + ")";
          },
          [](const ModelRename& r) {
            return "(RENAME " + to_text(r.base) + " AS " + r.new_id + ")";
          },
      },
      m->node);
}

inline std::string to_text(const TablePtr& t) {
  return std::visit(
      overloaded{
          [](const TableId& i) { return i.id; },
          [](const TableUnion& u) {
            return "(" + to_text(u.left) + " UNION " + to_text(u.right) + ")";
          },
          [](const TableJoin& j) {
            return "(" + to_text(j.left) + " JOIN " + to_text(j.right) + ")";
          },
          [](const TableRename& r) {
            return "(RENAME " + to_text(r.base) + " AS " + r.new_id + ")";
          },
          [](const TableDedup& d) { return "(DEDUP " + to_text(d.base) + ")"; },
          [](const TableDuplicate& d) {
            return "(" + to_text(d.base) + " DUPLICATE " + to_text(d.times) + " TIMES)";
          },
          [](const TableWhere& w) {
            return "(" + to_text(w.base) + " WHERE " + to_text(w.pred) + ")";
          },
          [](const TableWith& w) {
            std::string bound = w.bound_table ? to_text(*w.bound_table) : to_text(*w.bound_model);
            return "(WITH " + bound + " AS " + w.name + ": " + to_text(w.body) + ")";
          },
          [](const TableSelect& s) {
            std::string out = "(SELECT ";
            for (std::size_t i = 0; i < s.items.size(); ++i) {
              if (i) out += ", ";
              const SelectItem& it = s.items[i];
              if (it.kind == SelectItem::Kind::Star) {
                out += "*";
                for (const auto& e : it.except) out += " EXCEPT " + e.to_string();
              } else {
                out += to_text(it.expr);
                if (it.alias) out += " AS " + *it.alias;
              }
            }
            out += " FROM " + to_text(s.from) + ")";
            return out;
          },
          [](const TableGroupBy& g) {
            std::string out = "(GROUP " + to_text(g.base) + " BY [";
            for (std::size_t i = 0; i < g.keys.size(); ++i) {
              if (i) out += ", ";
              out += to_text(g.keys[i].first) + " AS " + g.keys[i].second;
            }
            out += "] AGGREGATING ";
            for (std::size_t i = 0; i < g.aggs.size(); ++i) {
              if (i) out += ", ";
              out += std::string(agg_name(g.aggs[i].agg)) + "(" + to_text(g.aggs[i].arg) +
                     ") AS " + g.aggs[i].as;
            }
            out += ")";
            return out;
          },
          [](const TableGenerate& g) {
            return "(GENERATE UNDER " + to_text(g.model) + " LIMIT " + to_text(g.limit) + ")";
          },
          [](const TableGenJoin& j) {
            return "(" + to_text(j.base) + " GENERATIVE JOIN " + to_text(j.model) + ")";
          },
      },
      t->node);
}

inline std::string to_text(const Query& q) {
  std::string out = q.is_scalar() ? to_text(q.scalar()) : to_text(q.table());
  if (q.order_by)
    out += " ORDER BY " + q.order_by->column + (q.order_by->ascending ? " ASC" : " DESC");
  if (q.limit) out += " LIMIT " + std::to_string(*q.limit);
  return out;
}

inline bool same_structure(const TablePtr& a, const TablePtr& b) { return to_text(a) == to_text(b); }
inline bool same_structure(const ScalarPtr& a, const ScalarPtr& b) { return to_text(a) == to_text(b); }
inline bool same_structure(const ModelPtr& a, const ModelPtr& b) { return to_text(a) == to_text(b); }
inline bool same_structure(const Query& a, const Query& b) { return to_text(a) == to_text(b); }

}  // namespace gensql
