#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gensql/ast.hpp"
#include "gensql/desugar.hpp"
#include "gensql/env.hpp"
#include "gensql/error.hpp"

namespace gensql {

// ---------------------------------------------------------------------------
// Query types
// ---------------------------------------------------------------------------

struct TableType {
  std::optional<std::string> id;
  std::vector<Column> cols;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

struct ModelType {
  std::string id;
  std::vector<Column> cols;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

struct EventType {
  int level = 1;  // 0: point condition, 1: positive-measure condition
  std::string model_id;
};

struct ScalarType {
  BaseType type;
  bool null_literal = false;
};

using QueryType = std::variant<TableType, ModelType, EventType, ScalarType>;

struct TypeInfo {
  std::unordered_map<const void*, QueryType> types;

  template <class T>
  void put(const std::shared_ptr<const T>& node, QueryType t) {
    types[node.get()] = std::move(t);
  }
  template <class T>
  const QueryType* find(const std::shared_ptr<const T>& node) const {
    auto it = types.find(node.get());
    return it == types.end() ? nullptr : &it->second;
  }
  template <class T>
  int cond_level(const std::shared_ptr<const T>& node) const {
    const QueryType* t = find(node);
    if (!t) return 1;
    if (auto* e = std::get_if<EventType>(t)) return e->level;
    return 1;
  }
};

// ---------------------------------------------------------------------------
// vars / condvars macros
// ---------------------------------------------------------------------------

inline void vars_into(const CondPtr& c, std::set<std::string>& out) {
  std::visit(overloaded{
                 [&](const CondAtom& a) { out.insert(a.lhs.col); },
                 [&](const CondBareCol& b) { out.insert(b.col); },
                 [&](const CondStar&) {},
                 [&](const CondAnd& a) {
                   vars_into(a.left, out);
                   vars_into(a.right, out);
                 },
                 [&](const CondOr& o) {
                   vars_into(o.left, out);
                   vars_into(o.right, out);
                 },
                 [&](const CondTrue&) {},
             },
             c->node);
}

inline std::set<std::string> vars(const CondPtr& c) {
  std::set<std::string> out;
  vars_into(c, out);
  return out;
}

// Structural event classification: a pure conjunction of equality atoms is a
// point condition (event-0); anything containing an inequality or a
// disjunction is a positive-measure event.
inline int classify_cond(const CondPtr& c) {
  return std::visit(overloaded{
                        [&](const CondAtom& a) { return a.op == OpKind::Eq ? 0 : 1; },
                        [&](const CondBareCol&) { return 0; },
                        [&](const CondStar&) { return 0; },
                        [&](const CondAnd& a) {
                          return std::max(classify_cond(a.left), classify_cond(a.right));
                        },
                        [&](const CondOr&) { return 1; },
                        [&](const CondTrue&) { return 0; },
                    },
                    c->node);
}

inline std::set<std::string> condvars(const ModelPtr& m) {
  return std::visit(overloaded{
                        [&](const ModelId&) { return std::set<std::string>{}; },
                        [&](const ModelGiven& g) {
                          if (classify_cond(g.cond) == 0) return vars(g.cond);
                          return condvars(g.base);
                        },
                        [&](const ModelRename& r) { return condvars(r.base); },
                    },
                    m->node);
}

// ---------------------------------------------------------------------------
// Type checker
// ---------------------------------------------------------------------------

// Permissive mode is the pipeline's pre-normalization pass: it accepts nested
// GIVEN chains and partially-overlapping probability targets (the normalizer
// rewrites both, with a warning). Formal mode enforces the declarative rules
// exactly and is used for the rejection suite and as a post-normalization
// assertion.
enum class Strictness { Permissive, Formal };

class TypeChecker {
 public:
  TypeChecker(const GlobalEnv& env, Strictness mode = Strictness::Permissive,
              Diagnostics* diags = nullptr)
      : env_(env), mode_(mode), diags_(diags) {}

  TypeInfo check(const Query& q) {
    std::vector<TableType> delta;
    if (q.is_scalar())
      check_scalar(q.scalar(), delta);
    else
      check_table(q.table(), delta);
    return std::move(info_);
  }

  TableType check_table_expr(const TablePtr& t) {
    std::vector<TableType> delta;
    TableType ty = check_table(t, delta);
    return ty;
  }

  TypeInfo take_info() { return std::move(info_); }

 private:
  const GlobalEnv& env_;
  Strictness mode_;
  Diagnostics* diags_;
  TypeInfo info_;
  std::map<std::string, TableType> with_scope_;

  void warn_here(std::string msg, Span sp) {
    if (diags_) warn(*diags_, std::move(msg), sp);
  }

  // ---- scalars --------------------------------------------------------------

  ScalarType check_scalar(const ScalarPtr& e, std::vector<TableType>& delta) {
    ScalarType t = std::visit(
        overloaded{
            [&](const ScalarConst& c) { return literal_type(c); },
            [&](const ScalarColRef& r) { return colref_type(r, e->span, delta); },
            [&](const ScalarOp& o) { return op_type(o, e->span, delta); },
            [&](const ScalarProb& p) { return prob_type(p, e->span, delta); },
            [&](const ScalarMutualInfo& mi) { return mutual_info_type(mi, e->span, delta); },
        },
        e->node);
    info_.put(e, t);
    return t;
  }

  static ScalarType literal_type(const ScalarConst& c) {
    if (c.value.is_null()) return ScalarType{BaseType::real(), true};
    if (c.value.is_int())
      return ScalarType{c.value.as_int() >= 0 ? BaseType::natural() : BaseType::integer()};
    if (c.value.is_real()) return ScalarType{BaseType::real()};
    if (c.value.is_bool()) return ScalarType{BaseType::boolean()};
    return ScalarType{BaseType::str()};
  }

  ScalarType colref_type(const ScalarColRef& r, Span sp, std::vector<TableType>& delta) {
    if (r.ref.id.empty())
      throw TypeError("unresolved-column",
                      "internal: unqualified column survived desugaring: " + r.ref.col, sp);
    for (auto it = delta.rbegin(); it != delta.rend(); ++it) {
      if (it->id && *it->id == r.ref.id) {
        int i = it->index_of(r.ref.col);
        if (i < 0)
          throw TypeError("unknown-column",
                          "table '" + r.ref.id + "' has no column '" + r.ref.col + "'", sp);
        return ScalarType{it->cols[i].type};
      }
    }
    if (env_.is_model(r.ref.id))
      throw TypeError("model-column-as-scalar",
                      "columns of model '" + r.ref.id +
                          "' can only appear on the left side of a condition",
                      sp);
    throw TypeError("not-in-scope",
                    "table '" + r.ref.id + "' is not in scope for this expression", sp);
  }

  static bool numeric(const ScalarType& t) { return t.null_literal || t.type.is_numeric(); }
  static bool boolean(const ScalarType& t) {
    return t.null_literal || t.type.kind == TypeKind::Bool;
  }
  static bool int_kind(const ScalarType& t) { return !t.null_literal && t.type.is_integer_kind(); }

  ScalarType op_type(const ScalarOp& o, Span sp, std::vector<TableType>& delta) {
    std::vector<ScalarType> args;
    for (const ScalarPtr& a : o.args) args.push_back(check_scalar(a, delta));
    auto require = [&](bool ok, const char* rule, const std::string& msg) {
      if (!ok) throw TypeError(rule, msg, sp);
    };
    switch (o.op) {
      case OpKind::Add:
      case OpKind::Sub:
      case OpKind::Mul: {
        require(numeric(args[0]) && numeric(args[1]), "op-type",
                std::string(op_name(o.op)) + " requires numeric arguments");
        if (int_kind(args[0]) && int_kind(args[1])) {
          bool both_nat =
              args[0].type.kind == TypeKind::Nat && args[1].type.kind == TypeKind::Nat;
          if (o.op == OpKind::Sub) return ScalarType{BaseType::integer()};
          return ScalarType{both_nat ? BaseType::natural() : BaseType::integer()};
        }
        return ScalarType{BaseType::real()};
      }
      case OpKind::Div:
        require(numeric(args[0]) && numeric(args[1]), "op-type", "/ requires numeric arguments");
        return ScalarType{BaseType::real()};
      case OpKind::Neg:
        require(numeric(args[0]), "op-type", "unary - requires a numeric argument");
        return ScalarType{int_kind(args[0]) ? BaseType::integer() : BaseType::real()};
      case OpKind::Lt:
      case OpKind::Gt:
        if (!args[0].null_literal && !args[1].null_literal &&
            (args[0].type.is_label_kind() || args[1].type.is_label_kind()))
          throw TypeError("string-comparison",
                          "< and > are not defined on strings or categorical values", sp);
        require(numeric(args[0]) && numeric(args[1]), "op-type",
                "comparison requires numeric arguments");
        return ScalarType{BaseType::boolean()};
      case OpKind::Eq:
        require(equatable(args[0], args[1]), "op-type-mismatch",
                "= applied to incompatible types " + args[0].type.to_string() + " and " +
                    args[1].type.to_string());
        return ScalarType{BaseType::boolean()};
      case OpKind::And:
      case OpKind::Or:
        require(boolean(args[0]) && boolean(args[1]), "op-type",
                std::string(op_name(o.op)) + " requires boolean arguments");
        return ScalarType{BaseType::boolean()};
      case OpKind::Log:
      case OpKind::Sqrt:
        require(numeric(args[0]), "op-type",
                std::string(op_name(o.op)) + " requires a numeric argument");
        return ScalarType{BaseType::real()};
      case OpKind::Exp:
        require(numeric(args[0]), "op-type", "EXP requires a numeric argument");
        return ScalarType{BaseType::posreal()};
    }
    throw TypeError("op", "unknown operator", sp);
  }

  static bool string_like(const BaseType& t) {
    return t.kind == TypeKind::Str || t.kind == TypeKind::Categorical;
  }

  static bool equatable(const ScalarType& a, const ScalarType& b) {
    if (a.null_literal || b.null_literal) return true;
    if (a.type.is_numeric() && b.type.is_numeric()) return true;
    if (a.type.kind == TypeKind::Bool && b.type.kind == TypeKind::Bool) return true;
    if (string_like(a.type) && string_like(b.type)) return true;
    return false;
  }

  ScalarType prob_type(const ScalarProb& p, Span sp, std::vector<TableType>& delta) {
    ModelType mt = check_model(p.model, delta);
    EventType et = check_cond(p.cond, mt, delta);
    if (p.density_keyword && et.level != 0)
      throw TypeError("density-on-event",
                      "PROBABILITY DENSITY OF requires a point condition (equalities only)", sp);
    if (et.level == 0) {
      std::set<std::string> target = vars(p.cond);
      std::set<std::string> conditioned = condvars(p.model);
      std::set<std::string> overlap;
      for (const std::string& v : target)
        if (conditioned.count(v)) overlap.insert(v);
      if (!overlap.empty()) {
        if (overlap.size() == target.size())
          throw TypeError("vars-condvars",
                          "the probability target refers only to conditioned columns", sp);
        if (mode_ == Strictness::Formal)
          throw TypeError("vars-condvars",
                          "the probability target refers to conditioned column '" +
                              *overlap.begin() + "'",
                          sp);
        warn_here("probability target mentions already-conditioned column '" + *overlap.begin() +
                      "'; the conjunct is dropped during normalization",
                  sp);
      }
      return ScalarType{BaseType::posreal()};
    }
    return ScalarType{BaseType::ranged(0, 1)};
  }

  ScalarType mutual_info_type(const ScalarMutualInfo& mi, Span sp,
                              std::vector<TableType>& delta) {
    ModelType mt = check_model(mi.model, delta);
    auto check_side = [&](const std::vector<ColName>& cols, const char* side) {
      if (cols.empty())
        throw TypeError("mutual-info-columns",
                        std::string("MUTUAL INFO ") + side + " column list is empty", sp);
      for (const ColName& c : cols) {
        if (c.id != mt.id)
          throw TypeError("mutual-info-columns",
                          "MUTUAL INFO columns must belong to model '" + mt.id + "'", sp);
        if (mt.index_of(c.col) < 0)
          throw TypeError("unknown-column",
                          "model '" + mt.id + "' has no column '" + c.col + "'", sp);
      }
    };
    check_side(mi.lhs, "left");
    check_side(mi.rhs, "right");
    for (const ColName& a : mi.lhs)
      for (const ColName& b : mi.rhs)
        if (a.col == b.col)
          throw TypeError("mutual-info-columns",
                          "MUTUAL INFO column sets must be disjoint; '" + a.col +
                              "' appears on both sides",
                          sp);
    if (mi.cond) check_cond(mi.cond, mt, delta);
    return ScalarType{BaseType::real()};
  }

  // ---- conditions -----------------------------------------------------------

  EventType check_cond(const CondPtr& c, const ModelType& mt, std::vector<TableType>& delta) {
    int level = classify_cond(c);
    if (level == 0) {
      std::set<std::string> seen;
      check_event0(c, mt, delta, seen);
    } else {
      check_event1(c, mt, delta);
    }
    EventType et{level, mt.id};
    info_.put(c, et);
    return et;
  }

  void check_atom_common(const CondAtom& a, const ModelType& mt, std::vector<TableType>& delta,
                         Span sp) {
    if (a.lhs.id != mt.id)
      throw TypeError("atom-model",
                      "condition constrains '" + a.lhs.id + "' but the queried model is '" +
                          mt.id + "'",
                      sp);
    int i = mt.index_of(a.lhs.col);
    if (i < 0)
      throw TypeError("unknown-column", "model '" + mt.id + "' has no column '" + a.lhs.col + "'",
                      sp);
    const BaseType& col = mt.cols[i].type;
    ScalarType rhs = check_scalar(a.rhs, delta);
    if (rhs.null_literal) return;  // Null is the unit for conditioning
    if (a.op == OpKind::Eq) {
      bool ok = (col.is_numeric() && rhs.type.is_numeric()) ||
                (col.kind == TypeKind::Bool && rhs.type.kind == TypeKind::Bool) ||
                (string_like(col) && string_like(rhs.type));
      if (!ok)
        throw TypeError("op-type-mismatch",
                        "cannot compare column '" + a.lhs.col + "' of type " + col.to_string() +
                            " with a value of type " + rhs.type.to_string(),
                        sp);
    } else {
      if (!col.is_numeric() || !rhs.type.is_numeric())
        throw TypeError(col.is_numeric() ? "op-type" : "string-comparison",
                        "ordered comparison requires numeric operands", sp);
    }
  }

  void check_event0(const CondPtr& c, const ModelType& mt, std::vector<TableType>& delta,
                    std::set<std::string>& seen) {
    std::visit(overloaded{
                   [&](const CondAtom& a) {
                     check_atom_common(a, mt, delta, c->span);
                     if (seen.count(a.lhs.col))
                       throw TypeError("event0-linearity",
                                       "point condition constrains column '" + a.lhs.col +
                                           "' more than once",
                                       c->span);
                     seen.insert(a.lhs.col);
                   },
                   [&](const CondAnd& a) {
                     check_event0(a.left, mt, delta, seen);
                     check_event0(a.right, mt, delta, seen);
                   },
                   [&](const CondTrue&) {},
                   [&](const auto&) {
                     throw TypeError("unresolved-sugar",
                                     "internal: sugar condition survived desugaring", c->span);
                   },
               },
               c->node);
  }

  void check_event1(const CondPtr& c, const ModelType& mt, std::vector<TableType>& delta) {
    std::visit(overloaded{
                   [&](const CondAtom& a) {
                     check_atom_common(a, mt, delta, c->span);
                     if (a.op == OpKind::Eq) {
                       int i = mt.index_of(a.lhs.col);
                       if (mt.cols[i].type.is_continuous())
                         throw TypeError("continuous-equality",
                                         "events may not test equality on continuous column '" +
                                             a.lhs.col + "'; use a point condition instead",
                                         c->span);
                     }
                   },
                   [&](const CondAnd& a) {
                     check_event1(a.left, mt, delta);
                     check_event1(a.right, mt, delta);
                   },
                   [&](const CondOr& o) {
                     check_event1(o.left, mt, delta);
                     check_event1(o.right, mt, delta);
                   },
                   [&](const CondTrue&) {},
                   [&](const auto&) {
                     throw TypeError("unresolved-sugar",
                                     "internal: sugar condition survived desugaring", c->span);
                   },
               },
               c->node);
  }

  // ---- models ---------------------------------------------------------------

  ModelType check_model(const ModelPtr& m, std::vector<TableType>& delta) {
    ModelType t = std::visit(
        overloaded{
            [&](const ModelId& i) -> ModelType {
              if (!env_.is_model(i.id)) {
                if (env_.is_table(i.id) || with_scope_.count(i.id))
                  throw TypeError("sort-mismatch", "'" + i.id + "' names a table, not a model",
                                  m->span);
                throw TypeError("unknown-identifier", "no model named '" + i.id + "'", m->span);
              }
              const Schema& s = env_.model_schema(i.id);
              return ModelType{i.id, s.columns};
            },
            [&](const ModelGiven& g) -> ModelType {
              ModelType base = check_model(g.base, delta);
              EventType et = check_cond(g.cond, base, delta);
              if (mode_ == Strictness::Formal) {
                if (et.level == 0 && !std::holds_alternative<ModelId>(g.base->node))
                  throw TypeError("given-once",
                                  "a model can only be conditioned once on a point condition",
                                  m->span);
                if (et.level == 1 && !model_is_id_or_given0(g.base))
                  throw TypeError("model-normal-form",
                                  "event conditioning must apply to a model of the form id "
                                  "or id GIVEN <point condition>",
                                  m->span);
              }
              return base;
            },
            [&](const ModelRename& r) -> ModelType {
              ModelType base = check_model(r.base, delta);
              if (env_.has(r.new_id) || with_scope_.count(r.new_id))
                throw TypeError("rename-collision",
                                "RENAME target '" + r.new_id + "' is already declared", m->span);
              return ModelType{r.new_id, base.cols};
            },
        },
        m->node);
    info_.put(m, t);
    return t;
  }

  bool model_is_id_or_given0(const ModelPtr& m) {
    if (std::holds_alternative<ModelId>(m->node)) return true;
    if (auto* g = std::get_if<ModelGiven>(&m->node))
      return classify_cond(g->cond) == 0 && std::holds_alternative<ModelId>(g->base->node);
    return false;
  }

  // ---- tables ---------------------------------------------------------------

  TableType check_table(const TablePtr& t, std::vector<TableType>& delta) {
    TableType ty = std::visit(
        overloaded{
            [&](const TableId& i) -> TableType {
              auto it = with_scope_.find(i.id);
              if (it != with_scope_.end()) return it->second;
              if (!env_.is_table(i.id)) {
                if (env_.is_model(i.id))
                  throw TypeError("sort-mismatch", "'" + i.id + "' names a model, not a table",
                                  t->span);
                throw TypeError("unknown-identifier", "no table named '" + i.id + "'", t->span);
              }
              const Schema& s = env_.table_schema(i.id);
              return TableType{i.id, s.columns};
            },
            [&](const TableUnion& u) -> TableType {
              TableType l = check_table(u.left, delta);
              TableType r = check_table(u.right, delta);
              if (!same_columns(l, r))
                throw TypeError("union-schema", "UNION requires identical column lists", t->span);
              return TableType{std::nullopt, l.cols};
            },
            [&](const TableJoin& j) -> TableType {
              TableType l = check_table(j.left, delta);
              TableType r = check_table(j.right, delta);
              return join_type(l, r, t->span);
            },
            [&](const TableRename& r) -> TableType {
              TableType base = check_table(r.base, delta);
              if (env_.has(r.new_id))
                throw TypeError("rename-collision",
                                "RENAME target '" + r.new_id + "' is already declared", t->span);
              return TableType{r.new_id, base.cols};
            },
            [&](const TableDedup& d) -> TableType { return check_table(d.base, delta); },
            [&](const TableDuplicate& d) -> TableType {
              TableType base = check_table(d.base, delta);
              require_nat(d.times, delta, "duplicate-nat", "DUPLICATE count");
              return base;
            },
            [&](const TableWhere& w) -> TableType {
              TableType base = check_table(w.base, delta);
              delta.push_back(base);
              ScalarType pred = check_scalar(w.pred, delta);
              delta.pop_back();
              if (!pred.null_literal && pred.type.kind != TypeKind::Bool)
                throw TypeError("where-boolean", "WHERE predicate must be boolean, got " +
                                                     pred.type.to_string(),
                                w.pred->span);
              return base;
            },
            [&](const TableWith& w) -> TableType {
              if (!w.bound_table)
                throw TypeError("unresolved-sugar",
                                "internal: WITH-bound model survived desugaring", t->span);
              TableType bound = check_table(*w.bound_table, delta);
              if (env_.has(w.name) || with_scope_.count(w.name))
                throw TypeError("rename-collision",
                                "WITH binding '" + w.name + "' is already declared", t->span);
              bound.id = w.name;
              with_scope_[w.name] = bound;
              TableType body = check_table(w.body, delta);
              with_scope_.erase(w.name);
              return body;
            },
            [&](const TableSelect& s) -> TableType {
              TableType from = check_table(s.from, delta);
              delta.push_back(from);
              std::vector<Column> cols;
              for (const SelectItem& item : s.items) {
                ScalarType it = check_scalar(item.expr, delta);
                if (!item.alias)
                  throw TypeError("select-alias", "select item needs AS <name>", item.span);
                for (const Column& c : cols)
                  if (c.name == *item.alias)
                    throw TypeError("select-dup-columns",
                                    "duplicate output column '" + *item.alias + "'", item.span);
                cols.push_back({*item.alias, it.null_literal ? BaseType::real() : it.type});
              }
              delta.pop_back();
              return TableType{from.id, std::move(cols)};
            },
            [&](const TableGroupBy& g) -> TableType { return group_by_type(g, delta); },
            [&](const TableGenerate& g) -> TableType {
              ModelType mt = check_model(g.model, delta);
              require_nat(g.limit, delta, "limit-nat", "GENERATE LIMIT");
              return TableType{std::nullopt, mt.cols};
            },
            [&](const TableGenJoin& j) -> TableType {
              TableType base = check_table(j.base, delta);
              delta.push_back(base);  // per-row conditioning sees the current row
              ModelType mt = check_model(j.model, delta);
              delta.pop_back();
              TableType mcols{mt.id, mt.cols};
              return join_type(base, mcols, t->span);
            },
        },
        t->node);
    info_.put(t, ty);
    return ty;
  }

  static bool same_columns(const TableType& a, const TableType& b) {
    if (a.cols.size() != b.cols.size()) return false;
    for (std::size_t i = 0; i < a.cols.size(); ++i)
      if (a.cols[i].name != b.cols[i].name || a.cols[i].type != b.cols[i].type) return false;
    return true;
  }

  TableType join_type(const TableType& l, const TableType& r, Span sp) {
    for (const Column& cl : l.cols)
      for (const Column& cr : r.cols)
        if (cl.name == cr.name)
          throw TypeError("join-disjoint-columns",
                          "JOIN requires disjoint column names; '" + cl.name +
                              "' appears on both sides",
                          sp);
    std::vector<Column> cols = l.cols;
    cols.insert(cols.end(), r.cols.begin(), r.cols.end());
    return TableType{std::nullopt, std::move(cols)};
  }

  void require_nat(const ScalarPtr& e, std::vector<TableType>& delta, const char* rule,
                   const char* what) {
    ScalarType t = check_scalar(e, delta);
    if (t.null_literal || t.type.kind != TypeKind::Nat)
      throw TypeError(rule, std::string(what) + " must be a natural number, got " +
                                (t.null_literal ? std::string("NULL") : t.type.to_string()),
                      e->span);
  }

  TableType group_by_type(const TableGroupBy& g, std::vector<TableType>& delta) {
    TableType base = check_table(g.base, delta);
    delta.push_back(base);
    std::vector<Column> cols;
    auto add_col = [&](const std::string& name, BaseType type, Span where) {
      for (const Column& c : cols)
        if (c.name == name)
          throw TypeError("groupby-dup-columns", "duplicate output column '" + name + "'", where);
      cols.push_back({name, std::move(type)});
    };
    for (const auto& k : g.keys) {
      ScalarType kt = check_scalar(k.first, delta);
      add_col(k.second, kt.null_literal ? BaseType::real() : kt.type, k.first->span);
    }
    for (const AggItem& a : g.aggs) {
      ScalarType at = check_scalar(a.arg, delta);
      add_col(a.as, agg_result_type(a, at), a.span);
    }
    delta.pop_back();
    return TableType{std::nullopt, std::move(cols)};
  }

  static BaseType agg_result_type(const AggItem& a, const ScalarType& arg) {
    const BaseType& t = arg.type;
    auto fail = [&]() -> BaseType {
      throw TypeError("agg-type", std::string(agg_name(a.agg)) + " is not defined on " +
                                      (arg.null_literal ? std::string("NULL") : t.to_string()),
                      a.span);
    };
    switch (a.agg) {
      case AggKind::Sum:
        if (arg.null_literal) return BaseType::real();
        if (t.kind == TypeKind::Int) return BaseType::integer();
        if (t.kind == TypeKind::Nat) return BaseType::natural();
        if (t.is_continuous()) return BaseType::real();
        return fail();
      case AggKind::Avg:
        if (arg.null_literal) return BaseType::real();
        if (t.is_integer_kind()) return BaseType::real();
        if (t.is_continuous()) return t;
        return fail();
      case AggKind::Max:
      case AggKind::Min:
        if (arg.null_literal) return BaseType::real();
        if (t.is_continuous() || t.is_integer_kind() || t.kind == TypeKind::Bool) return t;
        return fail();
      case AggKind::Count:
      case AggKind::CountDistinct:
        return BaseType::natural();
      case AggKind::Concat:
        if (!arg.null_literal && t.kind == TypeKind::Str) return BaseType::str();
        return fail();
    }
    return fail();
  }
};

// Convenience entry point: desugar + typecheck in one go.
struct CheckedQuery {
  Query query;
  TypeInfo info;
};

inline CheckedQuery typecheck(const Query& desugared, const GlobalEnv& env,
                              Strictness mode = Strictness::Permissive,
                              Diagnostics* diags = nullptr) {
  TypeChecker tc(env, mode, diags);
  TypeInfo info = tc.check(desugared);
  return CheckedQuery{desugared, std::move(info)};
}

}  // namespace gensql
