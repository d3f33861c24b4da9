#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gensql/ast.hpp"
#include "gensql/env.hpp"
#include "gensql/normalize.hpp"
#include "gensql/typecheck.hpp"

namespace gensql {

// ---------------------------------------------------------------------------
// Lowered language
// ---------------------------------------------------------------------------

struct LTerm;
using LTermPtr = std::shared_ptr<const LTerm>;

// Lowered events reference model columns by position; the scalar side is a
// lowered term evaluated in the enclosing scope.
struct LEventAtom {
  int col = 0;
  OpKind op = OpKind::Eq;
  LTermPtr scalar;
};

struct LEvent;
using LEventPtr = std::shared_ptr<const LEvent>;
struct LEvent {
  enum class Kind { Atom, And, Or };
  Kind kind = Kind::Atom;
  LEventAtom atom;
  LEventPtr left, right;
};

struct LEvent0 {
  std::vector<std::pair<int, LTermPtr>> pins;  // (column index, scalar term)
};

struct LConst {
  Value value;
};
struct LVar {
  std::string name;
};
struct LTuple {
  std::vector<LTermPtr> items;
};
struct LProj {
  int index;
  LTermPtr base;
};
struct LOp {
  OpKind op;
  std::vector<LTermPtr> args;
};
struct LSingleton {
  LTermPtr row;
};
struct LMap {
  std::string var;
  LTermPtr body;  // row tuple
  LTermPtr bag;
};
struct LFilter {
  std::string var;
  LTermPtr pred;
  LTermPtr bag;
};
struct LMapReduce {
  std::string var;
  LTermPtr body;  // bag
  LTermPtr bag;
};
struct LReplicate {
  LTermPtr count;
  LTermPtr bag;
};
struct LJoin {
  LTermPtr left, right;
};
struct LTableRef {
  std::string id;
};
struct LSimulate {
  std::string model;
  std::optional<LEvent0> c0;
  LEventPtr c1;  // null: full space
};
struct LLogPdf {
  std::string model;
  std::optional<LEvent0> c0;
  LEventPtr c1;
  LEvent0 target;
};
struct LProb {
  std::string model;
  std::optional<LEvent0> c0;
  LEventPtr c1;
  LEventPtr target;
};

// Intrinsics beyond the combinator core, one per extended table operation.
struct LUnion {
  LTermPtr left, right;
};
struct LDedup {
  LTermPtr bag;
};
struct LDuplicate {
  LTermPtr count;
  LTermPtr bag;
};
struct LGroupBy {
  std::string var;
  std::vector<LTermPtr> keys;  // evaluated per row
  std::vector<std::pair<AggKind, LTermPtr>> aggs;
  LTermPtr bag;
};
struct LMutualInfo {
  std::string model;
  std::vector<int> cols_a, cols_b;
  std::optional<LEvent0> c0;
  LEventPtr c1;
};
struct LLet {
  std::string name;
  LTermPtr bound;  // bag
  LTermPtr body;
};

struct LTerm {
  std::variant<LConst, LVar, LTuple, LProj, LOp, LSingleton, LMap, LFilter, LMapReduce,
               LReplicate, LJoin, LTableRef, LSimulate, LLogPdf, LProb, LUnion, LDedup,
               LDuplicate, LGroupBy, LMutualInfo, LLet>
      node;
  int site = 0;   // stable call-site id; seeds the per-call random streams
  Span span;      // source position of the originating clause
};

struct LoweredProgram {
  LTermPtr root;
  bool scalar_result = false;
};

// ---------------------------------------------------------------------------
// Lowering transform
// ---------------------------------------------------------------------------

class Lowerer {
 public:
  explicit Lowerer(const GlobalEnv& env) : env_(env) {}

  LoweredProgram run(const Query& q) {
    LoweredProgram out;
    Scope scope;
    if (q.is_scalar()) {
      out.root = scalar(q.scalar(), scope);
      out.scalar_result = true;
    } else {
      out.root = table(q.table(), scope);
    }
    return out;
  }

 private:
  const GlobalEnv& env_;
  int next_var_ = 0;
  int next_site_ = 1;

  // The local map: table identifier -> (bound row variable, column names).
  struct Binding {
    std::string var;
    std::vector<std::string> cols;
  };
  using Scope = std::map<std::string, Binding>;

  std::map<std::string, std::vector<std::string>> let_tables_;

  // Only nodes that consume randomness or iterate rows get a call-site id;
  // pure scalar nodes stay id-less so erased unit conditions (Null atoms)
  // cannot shift a sibling call's random stream.
  template <class Node>
  LTermPtr mk(Node n, Span span = {}) {
    auto t = std::make_shared<LTerm>();
    t->node = std::move(n);
    t->span = span;
    if constexpr (std::is_same_v<Node, LSimulate> || std::is_same_v<Node, LLogPdf> ||
                  std::is_same_v<Node, LProb> || std::is_same_v<Node, LMutualInfo> ||
                  std::is_same_v<Node, LReplicate> || std::is_same_v<Node, LMap> ||
                  std::is_same_v<Node, LFilter> || std::is_same_v<Node, LMapReduce> ||
                  std::is_same_v<Node, LGroupBy>)
      t->site = next_site_++;
    return t;
  }

  std::string fresh_var() { return "r" + std::to_string(next_var_++); }

  const Schema& model_schema(const std::string& id) const { return env_.model_schema(id); }

  // Normalized models decompose into (id, optional point condition, optional
  // event condition).
  struct ModelParts {
    std::string id;
    CondPtr c0, c1;
  };

  ModelParts decompose(const ModelPtr& m) const {
    ModelParts parts;
    const ModelExpr* cur = m.get();
    if (auto* g = std::get_if<ModelGiven>(&cur->node)) {
      if (classify_cond(g->cond) == 1) {
        parts.c1 = g->cond;
        cur = g->base.get();
      }
    }
    if (auto* g = std::get_if<ModelGiven>(&cur->node)) {
      if (classify_cond(g->cond) == 0) {
        parts.c0 = g->cond;
        cur = g->base.get();
      }
    }
    auto* id = std::get_if<ModelId>(&cur->node);
    if (!id)
      throw Error(Stage::Lower, "not-normalized",
                  "model expression is not in normal form; normalize before lowering");
    parts.id = id->id;
    return parts;
  }

  std::optional<LEvent0> lower_event0(const CondPtr& c, const Scope& scope,
                                      const Schema& mschema) {
    if (!c) return std::nullopt;
    LEvent0 out;
    std::vector<CondPtr> conjuncts;
    norm_detail::flatten_conjuncts(c, conjuncts);
    for (const CondPtr& atom : conjuncts) {
      auto* a = std::get_if<CondAtom>(&atom->node);
      if (!a)
        throw Error(Stage::Lower, "not-normalized", "point condition contains a non-atom");
      int col = mschema.index_of(a->lhs.col);
      if (col < 0)
        throw Error(Stage::Lower, "unknown-column",
                    "model has no column '" + a->lhs.col + "'");
      out.pins.emplace_back(col, scalar(a->rhs, scope));
    }
    return out;
  }

  LEventPtr lower_event1(const CondPtr& c, const Scope& scope, const Schema& mschema) {
    if (!c) return nullptr;
    return std::visit(
        overloaded{
            [&](const CondAtom& a) -> LEventPtr {
              int col = mschema.index_of(a.lhs.col);
              if (col < 0)
                throw Error(Stage::Lower, "unknown-column",
                            "model has no column '" + a.lhs.col + "'");
              auto e = std::make_shared<LEvent>();
              e->kind = LEvent::Kind::Atom;
              e->atom = LEventAtom{col, a.op, scalar(a.rhs, scope)};
              return e;
            },
            [&](const CondAnd& x) -> LEventPtr {
              auto e = std::make_shared<LEvent>();
              e->kind = LEvent::Kind::And;
              e->left = lower_event1(x.left, scope, mschema);
              e->right = lower_event1(x.right, scope, mschema);
              return e;
            },
            [&](const CondOr& x) -> LEventPtr {
              auto e = std::make_shared<LEvent>();
              e->kind = LEvent::Kind::Or;
              e->left = lower_event1(x.left, scope, mschema);
              e->right = lower_event1(x.right, scope, mschema);
              return e;
            },
            [&](const auto&) -> LEventPtr {
              throw Error(Stage::Lower, "not-normalized", "unexpected condition node");
            },
        },
        c->node);
  }

  LTermPtr scalar(const ScalarPtr& e, const Scope& scope) {
    return std::visit(
        overloaded{
            [&](const ScalarConst& c) -> LTermPtr { return mk(LConst{c.value}); },
            [&](const ScalarColRef& r) -> LTermPtr {
              auto it = scope.find(r.ref.id);
              if (it == scope.end())
                throw Error(Stage::Lower, "not-in-scope",
                            "table '" + r.ref.id + "' is not bound to a row variable");
              const Binding& b = it->second;
              for (std::size_t i = 0; i < b.cols.size(); ++i)
                if (b.cols[i] == r.ref.col)
                  return mk(LProj{static_cast<int>(i), mk(LVar{b.var})});
              throw Error(Stage::Lower, "unknown-column",
                          "row of '" + r.ref.id + "' has no column '" + r.ref.col + "'");
            },
            [&](const ScalarOp& o) -> LTermPtr {
              std::vector<LTermPtr> args;
              for (const ScalarPtr& a : o.args) args.push_back(scalar(a, scope));
              return mk(LOp{o.op, std::move(args)});
            },
            [&](const ScalarProb& p) -> LTermPtr {
              ModelParts parts = decompose(p.model);
              const Schema& ms = model_schema(parts.id);
              auto c0 = lower_event0(parts.c0, scope, ms);
              LEventPtr c1 = lower_event1(parts.c1, scope, ms);
              if (classify_cond(p.cond) == 0) {
                LEvent0 target = *lower_event0(p.cond, scope, ms);
                return mk(LOp{OpKind::Exp,
                              {mk(LLogPdf{parts.id, std::move(c0), c1, std::move(target)},
                                  e->span)}},
                          e->span);
              }
              LEventPtr target = lower_event1(p.cond, scope, ms);
              return mk(LProb{parts.id, std::move(c0), c1, target}, e->span);
            },
            [&](const ScalarMutualInfo& mi) -> LTermPtr {
              ModelParts parts = decompose(mi.model);
              const Schema& ms = model_schema(parts.id);
              LMutualInfo out;
              out.model = parts.id;
              for (const ColName& c : mi.lhs) out.cols_a.push_back(ms.index_of(c.col));
              for (const ColName& c : mi.rhs) out.cols_b.push_back(ms.index_of(c.col));
              if (mi.cond) {
                if (classify_cond(mi.cond) == 0)
                  out.c0 = lower_event0(mi.cond, scope, ms);
                else
                  out.c1 = lower_event1(mi.cond, scope, ms);
              }
              return mk(std::move(out), e->span);
            },
        },
        e->node);
  }

  // Column names of a table expression as lowered rows are laid out. Mirrors
  // the checker's shape rules.
  std::vector<std::string> columns_of(const TablePtr& t) const {
    return std::visit(
        overloaded{
            [&](const TableId& i) -> std::vector<std::string> {
              auto it = let_tables_.find(i.id);
              if (it != let_tables_.end()) return it->second;
              return env_.table_schema(i.id).column_names();
            },
            [&](const TableUnion& u) { return columns_of(u.left); },
            [&](const TableJoin& j) {
              std::vector<std::string> cols = columns_of(j.left);
              std::vector<std::string> r = columns_of(j.right);
              cols.insert(cols.end(), r.begin(), r.end());
              return cols;
            },
            [&](const TableRename& r) { return columns_of(r.base); },
            [&](const TableDedup& d) { return columns_of(d.base); },
            [&](const TableDuplicate& d) { return columns_of(d.base); },
            [&](const TableWhere& w) { return columns_of(w.base); },
            [&](const TableWith& w) { return columns_of(w.body); },
            [&](const TableSelect& s) {
              std::vector<std::string> cols;
              for (const SelectItem& it : s.items) cols.push_back(*it.alias);
              return cols;
            },
            [&](const TableGroupBy& g) {
              std::vector<std::string> cols;
              for (const auto& k : g.keys) cols.push_back(k.second);
              for (const auto& a : g.aggs) cols.push_back(a.as);
              return cols;
            },
            [&](const TableGenerate& g) {
              ModelParts parts = decompose(g.model);
              return env_.model_schema(parts.id).column_names();
            },
            [&](const TableGenJoin& j) {
              std::vector<std::string> cols = columns_of(j.base);
              ModelParts parts = decompose(j.model);
              for (const std::string& c : env_.model_schema(parts.id).column_names())
                cols.push_back(c);
              return cols;
            },
        },
        t->node);
  }

  std::optional<std::string> id_of(const TablePtr& t) const {
    return std::visit(
        overloaded{
            [&](const TableId& i) -> std::optional<std::string> { return i.id; },
            [&](const TableRename& r) -> std::optional<std::string> { return r.new_id; },
            [&](const TableDedup& d) { return id_of(d.base); },
            [&](const TableDuplicate& d) { return id_of(d.base); },
            [&](const TableWhere& w) { return id_of(w.base); },
            [&](const TableSelect& s) { return id_of(s.from); },
            [&](const auto&) -> std::optional<std::string> { return std::nullopt; },
        },
        t->node);
  }

  // Bind a row variable for the table's identifier, extending the local map.
  Scope bind_row(const Scope& scope, const TablePtr& t, const std::string& var) const {
    Scope inner = scope;
    if (auto id = id_of(t)) inner[*id] = Binding{var, columns_of(t)};
    return inner;
  }

  LTermPtr table(const TablePtr& t, const Scope& scope) {
    return std::visit(
        overloaded{
            [&](const TableId& i) -> LTermPtr { return mk(LTableRef{i.id}); },
            [&](const TableUnion& u) -> LTermPtr {
              return mk(LUnion{table(u.left, scope), table(u.right, scope)});
            },
            [&](const TableJoin& j) -> LTermPtr {
              return mk(LJoin{table(j.left, scope), table(j.right, scope)});
            },
            [&](const TableRename& r) -> LTermPtr { return table(r.base, scope); },
            [&](const TableDedup& d) -> LTermPtr { return mk(LDedup{table(d.base, scope)}); },
            [&](const TableDuplicate& d) -> LTermPtr {
              return mk(LDuplicate{scalar(d.times, scope), table(d.base, scope)}, t->span);
            },
            [&](const TableWhere& w) -> LTermPtr {
              std::string var = fresh_var();
              Scope inner = bind_row(scope, w.base, var);
              return mk(LFilter{var, scalar(w.pred, inner), table(w.base, scope)});
            },
            [&](const TableWith& w) -> LTermPtr {
              if (!w.bound_table)
                throw Error(Stage::Lower, "not-normalized", "WITH model must be inlined");
              LTermPtr bound = table(*w.bound_table, scope);
              let_tables_[w.name] = columns_of(*w.bound_table);
              LTermPtr body = table(w.body, scope);
              let_tables_.erase(w.name);
              return mk(LLet{w.name, bound, body});
            },
            [&](const TableSelect& s) -> LTermPtr {
              std::string var = fresh_var();
              Scope inner = bind_row(scope, s.from, var);
              std::vector<LTermPtr> items;
              for (const SelectItem& it : s.items) items.push_back(scalar(it.expr, inner));
              return mk(LMap{var, mk(LTuple{std::move(items)}), table(s.from, scope)});
            },
            [&](const TableGroupBy& g) -> LTermPtr {
              std::string var = fresh_var();
              Scope inner = bind_row(scope, g.base, var);
              LGroupBy out;
              out.var = var;
              for (const auto& k : g.keys) out.keys.push_back(scalar(k.first, inner));
              for (const AggItem& a : g.aggs)
                out.aggs.emplace_back(a.agg, scalar(a.arg, inner));
              out.bag = table(g.base, scope);
              return mk(std::move(out));
            },
            [&](const TableGenerate& g) -> LTermPtr {
              ModelParts parts = decompose(g.model);
              const Schema& ms = model_schema(parts.id);
              auto c0 = lower_event0(parts.c0, scope, ms);
              LEventPtr c1 = lower_event1(parts.c1, scope, ms);
              return mk(LReplicate{scalar(g.limit, scope),
                                   mk(LSimulate{parts.id, std::move(c0), c1}, t->span)},
                        t->span);
            },
            [&](const TableGenJoin& j) -> LTermPtr {
              ModelParts parts = decompose(j.model);
              const Schema& ms = model_schema(parts.id);
              std::string var = fresh_var();
              Scope inner = bind_row(scope, j.base, var);
              auto c0 = lower_event0(parts.c0, inner, ms);
              LEventPtr c1 = lower_event1(parts.c1, inner, ms);
              LTermPtr body = mk(LJoin{mk(LSingleton{mk(LVar{var})}),
                                       mk(LSimulate{parts.id, std::move(c0), c1}, t->span)});
              return mk(LMapReduce{var, body, table(j.base, scope)}, t->span);
            },
        },
        t->node);
  }
};

inline LoweredProgram lower(const Query& normalized, const GlobalEnv& env) {
  return Lowerer(env).run(normalized);
}

// ---------------------------------------------------------------------------
// Lowered type system
// ---------------------------------------------------------------------------

struct LType {
  enum class Kind { Scalar, RowTuple, Bag };
  Kind kind = Kind::Scalar;
  BaseType scalar;                 // Kind::Scalar
  std::vector<BaseType> row;       // RowTuple / Bag element
  bool null_literal = false;

  static LType of_scalar(BaseType t, bool null_lit = false) {
    LType out;
    out.kind = Kind::Scalar;
    out.scalar = std::move(t);
    out.null_literal = null_lit;
    return out;
  }
  static LType of_row(std::vector<BaseType> row) {
    LType out;
    out.kind = Kind::RowTuple;
    out.row = std::move(row);
    return out;
  }
  static LType of_bag(std::vector<BaseType> row) {
    LType out;
    out.kind = Kind::Bag;
    out.row = std::move(row);
    return out;
  }
};

class LoweredTypeChecker {
 public:
  explicit LoweredTypeChecker(const GlobalEnv& env) : env_(env) {}

  LType check(const LTermPtr& t) {
    return std::visit(
        overloaded{
            [&](const LConst& c) -> LType {
              if (c.value.is_null()) return LType::of_scalar(BaseType::real(), true);
              if (c.value.is_int())
                return LType::of_scalar(c.value.as_int() >= 0 ? BaseType::natural()
                                                              : BaseType::integer());
              if (c.value.is_real()) return LType::of_scalar(BaseType::real());
              if (c.value.is_bool()) return LType::of_scalar(BaseType::boolean());
              return LType::of_scalar(BaseType::str());
            },
            [&](const LVar& v) -> LType {
              for (auto it = vars_.rbegin(); it != vars_.rend(); ++it)
                if (it->first == v.name) return it->second;
              return fail("unbound variable '" + v.name + "'");
            },
            [&](const LTuple& tp) -> LType {
              std::vector<BaseType> row;
              for (const LTermPtr& item : tp.items) {
                LType it = check(item);
                if (it.kind != LType::Kind::Scalar) return fail("tuple items must be scalars");
                row.push_back(it.null_literal ? BaseType::real() : it.scalar);
              }
              return LType::of_row(std::move(row));
            },
            [&](const LProj& p) -> LType {
              LType base = check(p.base);
              if (base.kind != LType::Kind::RowTuple) return fail("projection of a non-tuple");
              if (p.index < 0 || p.index >= static_cast<int>(base.row.size()))
                return fail("projection index out of range");
              return LType::of_scalar(base.row[p.index]);
            },
            [&](const LOp& o) -> LType { return check_op(o); },
            [&](const LSingleton& s) -> LType {
              LType row = check(s.row);
              if (row.kind != LType::Kind::RowTuple) return fail("singleton of a non-tuple");
              return LType::of_bag(row.row);
            },
            [&](const LMap& m) -> LType {
              LType bag = check(m.bag);
              if (bag.kind != LType::Kind::Bag) return fail("map over a non-bag");
              vars_.emplace_back(m.var, LType::of_row(bag.row));
              LType body = check(m.body);
              vars_.pop_back();
              if (body.kind != LType::Kind::RowTuple) return fail("map body must build a row");
              return LType::of_bag(body.row);
            },
            [&](const LFilter& f) -> LType {
              LType bag = check(f.bag);
              if (bag.kind != LType::Kind::Bag) return fail("filter over a non-bag");
              vars_.emplace_back(f.var, LType::of_row(bag.row));
              LType pred = check(f.pred);
              vars_.pop_back();
              if (pred.kind != LType::Kind::Scalar ||
                  (!pred.null_literal && pred.scalar.kind != TypeKind::Bool))
                return fail("filter predicate must be boolean");
              return bag;
            },
            [&](const LMapReduce& m) -> LType {
              LType bag = check(m.bag);
              if (bag.kind != LType::Kind::Bag) return fail("mapreduce over a non-bag");
              vars_.emplace_back(m.var, LType::of_row(bag.row));
              LType body = check(m.body);
              vars_.pop_back();
              if (body.kind != LType::Kind::Bag) return fail("mapreduce body must build a bag");
              return body;
            },
            [&](const LReplicate& r) -> LType {
              LType n = check(r.count);
              if (n.kind != LType::Kind::Scalar || n.scalar.kind != TypeKind::Nat)
                return fail("replicate count must be a natural number");
              LType bag = check(r.bag);
              if (bag.kind != LType::Kind::Bag) return fail("replicate body must be a bag");
              return bag;
            },
            [&](const LJoin& j) -> LType {
              LType l = check(j.left), r = check(j.right);
              if (l.kind != LType::Kind::Bag || r.kind != LType::Kind::Bag)
                return fail("join of non-bags");
              std::vector<BaseType> row = l.row;
              row.insert(row.end(), r.row.begin(), r.row.end());
              return LType::of_bag(std::move(row));
            },
            [&](const LTableRef& r) -> LType {
              for (auto it = lets_.rbegin(); it != lets_.rend(); ++it)
                if (it->first == r.id) return it->second;
              if (!env_.is_table(r.id)) return fail("unbound table '" + r.id + "'");
              std::vector<BaseType> row;
              for (const Column& c : env_.table_schema(r.id).columns) row.push_back(c.type);
              return LType::of_bag(std::move(row));
            },
            [&](const LSimulate& s) -> LType {
              check_conditions(s.model, s.c0, s.c1);
              std::vector<BaseType> row;
              for (const Column& c : env_.model_schema(s.model).columns) row.push_back(c.type);
              return LType::of_bag(std::move(row));
            },
            [&](const LLogPdf& l) -> LType {
              check_conditions(l.model, l.c0, l.c1);
              check_event0(l.model, l.target);
              return LType::of_scalar(BaseType::real());
            },
            [&](const LProb& p) -> LType {
              check_conditions(p.model, p.c0, p.c1);
              check_event1(p.model, p.target);
              return LType::of_scalar(BaseType::ranged(0, 1));
            },
            [&](const LUnion& u) -> LType {
              LType l = check(u.left), r = check(u.right);
              if (l.kind != LType::Kind::Bag || r.kind != LType::Kind::Bag ||
                  l.row.size() != r.row.size())
                return fail("union of incompatible bags");
              return l;
            },
            [&](const LDedup& d) -> LType {
              LType bag = check(d.bag);
              if (bag.kind != LType::Kind::Bag) return fail("dedup of a non-bag");
              return bag;
            },
            [&](const LDuplicate& d) -> LType {
              LType n = check(d.count);
              if (n.kind != LType::Kind::Scalar || n.scalar.kind != TypeKind::Nat)
                return fail("duplicate count must be a natural number");
              LType bag = check(d.bag);
              if (bag.kind != LType::Kind::Bag) return fail("duplicate of a non-bag");
              return bag;
            },
            [&](const LGroupBy& g) -> LType {
              LType bag = check(g.bag);
              if (bag.kind != LType::Kind::Bag) return fail("group of a non-bag");
              vars_.emplace_back(g.var, LType::of_row(bag.row));
              std::vector<BaseType> row;
              for (const LTermPtr& k : g.keys) {
                LType kt = check(k);
                if (kt.kind != LType::Kind::Scalar) return fail("group key must be scalar");
                row.push_back(kt.null_literal ? BaseType::real() : kt.scalar);
              }
              for (const auto& [agg, arg] : g.aggs) {
                LType at = check(arg);
                if (at.kind != LType::Kind::Scalar) return fail("aggregate arg must be scalar");
                AggItem item{agg, nullptr, "", {}};
                row.push_back(agg_result(item, at));
              }
              vars_.pop_back();
              return LType::of_bag(std::move(row));
            },
            [&](const LMutualInfo& mi) -> LType {
              check_conditions(mi.model, mi.c0, mi.c1);
              const Schema& ms = env_.model_schema(mi.model);
              for (int c : mi.cols_a)
                if (c < 0 || c >= static_cast<int>(ms.columns.size()))
                  return fail("mutual-info column index out of range");
              for (int c : mi.cols_b)
                if (c < 0 || c >= static_cast<int>(ms.columns.size()))
                  return fail("mutual-info column index out of range");
              return LType::of_scalar(BaseType::real());
            },
            [&](const LLet& l) -> LType {
              LType bound = check(l.bound);
              if (bound.kind != LType::Kind::Bag) return fail("let binds a non-bag");
              lets_.emplace_back(l.name, bound);
              LType body = check(l.body);
              lets_.pop_back();
              return body;
            },
        },
        t->node);
  }

 private:
  const GlobalEnv& env_;
  std::vector<std::pair<std::string, LType>> vars_;
  std::vector<std::pair<std::string, LType>> lets_;

  [[noreturn]] LType fail(const std::string& msg) const {
    throw Error(Stage::Lower, "lowered-type", msg);
  }

  static BaseType agg_result(const AggItem& item, const LType& arg) {
    ScalarType st{arg.null_literal ? BaseType::real() : arg.scalar, arg.null_literal};
    switch (item.agg) {
      case AggKind::Count:
      case AggKind::CountDistinct:
        return BaseType::natural();
      case AggKind::Sum:
        return st.type.is_integer_kind() ? st.type : BaseType::real();
      case AggKind::Avg:
        return st.type.is_continuous() ? st.type : BaseType::real();
      case AggKind::Max:
      case AggKind::Min:
        return st.type;
      case AggKind::Concat:
        return BaseType::str();
    }
    return BaseType::real();
  }

  void check_scalar_arg(const LTermPtr& t) {
    LType ty = check(t);
    if (ty.kind != LType::Kind::Scalar)
      fail("condition scalars must have scalar type");
  }

  void check_event0(const std::string& model, const LEvent0& e) {
    const Schema& ms = env_.model_schema(model);
    for (const auto& [col, term] : e.pins) {
      if (col < 0 || col >= static_cast<int>(ms.columns.size()))
        fail("condition column index out of range");
      check_scalar_arg(term);
    }
  }

  void check_event1(const std::string& model, const LEventPtr& e) {
    if (!e) return;
    if (e->kind == LEvent::Kind::Atom) {
      const Schema& ms = env_.model_schema(model);
      if (e->atom.col < 0 || e->atom.col >= static_cast<int>(ms.columns.size()))
        fail("condition column index out of range");
      if (e->atom.op == OpKind::Eq && ms.columns[e->atom.col].type.is_continuous())
        fail("event equality on a continuous column");
      check_scalar_arg(e->atom.scalar);
      return;
    }
    check_event1(model, e->left);
    check_event1(model, e->right);
  }

  void check_conditions(const std::string& model, const std::optional<LEvent0>& c0,
                        const LEventPtr& c1) {
    if (!env_.is_model(model)) fail("unbound model '" + model + "'");
    if (c0) check_event0(model, *c0);
    check_event1(model, c1);
  }

  LType check_op(const LOp& o) {
    std::vector<LType> args;
    for (const LTermPtr& a : o.args) {
      LType t = check(a);
      if (t.kind != LType::Kind::Scalar) fail("operator applied to a non-scalar");
      args.push_back(t);
    }
    auto numeric = [](const LType& t) { return t.null_literal || t.scalar.is_numeric(); };
    switch (o.op) {
      case OpKind::Add:
      case OpKind::Sub:
      case OpKind::Mul: {
        if (!numeric(args[0]) || !numeric(args[1])) fail("arithmetic on non-numeric values");
        bool ints = !args[0].null_literal && !args[1].null_literal &&
                    args[0].scalar.is_integer_kind() && args[1].scalar.is_integer_kind();
        if (ints && o.op != OpKind::Sub && args[0].scalar.kind == TypeKind::Nat &&
            args[1].scalar.kind == TypeKind::Nat)
          return LType::of_scalar(BaseType::natural());
        return LType::of_scalar(ints ? BaseType::integer() : BaseType::real());
      }
      case OpKind::Div:
        if (!numeric(args[0]) || !numeric(args[1])) fail("arithmetic on non-numeric values");
        return LType::of_scalar(BaseType::real());
      case OpKind::Neg:
        if (!numeric(args[0])) fail("negation of a non-numeric value");
        return LType::of_scalar(args[0].scalar.is_integer_kind() ? BaseType::integer()
                                                                 : BaseType::real());
      case OpKind::Lt:
      case OpKind::Gt:
        if (!numeric(args[0]) || !numeric(args[1])) fail("ordered comparison on non-numbers");
        return LType::of_scalar(BaseType::boolean());
      case OpKind::Eq:
        return LType::of_scalar(BaseType::boolean());
      case OpKind::And:
      case OpKind::Or:
        for (const LType& a : args)
          if (!a.null_literal && a.scalar.kind != TypeKind::Bool)
            fail("boolean operator on non-boolean values");
        return LType::of_scalar(BaseType::boolean());
      case OpKind::Log:
      case OpKind::Sqrt:
        if (!numeric(args[0])) fail("numeric function on a non-number");
        return LType::of_scalar(BaseType::real());
      case OpKind::Exp:
        if (!numeric(args[0])) fail("numeric function on a non-number");
        return LType::of_scalar(BaseType::posreal());
    }
    fail("unknown operator");
  }
};

inline LType lowered_typecheck(const LoweredProgram& p, const GlobalEnv& env) {
  return LoweredTypeChecker(env).check(p.root);
}

// ---------------------------------------------------------------------------
// Printer: one combinator per line, indentation by nesting
// ---------------------------------------------------------------------------

namespace lower_print {

inline std::string event0_text(const LEvent0& e);
inline std::string event1_text(const LEventPtr& e);
inline std::string inline_text(const LTermPtr& t);

inline std::string inline_text(const LTermPtr& t) {
  return std::visit(
      overloaded{
          [&](const LConst& c) { return c.value.to_string(); },
          [&](const LVar& v) { return v.name; },
          [&](const LProj& p) {
            return "pi_" + std::to_string(p.index) + "(" + inline_text(p.base) + ")";
          },
          [&](const LOp& o) -> std::string {
            if (o.args.size() == 1)
              return std::string(op_name(o.op)) + "(" + inline_text(o.args[0]) + ")";
            return "(" + inline_text(o.args[0]) + " " + op_name(o.op) + " " +
                   inline_text(o.args[1]) + ")";
          },
          [&](const LTuple& tp) {
            std::string s = "(";
            for (std::size_t i = 0; i < tp.items.size(); ++i) {
              if (i) s += ", ";
              s += inline_text(tp.items[i]);
            }
            return s + ")";
          },
          [&](const LLogPdf& l) {
            return "logpdf_" + l.model + "(" + (l.c0 ? event0_text(*l.c0) : "{}") + ", " +
                   event1_text(l.c1) + ", " + event0_text(l.target) + ")";
          },
          [&](const LProb& p) {
            return "prob_" + p.model + "(" + (p.c0 ? event0_text(*p.c0) : "{}") + ", " +
                   event1_text(p.c1) + ", " + event1_text(p.target) + ")";
          },
          [&](const LSimulate& s) {
            return "simulate_" + s.model + "(" + (s.c0 ? event0_text(*s.c0) : "{}") + ", " +
                   event1_text(s.c1) + ")";
          },
          [&](const LMutualInfo& mi) -> std::string {
            std::string s = "mutual_info_" + mi.model + "([";
            for (std::size_t i = 0; i < mi.cols_a.size(); ++i)
              s += (i ? "," : "") + std::to_string(mi.cols_a[i]);
            s += "], [";
            for (std::size_t i = 0; i < mi.cols_b.size(); ++i)
              s += (i ? "," : "") + std::to_string(mi.cols_b[i]);
            s += "], " + (mi.c0 ? event0_text(*mi.c0) : std::string("{}")) + ", " +
                 event1_text(mi.c1) + ")";
            return s;
          },
          [&](const LTableRef& r) { return r.id; },
          [&](const auto&) { return std::string("<bag>"); },
      },
      t->node);
}

inline std::string event0_text(const LEvent0& e) {
  std::string s = "{";
  for (std::size_t i = 0; i < e.pins.size(); ++i) {
    if (i) s += " & ";
    s += "(" + std::to_string(e.pins[i].first) + ") = " + inline_text(e.pins[i].second);
  }
  return s + "}";
}

inline std::string event1_text(const LEventPtr& e) {
  if (!e) return "full";
  switch (e->kind) {
    case LEvent::Kind::Atom:
      return "(" + std::to_string(e->atom.col) + ") " + op_name(e->atom.op) + " " +
             inline_text(e->atom.scalar);
    case LEvent::Kind::And:
      return "(" + event1_text(e->left) + " & " + event1_text(e->right) + ")";
    case LEvent::Kind::Or:
      return "(" + event1_text(e->left) + " | " + event1_text(e->right) + ")";
  }
  return "?";
}

inline void print_into(const LTermPtr& t, int depth, std::string& out) {
  std::string pad(2 * static_cast<std::size_t>(depth), ' ');
  std::visit(
      overloaded{
          [&](const LMap& m) {
            out += pad + "map " + m.var + " -> " + inline_text(m.body) + "\n";
            print_into(m.bag, depth + 1, out);
          },
          [&](const LFilter& f) {
            out += pad + "filter " + f.var + " -> " + inline_text(f.pred) + "\n";
            print_into(f.bag, depth + 1, out);
          },
          [&](const LMapReduce& m) {
            out += pad + "mapreduce " + m.var + " ->\n";
            print_into(m.body, depth + 1, out);
            print_into(m.bag, depth + 1, out);
          },
          [&](const LReplicate& r) {
            out += pad + "replicate " + inline_text(r.count) + "\n";
            print_into(r.bag, depth + 1, out);
          },
          [&](const LJoin& j) {
            out += pad + "join\n";
            print_into(j.left, depth + 1, out);
            print_into(j.right, depth + 1, out);
          },
          [&](const LUnion& u) {
            out += pad + "union\n";
            print_into(u.left, depth + 1, out);
            print_into(u.right, depth + 1, out);
          },
          [&](const LDedup& d) {
            out += pad + "dedup\n";
            print_into(d.bag, depth + 1, out);
          },
          [&](const LDuplicate& d) {
            out += pad + "duplicate " + inline_text(d.count) + "\n";
            print_into(d.bag, depth + 1, out);
          },
          [&](const LGroupBy& g) {
            std::string keys, aggs;
            for (std::size_t i = 0; i < g.keys.size(); ++i)
              keys += (i ? ", " : "") + inline_text(g.keys[i]);
            for (std::size_t i = 0; i < g.aggs.size(); ++i)
              aggs += (i ? ", " : "") + std::string(agg_name(g.aggs[i].first)) + "(" +
                      inline_text(g.aggs[i].second) + ")";
            out += pad + "group " + g.var + " -> [" + keys + "] aggregating [" + aggs + "]\n";
            print_into(g.bag, depth + 1, out);
          },
          [&](const LLet& l) {
            out += pad + "let " + l.name + " =\n";
            print_into(l.bound, depth + 1, out);
            print_into(l.body, depth + 1, out);
          },
          [&](const LSingleton& s) {
            out += pad + "singleton " + inline_text(s.row) + "\n";
          },
          [&](const LSimulate&) { out += pad + inline_text(t) + "\n"; },
          [&](const LTableRef& r) { out += pad + r.id + "\n"; },
          [&](const auto&) { out += pad + inline_text(t) + "\n"; },
      },
      t->node);
}

}  // namespace lower_print

inline std::string to_text(const LoweredProgram& p) {
  std::string out;
  lower_print::print_into(p.root, 0, out);
  return out;
}

}  // namespace gensql
