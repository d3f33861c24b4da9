#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gensql/ast.hpp"
#include "gensql/env.hpp"
#include "gensql/error.hpp"

namespace gensql {

// Removes every sugar form from a parsed query:
//   - SELECT * (with EXCEPT) expands to the full column list;
//   - PROBABILITY OF * expands to a conjunction of equalities over the model
//     columns, taking values from the enclosing row;
//   - m GIVEN * expands to equalities over the row-table columns that do not
//     appear in the enclosing SELECT clause;
//   - bare-column conditions (GIVEN weight) become model.col = table.col;
//   - unqualified column references are resolved against the row scope;
//   - WITH bindings whose bound expression is a model are inlined.
// FROM tables with no identifier get a fresh one so that later stages can
// always address the current row.
class Desugarer {
 public:
  Desugarer(const GlobalEnv& env, Diagnostics* diags = nullptr) : env_(env), diags_(diags) {}

  Query run(const Query& q) {
    Query out = q;
    if (q.is_scalar())
      out.root = scalar(q.scalar(), {});
    else
      out.root = table(q.table(), {});
    return out;
  }

 private:
  // Column-name shape of a table expression; enough to expand the sugar.
  struct Shape {
    std::string id;  // empty when the table carries no identifier
    std::vector<std::string> cols;
  };

  struct RowScope {
    std::vector<Shape> tables;  // innermost last

    const Shape* resolve_col(const std::string& col) const {
      for (auto it = tables.rbegin(); it != tables.rend(); ++it)
        if (std::find(it->cols.begin(), it->cols.end(), col) != it->cols.end()) return &*it;
      return nullptr;
    }
    const Shape* by_id(const std::string& id) const {
      for (auto it = tables.rbegin(); it != tables.rend(); ++it)
        if (it->id == id) return &*it;
      return nullptr;
    }
    const Shape* innermost() const { return tables.empty() ? nullptr : &tables.back(); }
  };

  const GlobalEnv& env_;
  Diagnostics* diags_;
  int fresh_counter_ = 0;
  std::map<std::string, ModelPtr> model_bindings_;       // WITH-bound models
  std::map<std::string, std::vector<std::string>> with_tables_;  // WITH-bound table columns

  std::string fresh_id() {
    for (;;) {
      std::string id = "_t" + std::to_string(fresh_counter_++);
      if (!env_.has(id) && !with_tables_.count(id)) return id;
    }
  }

  // ---- shape inference -----------------------------------------------------

  Shape shape_of(const TablePtr& t) const {
    return std::visit(
        overloaded{
            [&](const TableId& i) -> Shape {
              if (env_.is_table(i.id)) return {i.id, env_.table_schema(i.id).column_names()};
              auto it = with_tables_.find(i.id);
              if (it != with_tables_.end()) return {i.id, it->second};
              if (env_.is_model(i.id))
                throw TypeError("sort-mismatch", "'" + i.id + "' names a model, not a table",
                                t->span);
              throw TypeError("unknown-identifier", "no table named '" + i.id + "'", t->span);
            },
            [&](const TableUnion& u) -> Shape { return {"", shape_of(u.left).cols}; },
            [&](const TableJoin& j) -> Shape {
              Shape l = shape_of(j.left), r = shape_of(j.right);
              std::vector<std::string> cols = l.cols;
              cols.insert(cols.end(), r.cols.begin(), r.cols.end());
              return {"", std::move(cols)};
            },
            [&](const TableRename& r) -> Shape { return {r.new_id, shape_of(r.base).cols}; },
            [&](const TableDedup& d) -> Shape { return shape_of(d.base); },
            [&](const TableDuplicate& d) -> Shape { return shape_of(d.base); },
            [&](const TableWhere& w) -> Shape { return shape_of(w.base); },
            [&](const TableWith& w) -> Shape { return shape_of(w.body); },
            [&](const TableSelect& s) -> Shape {
              Shape from = shape_of(s.from);
              std::vector<std::string> cols;
              // select keeps the FROM identifier so a trailing WHERE can
              // address the projected row
              for (const SelectItem& item : s.items) {
                if (item.kind == SelectItem::Kind::Star) {
                  for (const std::string& c : from.cols) {
                    bool excluded = false;
                    for (const ColName& e : item.except) excluded |= (e.col == c);
                    if (!excluded) cols.push_back(c);
                  }
                } else if (item.alias) {
                  cols.push_back(*item.alias);
                } else if (auto* ref = std::get_if<ScalarColRef>(&item.expr->node)) {
                  cols.push_back(ref->ref.col);
                } else {
                  cols.push_back("col" + std::to_string(cols.size() + 1));
                }
              }
              return {from.id, std::move(cols)};
            },
            [&](const TableGroupBy& g) -> Shape {
              std::vector<std::string> cols;
              for (const auto& k : g.keys) cols.push_back(k.second);
              for (const auto& a : g.aggs) cols.push_back(a.as);
              return {"", std::move(cols)};
            },
            [&](const TableGenerate& g) -> Shape {
              return {"", model_schema_of(g.model).column_names()};
            },
            [&](const TableGenJoin& j) -> Shape {
              Shape l = shape_of(j.base);
              std::vector<std::string> cols = l.cols;
              for (const std::string& c : model_schema_of(j.model).column_names())
                cols.push_back(c);
              return {"", std::move(cols)};
            },
        },
        t->node);
  }

  Schema model_schema_of(const ModelPtr& m) const {
    return std::visit(
        overloaded{
            [&](const ModelId& i) -> Schema {
              auto it = model_bindings_.find(i.id);
              if (it != model_bindings_.end()) return model_schema_of(it->second);
              if (env_.is_table(i.id))
                throw TypeError("sort-mismatch", "'" + i.id + "' names a table, not a model",
                                m->span);
              return env_.model_schema(i.id);
            },
            [&](const ModelGiven& g) { return model_schema_of(g.base); },
            [&](const ModelRename& r) {
              Schema s = model_schema_of(r.base);
              s.identifier = r.new_id;
              return s;
            },
        },
        m->node);
  }

  std::string model_id_of(const ModelPtr& m) const {
    auto s = model_schema_of(m);
    if (!s.identifier)
      throw TypeError("model-id", "model expression has no identifier", m->span);
    return *s.identifier;
  }

  // ---- column names referenced by select items (for GIVEN *) ---------------

  static void collect_cols(const ScalarPtr& e, std::set<std::string>& out);
  static void collect_cols(const CondPtr& c, std::set<std::string>& out) {
    std::visit(overloaded{
                   [&](const CondAtom& a) {
                     out.insert(a.lhs.col);
                     collect_cols(a.rhs, out);
                   },
                   [&](const CondBareCol& b) { out.insert(b.col); },
                   [&](const CondStar&) {},
                   [&](const CondAnd& a) {
                     collect_cols(a.left, out);
                     collect_cols(a.right, out);
                   },
                   [&](const CondOr& o) {
                     collect_cols(o.left, out);
                     collect_cols(o.right, out);
                   },
                   [&](const CondTrue&) {},
               },
               c->node);
  }

  // ---- rewriting ------------------------------------------------------------

  TablePtr table(const TablePtr& t, const RowScope& scope) {
    return std::visit(
        overloaded{
            [&](const TableId& i) -> TablePtr {
              if (env_.is_model(i.id) || model_bindings_.count(i.id))
                throw TypeError("sort-mismatch", "'" + i.id + "' names a model, not a table",
                                t->span);
              return t;
            },
            [&](const TableUnion& u) -> TablePtr {
              return mk_table({TableUnion{table(u.left, scope), table(u.right, scope)}, t->span});
            },
            [&](const TableJoin& j) -> TablePtr {
              return mk_table({TableJoin{table(j.left, scope), table(j.right, scope)}, t->span});
            },
            [&](const TableRename& r) -> TablePtr {
              return mk_table({TableRename{table(r.base, scope), r.new_id}, t->span});
            },
            [&](const TableDedup& d) -> TablePtr {
              return mk_table({TableDedup{table(d.base, scope)}, t->span});
            },
            [&](const TableDuplicate& d) -> TablePtr {
              return mk_table(
                  {TableDuplicate{table(d.base, scope), scalar(d.times, scope)}, t->span});
            },
            [&](const TableWhere& w) -> TablePtr {
              TablePtr base = table(w.base, scope);
              base = ensure_id(base);
              RowScope inner = scope;
              inner.tables.push_back(shape_of(base));
              return mk_table({TableWhere{base, scalar(w.pred, inner)}, t->span});
            },
            [&](const TableWith& w) -> TablePtr {
              if (w.bound_model ||
                  (w.bound_table && model_expr_like(*w.bound_table))) {
                ModelPtr bound = w.bound_model ? model(*w.bound_model, scope)
                                               : model_from_table(*w.bound_table, scope);
                // keep the binding addressable by its alias
                if (!std::holds_alternative<ModelId>(bound->node))
                  bound = md_rename(bound, w.name, t->span);
                model_bindings_[w.name] = bound;
                TablePtr body = table(w.body, scope);
                model_bindings_.erase(w.name);
                return body;
              }
              TablePtr bound = table(*w.bound_table, scope);
              with_tables_[w.name] = shape_of(bound).cols;
              TablePtr body = table(w.body, scope);
              with_tables_.erase(w.name);
              return mk_table({TableWith{bound, std::nullopt, w.name, body}, t->span});
            },
            [&](const TableSelect& s) -> TablePtr { return select(s, t->span, scope); },
            [&](const TableGroupBy& g) -> TablePtr {
              TablePtr base = ensure_id(table(g.base, scope));
              RowScope inner = scope;
              inner.tables.push_back(shape_of(base));
              std::vector<std::pair<ScalarPtr, std::string>> keys;
              for (const auto& k : g.keys) keys.emplace_back(scalar(k.first, inner), k.second);
              std::vector<AggItem> aggs;
              for (const AggItem& a : g.aggs)
                aggs.push_back(AggItem{a.agg, scalar(a.arg, inner), a.as, a.span});
              return mk_table({TableGroupBy{base, std::move(keys), std::move(aggs)}, t->span});
            },
            [&](const TableGenerate& g) -> TablePtr {
              return mk_table(
                  {TableGenerate{model(g.model, scope), scalar(g.limit, scope)}, t->span});
            },
            [&](const TableGenJoin& j) -> TablePtr {
              TablePtr base = ensure_id(table(j.base, scope));
              RowScope inner = scope;
              inner.tables.push_back(shape_of(base));
              // conditions inside the joined model see the current row of base
              return mk_table({TableGenJoin{base, model(j.model, inner)}, t->span});
            },
        },
        t->node);
  }

  // A WITH binding parsed as a table may actually name a model.
  bool model_expr_like(const TablePtr& t) const {
    if (auto* id = std::get_if<TableId>(&t->node))
      return env_.is_model(id->id) || model_bindings_.count(id->id) > 0;
    if (auto* rn = std::get_if<TableRename>(&t->node)) return model_expr_like(rn->base);
    return false;
  }

  ModelPtr model_from_table(const TablePtr& t, const RowScope& scope) {
    if (auto* id = std::get_if<TableId>(&t->node))
      return model(md_id(id->id, t->span), scope);
    if (auto* rn = std::get_if<TableRename>(&t->node))
      return model(md_rename(model_from_table(rn->base, scope), rn->new_id, t->span), scope);
    throw TypeError("sort-mismatch", "expected a model expression", t->span);
  }

  TablePtr ensure_id(const TablePtr& t) {
    if (!shape_of(t).id.empty()) return t;
    return mk_table({TableRename{t, fresh_id()}, t->span});
  }

  TablePtr select(const TableSelect& s, Span sp, const RowScope& scope) {
    TablePtr from = ensure_id(table(s.from, scope));
    Shape from_shape = shape_of(from);
    RowScope inner = scope;
    inner.tables.push_back(from_shape);

    // Names mentioned anywhere in the select items; GIVEN * skips them.
    std::set<std::string> mentioned;
    for (const SelectItem& item : s.items)
      if (item.kind == SelectItem::Kind::Expr) collect_cols(item.expr, mentioned);

    std::vector<SelectItem> items;
    for (const SelectItem& item : s.items) {
      if (item.kind == SelectItem::Kind::Star) {
        for (const ColName& e : item.except) {
          if (std::find(from_shape.cols.begin(), from_shape.cols.end(), e.col) ==
              from_shape.cols.end())
            throw TypeError("except-unknown-column",
                            "EXCEPT names column '" + e.col + "' which does not exist",
                            item.span);
        }
        for (const std::string& c : from_shape.cols) {
          bool excluded = false;
          for (const ColName& e : item.except) excluded |= (e.col == c);
          if (excluded) continue;
          SelectItem expanded;
          expanded.kind = SelectItem::Kind::Expr;
          expanded.expr = sc_col(from_shape.id, c, item.span);
          expanded.alias = c;
          expanded.span = item.span;
          items.push_back(std::move(expanded));
        }
      } else {
        SelectItem out = item;
        out.expr = scalar(item.expr, inner, &mentioned);
        if (!out.alias) {
          if (auto* ref = std::get_if<ScalarColRef>(&out.expr->node))
            out.alias = ref->ref.col;
          else
            out.alias = "col" + std::to_string(items.size() + 1);
        }
        items.push_back(std::move(out));
      }
    }
    return mk_table({TableSelect{std::move(items), from}, sp});
  }

  ModelPtr model(const ModelPtr& m, const RowScope& scope,
                 const std::set<std::string>* select_mentions = nullptr) {
    return std::visit(
        overloaded{
            [&](const ModelId& i) -> ModelPtr {
              auto it = model_bindings_.find(i.id);
              if (it != model_bindings_.end()) return it->second;  // WITH inlining
              if (!env_.is_model(i.id)) {
                if (env_.is_table(i.id))
                  throw TypeError("sort-mismatch", "'" + i.id + "' names a table, not a model",
                                  m->span);
                throw TypeError("unknown-identifier", "no model named '" + i.id + "'", m->span);
              }
              return m;
            },
            [&](const ModelGiven& g) -> ModelPtr {
              ModelPtr base = model(g.base, scope, select_mentions);
              Schema ms = model_schema_of(base);
              CondPtr c = cond(g.cond, scope, ms, select_mentions);
              return mk_model({ModelGiven{base, c}, m->span});
            },
            [&](const ModelRename& r) -> ModelPtr {
              return mk_model({ModelRename{model(r.base, scope, select_mentions), r.new_id},
                               m->span});
            },
        },
        m->node);
  }

  // Expand sugar inside a condition owned by the model whose resolved schema
  // (identifier included) is `mschema`.
  CondPtr cond(const CondPtr& c, const RowScope& scope, const Schema& mschema,
               const std::set<std::string>* select_mentions) {
    if (!mschema.identifier)
      throw TypeError("model-id", "conditioned model has no identifier", c->span);
    const std::string& mid = *mschema.identifier;
    return std::visit(
        overloaded{
            [&](const CondAtom& a) -> CondPtr {
              ColName lhs = a.lhs;
              if (lhs.id.empty()) {
                if (mschema.index_of(lhs.col) < 0)
                  throw TypeError("unknown-column",
                                  "model '" + mid + "' has no column '" + lhs.col + "'", c->span);
                lhs.id = mid;
              }
              return mk_cond({CondAtom{lhs, a.op, scalar(a.rhs, scope)}, c->span});
            },
            [&](const CondBareCol& b) -> CondPtr {
              const Shape* row = scope.resolve_col(b.col);
              if (!row)
                throw TypeError("unknown-column",
                                "bare condition column '" + b.col +
                                    "' does not match any table in scope",
                                c->span);
              if (mschema.index_of(b.col) < 0)
                throw TypeError("unknown-column",
                                "model '" + mid + "' has no column '" + b.col + "'", c->span);
              return cd_atom(mid, b.col, OpKind::Eq, sc_col(row->id, b.col, c->span), c->span);
            },
            [&](const CondStar& s) -> CondPtr {
              const Shape* row = scope.innermost();
              if (!row)
                throw TypeError("star-no-context", "* condition outside a row scope", c->span);
              for (const ColName& e : s.except)
                if (std::find(row->cols.begin(), row->cols.end(), e.col) == row->cols.end() &&
                    mschema.index_of(e.col) < 0)
                  throw TypeError("except-unknown-column",
                                  "EXCEPT names column '" + e.col + "' which does not exist",
                                  c->span);
              CondPtr out;
              for (const std::string& col : row->cols) {
                if (mschema.index_of(col) < 0) continue;
                bool skip = false;
                for (const ColName& e : s.except) skip |= (e.col == col);
                if (select_mentions && select_mentions->count(col)) skip = true;
                if (skip) continue;
                CondPtr atom = cd_atom(mid, col, OpKind::Eq, sc_col(row->id, col, c->span), c->span);
                out = out ? cd_and(out, atom, c->span) : atom;
              }
              if (!out)
                throw TypeError("star-empty",
                                "* condition expands to no columns (everything is excluded)",
                                c->span);
              return out;
            },
            [&](const CondAnd& a) -> CondPtr {
              return cd_and(cond(a.left, scope, mschema, select_mentions),
                            cond(a.right, scope, mschema, select_mentions), c->span);
            },
            [&](const CondOr& o) -> CondPtr {
              return cd_or(cond(o.left, scope, mschema, select_mentions),
                           cond(o.right, scope, mschema, select_mentions), c->span);
            },
            [&](const CondTrue&) -> CondPtr { return c; },
        },
        c->node);
  }

  ScalarPtr scalar(const ScalarPtr& e, const RowScope& scope,
                   const std::set<std::string>* select_mentions = nullptr) {
    return std::visit(
        overloaded{
            [&](const ScalarConst&) -> ScalarPtr { return e; },
            [&](const ScalarColRef& r) -> ScalarPtr {
              if (!r.ref.id.empty()) return e;
              const Shape* row = scope.resolve_col(r.ref.col);
              if (!row)
                throw TypeError("unknown-column",
                                "unqualified column '" + r.ref.col +
                                    "' does not match any table in scope",
                                e->span);
              return sc_col(row->id, r.ref.col, e->span);
            },
            [&](const ScalarOp& o) -> ScalarPtr {
              std::vector<ScalarPtr> args;
              for (const ScalarPtr& a : o.args) args.push_back(scalar(a, scope, select_mentions));
              return sc_op(o.op, std::move(args), e->span);
            },
            [&](const ScalarProb& p) -> ScalarPtr {
              ModelPtr m = model(p.model, scope, select_mentions);
              // the probability target's * covers every column; only GIVEN *
              // skips the columns mentioned in the SELECT clause
              CondPtr c = cond(p.cond, scope, model_schema_of(m), nullptr);
              return mk_scalar({ScalarProb{c, m, p.density_keyword}, e->span});
            },
            [&](const ScalarMutualInfo& mi) -> ScalarPtr {
              ModelPtr m = model(mi.model, scope, select_mentions);
              Schema ms = model_schema_of(m);
              std::string mid = *ms.identifier;
              auto fix = [&](const std::vector<ColName>& cols) {
                std::vector<ColName> out;
                for (ColName c : cols) {
                  if (c.id.empty()) c.id = mid;
                  out.push_back(c);
                }
                return out;
              };
              CondPtr c = mi.cond ? cond(mi.cond, scope, ms, select_mentions) : nullptr;
              return mk_scalar(
                  {ScalarMutualInfo{fix(mi.lhs), fix(mi.rhs), c, m}, e->span});
            },
        },
        e->node);
  }
};

inline void Desugarer::collect_cols(const ScalarPtr& e, std::set<std::string>& out) {
  std::visit(overloaded{
                 [&](const ScalarConst&) {},
                 [&](const ScalarColRef& r) { out.insert(r.ref.col); },
                 [&](const ScalarOp& o) {
                   for (const ScalarPtr& a : o.args) collect_cols(a, out);
                 },
                 [&](const ScalarProb& p) { collect_cols(p.cond, out); },
                 [&](const ScalarMutualInfo& mi) {
                   for (const ColName& c : mi.lhs) out.insert(c.col);
                   for (const ColName& c : mi.rhs) out.insert(c.col);
                   if (mi.cond) collect_cols(mi.cond, out);
                 },
             },
             e->node);
}

inline Query desugar(const Query& q, const GlobalEnv& env, Diagnostics* diags = nullptr) {
  return Desugarer(env, diags).run(q);
}

// Structural scan: after desugaring no star, bare-column or unqualified
// reference survives. Used by tests and asserted by the session pipeline.
bool fully_desugared(const TablePtr& t);
bool fully_desugared(const ScalarPtr& e);

inline bool fully_desugared(const CondPtr& c) {
  return std::visit(overloaded{
                        [&](const CondAtom& a) {
                          return !a.lhs.id.empty() && fully_desugared(a.rhs);
                        },
                        [&](const CondBareCol&) { return false; },
                        [&](const CondStar&) { return false; },
                        [&](const CondAnd& a) {
                          return fully_desugared(a.left) && fully_desugared(a.right);
                        },
                        [&](const CondOr& o) {
                          return fully_desugared(o.left) && fully_desugared(o.right);
                        },
                        [&](const CondTrue&) { return true; },
                    },
                    c->node);
}

inline bool fully_desugared(const ModelPtr& m) {
  return std::visit(overloaded{
                        [&](const ModelId&) { return true; },
                        [&](const ModelGiven& g) {
                          return fully_desugared(g.base) && fully_desugared(g.cond);
                        },
                        [&](const ModelRename& r) { return fully_desugared(r.base); },
                    },
                    m->node);
}

inline bool fully_desugared(const ScalarPtr& e) {
  return std::visit(overloaded{
                        [&](const ScalarConst&) { return true; },
                        [&](const ScalarColRef& r) { return !r.ref.id.empty(); },
                        [&](const ScalarOp& o) {
                          for (const ScalarPtr& a : o.args)
                            if (!fully_desugared(a)) return false;
                          return true;
                        },
                        [&](const ScalarProb& p) {
                          return fully_desugared(p.cond) && fully_desugared(p.model);
                        },
                        [&](const ScalarMutualInfo& mi) {
                          for (const ColName& c : mi.lhs)
                            if (c.id.empty()) return false;
                          for (const ColName& c : mi.rhs)
                            if (c.id.empty()) return false;
                          if (mi.cond && !fully_desugared(mi.cond)) return false;
                          return fully_desugared(mi.model);
                        },
                    },
                    e->node);
}

inline bool fully_desugared(const TablePtr& t) {
  return std::visit(
      overloaded{
          [&](const TableId&) { return true; },
          [&](const TableUnion& u) {
            return fully_desugared(u.left) && fully_desugared(u.right);
          },
          [&](const TableJoin& j) {
            return fully_desugared(j.left) && fully_desugared(j.right);
          },
          [&](const TableRename& r) { return fully_desugared(r.base); },
          [&](const TableDedup& d) { return fully_desugared(d.base); },
          [&](const TableDuplicate& d) {
            return fully_desugared(d.base) && fully_desugared(d.times);
          },
          [&](const TableWhere& w) {
            return fully_desugared(w.base) && fully_desugared(w.pred);
          },
          [&](const TableWith& w) {
            return w.bound_table && fully_desugared(*w.bound_table) && fully_desugared(w.body);
          },
          [&](const TableSelect& s) {
            for (const SelectItem& item : s.items)
              if (item.kind == SelectItem::Kind::Star || !item.alias ||
                  !fully_desugared(item.expr))
                return false;
            return fully_desugared(s.from);
          },
          [&](const TableGroupBy& g) {
            for (const auto& k : g.keys)
              if (!fully_desugared(k.first)) return false;
            for (const auto& a : g.aggs)
              if (!fully_desugared(a.arg)) return false;
            return fully_desugared(g.base);
          },
          [&](const TableGenerate& g) {
            return fully_desugared(g.model) && fully_desugared(g.limit);
          },
          [&](const TableGenJoin& j) {
            return fully_desugared(j.base) && fully_desugared(j.model);
          },
      },
      t->node);
}

inline bool fully_desugared(const Query& q) {
  return q.is_scalar() ? fully_desugared(q.scalar()) : fully_desugared(q.table());
}

}  // namespace gensql
