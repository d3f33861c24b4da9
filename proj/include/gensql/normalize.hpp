#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gensql/ast.hpp"
#include "gensql/error.hpp"
#include "gensql/rng.hpp"
#include "gensql/typecheck.hpp"

namespace gensql {

// ---------------------------------------------------------------------------
// Valuation. Every model rewrite strictly decreases it, which is the
// termination argument; the trace below lets tests check that claim.
// ---------------------------------------------------------------------------

inline std::uint64_t valuation(const ModelPtr& m) {
  return std::visit(overloaded{
                        [&](const ModelId&) -> std::uint64_t { return 1; },
                        [&](const ModelRename& r) { return 1 + valuation(r.base); },
                        [&](const ModelGiven& g) {
                          std::uint64_t v = valuation(g.base);
                          return classify_cond(g.cond) == 0 ? 2 * v : 2 * v + 1;
                        },
                    },
                    m->node);
}

// ---------------------------------------------------------------------------
// Identifier substitution in conditions (RENAME elimination)
// ---------------------------------------------------------------------------

namespace norm_detail {

inline CondPtr subst_cond(const CondPtr& c, const std::string& from, const std::string& to) {
  return std::visit(
      overloaded{
          [&](const CondAtom& a) -> CondPtr {
            if (a.lhs.id != from) return c;
            return cd_atom(to, a.lhs.col, a.op, a.rhs, c->span);
          },
          [&](const CondAnd& a) -> CondPtr {
            return cd_and(subst_cond(a.left, from, to), subst_cond(a.right, from, to), c->span);
          },
          [&](const CondOr& o) -> CondPtr {
            return cd_or(subst_cond(o.left, from, to), subst_cond(o.right, from, to), c->span);
          },
          [&](const auto&) -> CondPtr { return c; },
      },
      c->node);
}

// Identifier by which the columns of this model expression are addressed.
inline std::string head_id(const ModelPtr& m) {
  return std::visit(overloaded{
                        [&](const ModelId& i) { return i.id; },
                        [&](const ModelGiven& g) { return head_id(g.base); },
                        [&](const ModelRename& r) { return r.new_id; },
                    },
                    m->node);
}

inline void flatten_conjuncts(const CondPtr& c, std::vector<CondPtr>& out) {
  if (auto* a = std::get_if<CondAnd>(&c->node)) {
    flatten_conjuncts(a->left, out);
    flatten_conjuncts(a->right, out);
  } else {
    out.push_back(c);
  }
}

inline CondPtr rebuild_conjunction(const std::vector<CondPtr>& cs) {
  CondPtr out;
  for (const CondPtr& c : cs) out = out ? cd_and(out, c, c->span) : c;
  return out;
}

inline std::optional<std::string> atom_col(const CondPtr& c) {
  if (auto* a = std::get_if<CondAtom>(&c->node)) return a->lhs.col;
  return std::nullopt;
}

}  // namespace norm_detail

// ---------------------------------------------------------------------------
// Normalizer
// ---------------------------------------------------------------------------

struct NormalizeResult {
  Query query;
  // (valuation before, valuation after) for every model-rewrite step.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> trace;
};

class Normalizer {
 public:
  explicit Normalizer(Diagnostics* diags = nullptr,
                      std::optional<std::uint64_t> shuffle_seed = std::nullopt)
      : diags_(diags), rng_(shuffle_seed ? RngStream(*shuffle_seed) : RngStream(0)),
        shuffled_(shuffle_seed.has_value()) {}

  NormalizeResult run(const Query& q) {
    NormalizeResult out;
    out.query = q;
    if (q.is_scalar())
      out.query.root = scalar(q.scalar());
    else
      out.query.root = table(q.table());
    out.trace = std::move(trace_);
    return out;
  }

 private:
  Diagnostics* diags_;
  RngStream rng_;
  bool shuffled_;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> trace_;

  // ---- phase one: model rewrites to a fixed point --------------------------

  ModelPtr normalize_model(ModelPtr m) {
    for (;;) {
      int n = count_redexes(m);
      if (n == 0) return m;
      int pick = shuffled_ ? static_cast<int>(rng_.next_u64() % n) : 0;
      std::uint64_t before = valuation(m);
      int k = pick;
      ModelPtr next = apply_nth(m, k);
      trace_.emplace_back(before, valuation(next));
      m = next;
    }
  }

  // Rules applicable at this node, in a fixed enumeration order.
  static int rule_at(const ModelPtr& m) {
    if (auto* g = std::get_if<ModelGiven>(&m->node)) {
      if (std::holds_alternative<ModelRename>(g->base->node)) return 1;
      if (auto* inner = std::get_if<ModelGiven>(&g->base->node)) {
        int ci = classify_cond(inner->cond);
        int co = classify_cond(g->cond);
        if (ci == 0 && co == 0) return 3;
        if (ci == 1 && co == 1) return 4;
        if (ci == 1 && co == 0) return 5;
      }
      return 0;
    }
    if (auto* r = std::get_if<ModelRename>(&m->node)) {
      if (std::holds_alternative<ModelRename>(r->base->node)) return 2;
    }
    return 0;
  }

  static int count_redexes(const ModelPtr& m) {
    int n = rule_at(m) ? 1 : 0;
    std::visit(overloaded{
                   [&](const ModelId&) {},
                   [&](const ModelGiven& g) { n += count_redexes(g.base); },
                   [&](const ModelRename& r) { n += count_redexes(r.base); },
               },
               m->node);
    return n;
  }

  // Applies the k-th redex (node-first, then descend into the base).
  ModelPtr apply_nth(const ModelPtr& m, int& k) {
    if (rule_at(m)) {
      if (k == 0) return apply_here(m);
      --k;
    }
    if (auto* g = std::get_if<ModelGiven>(&m->node))
      return mk_model({ModelGiven{apply_nth(g->base, k), g->cond}, m->span});
    if (auto* r = std::get_if<ModelRename>(&m->node))
      return mk_model({ModelRename{apply_nth(r->base, k), r->new_id}, m->span});
    throw Error(Stage::Normalize, "internal", "redex index out of range");
  }

  ModelPtr apply_here(const ModelPtr& m) {
    using namespace norm_detail;
    switch (rule_at(m)) {
      case 1: {  // (RENAME m' AS id') GIVEN c  ~>  RENAME (m' GIVEN c[id := id(m')]) AS id'
        const auto& g = std::get<ModelGiven>(m->node);
        const auto& rn = std::get<ModelRename>(g.base->node);
        CondPtr c = subst_cond(g.cond, rn.new_id, head_id(rn.base));
        return mk_model(
            {ModelRename{mk_model({ModelGiven{rn.base, c}, m->span}), rn.new_id}, m->span});
      }
      case 2: {  // RENAME (RENAME m' AS id') AS id''  ~>  RENAME m' AS id''
        const auto& outer = std::get<ModelRename>(m->node);
        const auto& inner = std::get<ModelRename>(outer.base->node);
        return mk_model({ModelRename{inner.base, outer.new_id}, m->span});
      }
      case 3: {  // (m' GIVEN c0) GIVEN c0'  ~>  m' GIVEN S(c0, c0')
        const auto& g = std::get<ModelGiven>(m->node);
        const auto& inner = std::get<ModelGiven>(g.base->node);
        CondPtr merged = s_merge(inner.cond, g.cond);
        return mk_model({ModelGiven{inner.base, merged}, m->span});
      }
      case 4: {  // (m' GIVEN c1) GIVEN c1'  ~>  m' GIVEN c1 AND c1'
        const auto& g = std::get<ModelGiven>(m->node);
        const auto& inner = std::get<ModelGiven>(g.base->node);
        // rebuild as a flattened left-associated conjunction so every merge
        // order reaches the same tree (confluence is modulo associativity)
        std::vector<CondPtr> conjuncts;
        norm_detail::flatten_conjuncts(inner.cond, conjuncts);
        norm_detail::flatten_conjuncts(g.cond, conjuncts);
        return mk_model(
            {ModelGiven{inner.base, norm_detail::rebuild_conjunction(conjuncts)}, m->span});
      }
      case 5: {  // (m' GIVEN c1) GIVEN c0  ~>  (m' GIVEN c0) GIVEN c1
        const auto& g = std::get<ModelGiven>(m->node);
        const auto& inner = std::get<ModelGiven>(g.base->node);
        ModelPtr re = mk_model({ModelGiven{inner.base, g.cond}, m->span});
        return mk_model({ModelGiven{re, inner.cond}, m->span});
      }
    }
    throw Error(Stage::Normalize, "internal", "no rule at node");
  }

  // S(c0, c0'): appends the conjuncts of c0' whose column is not already
  // bound; later bindings on a bound column are dropped with a warning.
  CondPtr s_merge(const CondPtr& bound, const CondPtr& incoming) {
    using namespace norm_detail;
    std::set<std::string> bound_cols = vars(bound);
    std::vector<CondPtr> add;
    flatten_conjuncts(incoming, add);
    CondPtr acc = bound;
    for (const CondPtr& atom : add) {
      auto col = atom_col(atom);
      if (col && bound_cols.count(*col)) {
        if (diags_)
          warn(*diags_,
               "condition on column '" + *col + "' is already bound by an earlier GIVEN; "
               "the later conjunct is dropped",
               atom->span);
        continue;
      }
      if (col) bound_cols.insert(*col);
      acc = cd_and(acc, atom, atom->span);
    }
    return acc;
  }

  // ---- rename elimination at consumer positions -----------------------------

  // Strips outer RENAMEs, substituting the renamed identifier in the given
  // conditions/column lists; each strip is a valuation-decreasing step.
  ModelPtr strip_renames(ModelPtr m, std::vector<CondPtr*> conds,
                         std::vector<ColName>* cols_a = nullptr,
                         std::vector<ColName>* cols_b = nullptr) {
    using namespace norm_detail;
    while (auto* rn = std::get_if<ModelRename>(&m->node)) {
      std::uint64_t before = valuation(m);
      std::string from = rn->new_id;
      std::string to = head_id(rn->base);
      for (CondPtr* c : conds)
        if (*c) *c = subst_cond(*c, from, to);
      auto fix_cols = [&](std::vector<ColName>* cols) {
        if (!cols) return;
        for (ColName& c : *cols)
          if (c.id == from) c.id = to;
      };
      fix_cols(cols_a);
      fix_cols(cols_b);
      m = rn->base;
      trace_.emplace_back(before, valuation(m));
    }
    return m;
  }

  // ---- phase two: probability targets ---------------------------------------

  // P(c0_2, c0): removes target conjuncts whose column is already point-
  // conditioned; an emptied target turns the probability into the constant 1.
  CondPtr prune_target(const CondPtr& target, const ModelPtr& model) {
    using namespace norm_detail;
    if (classify_cond(target) != 0) return target;
    std::set<std::string> conditioned = condvars(model);
    if (conditioned.empty()) return target;
    std::vector<CondPtr> conjuncts;
    flatten_conjuncts(target, conjuncts);
    std::vector<CondPtr> kept;
    for (const CondPtr& c : conjuncts) {
      auto col = atom_col(c);
      if (col && conditioned.count(*col)) continue;
      kept.push_back(c);
    }
    if (kept.size() == conjuncts.size()) return target;
    if (kept.empty()) return cd_true(target->span);
    return rebuild_conjunction(kept);
  }

  // ---- traversal -------------------------------------------------------------

  ScalarPtr scalar(const ScalarPtr& e) {
    return std::visit(
        overloaded{
            [&](const ScalarConst&) -> ScalarPtr { return e; },
            [&](const ScalarColRef&) -> ScalarPtr { return e; },
            [&](const ScalarOp& o) -> ScalarPtr {
              std::vector<ScalarPtr> args;
              for (const ScalarPtr& a : o.args) args.push_back(scalar(a));
              return sc_op(o.op, std::move(args), e->span);
            },
            [&](const ScalarProb& p) -> ScalarPtr {
              CondPtr c = cond(p.cond);
              ModelPtr m = normalize_model(model(p.model));
              m = strip_renames(m, {&c});
              c = prune_target(c, m);
              if (std::holds_alternative<CondTrue>(c->node))
                return sc_const(Value::real(1.0), e->span, true);
              return sc_prob(c, m, e->span, p.density_keyword);
            },
            [&](const ScalarMutualInfo& mi) -> ScalarPtr {
              CondPtr c = mi.cond ? cond(mi.cond) : nullptr;
              ModelPtr m = normalize_model(model(mi.model));
              ScalarMutualInfo out{mi.lhs, mi.rhs, c, m};
              out.model = strip_renames(out.model, {&out.cond}, &out.lhs, &out.rhs);
              return mk_scalar({std::move(out), e->span});
            },
        },
        e->node);
  }

  // Conditions carry scalars (which may contain nested probability queries).
  CondPtr cond(const CondPtr& c) {
    return std::visit(
        overloaded{
            [&](const CondAtom& a) -> CondPtr {
              return cd_atom(a.lhs.id, a.lhs.col, a.op, scalar(a.rhs), c->span);
            },
            [&](const CondAnd& a) -> CondPtr {
              return cd_and(cond(a.left), cond(a.right), c->span);
            },
            [&](const CondOr& o) -> CondPtr {
              return cd_or(cond(o.left), cond(o.right), c->span);
            },
            [&](const auto&) -> CondPtr { return c; },
        },
        c->node);
  }

  ModelPtr model(const ModelPtr& m) {
    return std::visit(
        overloaded{
            [&](const ModelId&) -> ModelPtr { return m; },
            [&](const ModelGiven& g) -> ModelPtr {
              return mk_model({ModelGiven{model(g.base), cond(g.cond)}, m->span});
            },
            [&](const ModelRename& r) -> ModelPtr {
              return mk_model({ModelRename{model(r.base), r.new_id}, m->span});
            },
        },
        m->node);
  }

  TablePtr table(const TablePtr& t) {
    return std::visit(
        overloaded{
            [&](const TableId&) -> TablePtr { return t; },
            [&](const TableUnion& u) -> TablePtr {
              return mk_table({TableUnion{table(u.left), table(u.right)}, t->span});
            },
            [&](const TableJoin& j) -> TablePtr {
              return mk_table({TableJoin{table(j.left), table(j.right)}, t->span});
            },
            [&](const TableRename& r) -> TablePtr {
              return mk_table({TableRename{table(r.base), r.new_id}, t->span});
            },
            [&](const TableDedup& d) -> TablePtr {
              return mk_table({TableDedup{table(d.base)}, t->span});
            },
            [&](const TableDuplicate& d) -> TablePtr {
              return mk_table({TableDuplicate{table(d.base), scalar(d.times)}, t->span});
            },
            [&](const TableWhere& w) -> TablePtr {
              return mk_table({TableWhere{table(w.base), scalar(w.pred)}, t->span});
            },
            [&](const TableWith& w) -> TablePtr {
              return mk_table({TableWith{w.bound_table ? std::optional<TablePtr>(
                                                             table(*w.bound_table))
                                                       : std::nullopt,
                               w.bound_model, w.name, table(w.body)},
                               t->span});
            },
            [&](const TableSelect& s) -> TablePtr {
              std::vector<SelectItem> items;
              for (const SelectItem& it : s.items) {
                SelectItem out = it;
                out.expr = scalar(it.expr);
                items.push_back(std::move(out));
              }
              return mk_table({TableSelect{std::move(items), table(s.from)}, t->span});
            },
            [&](const TableGroupBy& g) -> TablePtr {
              std::vector<std::pair<ScalarPtr, std::string>> keys;
              for (const auto& k : g.keys) keys.emplace_back(scalar(k.first), k.second);
              std::vector<AggItem> aggs;
              for (const AggItem& a : g.aggs)
                aggs.push_back(AggItem{a.agg, scalar(a.arg), a.as, a.span});
              return mk_table({TableGroupBy{table(g.base), std::move(keys), std::move(aggs)},
                               t->span});
            },
            [&](const TableGenerate& g) -> TablePtr {
              ModelPtr m = strip_renames(normalize_model(model(g.model)), {});
              return mk_table({TableGenerate{m, scalar(g.limit)}, t->span});
            },
            [&](const TableGenJoin& j) -> TablePtr {
              ModelPtr m = strip_renames(normalize_model(model(j.model)), {});
              return mk_table({TableGenJoin{table(j.base), m}, t->span});
            },
        },
        t->node);
  }
};

inline NormalizeResult normalize(const Query& q, Diagnostics* diags = nullptr,
                                 std::optional<std::uint64_t> shuffle_seed = std::nullopt) {
  return Normalizer(diags, shuffle_seed).run(q);
}

// ---------------------------------------------------------------------------
// Normal-form checks (used by tests and asserted by the pipeline)
// ---------------------------------------------------------------------------

// id GIVEN c0 GIVEN c1, every clause optional, no RENAME anywhere.
inline bool is_normal_model(const ModelPtr& m) {
  const ModelExpr* cur = m.get();
  if (auto* g = std::get_if<ModelGiven>(&cur->node)) {
    if (classify_cond(g->cond) == 1) cur = g->base.get();
  }
  if (auto* g = std::get_if<ModelGiven>(&cur->node)) {
    if (classify_cond(g->cond) == 0) cur = g->base.get();
  }
  return std::holds_alternative<ModelId>(cur->node);
}

bool in_normal_form(const TablePtr& t);
bool in_normal_form(const ScalarPtr& e);

inline bool in_normal_form(const CondPtr& c) {
  return std::visit(overloaded{
                        [&](const CondAtom& a) { return in_normal_form(a.rhs); },
                        [&](const CondAnd& a) {
                          return in_normal_form(a.left) && in_normal_form(a.right);
                        },
                        [&](const CondOr& o) {
                          return in_normal_form(o.left) && in_normal_form(o.right);
                        },
                        [&](const CondTrue&) { return false; },  // must not survive
                        [&](const auto&) { return false; },
                    },
                    c->node);
}

inline bool in_normal_form_model(const ModelPtr& m) {
  if (!is_normal_model(m)) return false;
  const ModelExpr* cur = m.get();
  while (auto* g = std::get_if<ModelGiven>(&cur->node)) {
    if (!in_normal_form(g->cond)) return false;
    cur = g->base.get();
  }
  return true;
}

inline bool in_normal_form(const ScalarPtr& e) {
  return std::visit(
      overloaded{
          [&](const ScalarConst&) { return true; },
          [&](const ScalarColRef&) { return true; },
          [&](const ScalarOp& o) {
            for (const ScalarPtr& a : o.args)
              if (!in_normal_form(a)) return false;
            return true;
          },
          [&](const ScalarProb& p) {
            if (!in_normal_form_model(p.model) || !in_normal_form(p.cond)) return false;
            // a point target may not mention point-conditioned columns
            if (classify_cond(p.cond) == 0) {
              std::set<std::string> cv = condvars(p.model);
              for (const std::string& v : vars(p.cond))
                if (cv.count(v)) return false;
            }
            return true;
          },
          [&](const ScalarMutualInfo& mi) {
            if (!in_normal_form_model(mi.model)) return false;
            return !mi.cond || in_normal_form(mi.cond);
          },
      },
      e->node);
}

inline bool in_normal_form(const TablePtr& t) {
  return std::visit(
      overloaded{
          [&](const TableId&) { return true; },
          [&](const TableUnion& u) { return in_normal_form(u.left) && in_normal_form(u.right); },
          [&](const TableJoin& j) { return in_normal_form(j.left) && in_normal_form(j.right); },
          [&](const TableRename& r) { return in_normal_form(r.base); },
          [&](const TableDedup& d) { return in_normal_form(d.base); },
          [&](const TableDuplicate& d) {
            return in_normal_form(d.base) && in_normal_form(d.times);
          },
          [&](const TableWhere& w) { return in_normal_form(w.base) && in_normal_form(w.pred); },
          [&](const TableWith& w) {
            return w.bound_table && in_normal_form(*w.bound_table) && in_normal_form(w.body);
          },
          [&](const TableSelect& s) {
            for (const SelectItem& it : s.items)
              if (!in_normal_form(it.expr)) return false;
            return in_normal_form(s.from);
          },
          [&](const TableGroupBy& g) {
            for (const auto& k : g.keys)
              if (!in_normal_form(k.first)) return false;
            for (const auto& a : g.aggs)
              if (!in_normal_form(a.arg)) return false;
            return in_normal_form(g.base);
          },
          [&](const TableGenerate& g) {
            return in_normal_form_model(g.model) && in_normal_form(g.limit);
          },
          [&](const TableGenJoin& j) {
            return in_normal_form(j.base) && in_normal_form_model(j.model);
          },
      },
      t->node);
}

inline bool in_normal_form(const Query& q) {
  return q.is_scalar() ? in_normal_form(q.scalar()) : in_normal_form(q.table());
}

}  // namespace gensql
