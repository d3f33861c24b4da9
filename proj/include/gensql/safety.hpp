#pragma once

#include <unordered_map>
#include <vector>

#include "gensql/ast.hpp"
#include "gensql/normalize.hpp"
#include "gensql/typecheck.hpp"

namespace gensql {

// Static analysis gating the approximate-backend guarantee: safe queries are
// those whose evaluation converges to the exact semantics as the backend's
// compute budget grows. exact means the value does not depend on the budget
// at all; continuous means the value is a continuous function of the
// approximated probability/density results feeding it.
struct SafetyFlags {
  bool safe = false;
  bool exact = false;
  bool continuous = false;
};

struct SafetyReport {
  std::unordered_map<const void*, SafetyFlags> flags;
  std::vector<Span> unsafe_spans;
  bool query_safe = false;
  bool query_exact = false;

  template <class T>
  SafetyFlags of(const std::shared_ptr<const T>& node) const {
    auto it = flags.find(node.get());
    return it == flags.end() ? SafetyFlags{} : it->second;
  }
};

class SafetyAnalyzer {
 public:
  explicit SafetyAnalyzer(const TypeInfo& info) : info_(info) {}

  SafetyReport analyze(const Query& q) {
    if (q.is_scalar()) {
      SafetyFlags f = scalar(q.scalar());
      report_.query_safe = f.safe;
      report_.query_exact = f.exact;
    } else {
      SafetyFlags f = table(q.table());
      report_.query_safe = f.safe;
      report_.query_exact = f.exact;
    }
    return std::move(report_);
  }

 private:
  const TypeInfo& info_;
  SafetyReport report_;

  template <class T>
  SafetyFlags put(const std::shared_ptr<const T>& node, SafetyFlags f) {
    report_.flags[node.get()] = f;
    if (!f.safe) report_.unsafe_spans.push_back(node->span);
    return f;
  }

  bool discrete_scalar(const ScalarPtr& e) const {
    const QueryType* t = info_.find(e);
    if (!t) return false;
    auto* st = std::get_if<ScalarType>(t);
    return st && !st->null_literal && st->type.is_discrete();
  }

  // Operator continuity. Division is discontinuous at zero, so it only counts
  // as continuous when the denominator is an exact nonzero constant.
  // Comparisons are continuous only over discrete operands; arithmetic,
  // exp/log/sqrt (on their query domains) are continuous.
  bool op_continuous(const ScalarOp& o, const std::vector<SafetyFlags>& args) const {
    switch (o.op) {
      case OpKind::Add:
      case OpKind::Sub:
      case OpKind::Mul:
      case OpKind::Neg:
      case OpKind::Exp:
      case OpKind::Log:
      case OpKind::Sqrt:
        return true;
      case OpKind::Div: {
        const ScalarPtr& den = o.args[1];
        if (auto* c = std::get_if<ScalarConst>(&den->node)) {
          if (c->value.is_number() && c->value.as_number() != 0.0) return args[1].exact;
        }
        return false;
      }
      case OpKind::Lt:
      case OpKind::Gt:
      case OpKind::Eq:
        return discrete_scalar(o.args[0]) && discrete_scalar(o.args[1]);
      case OpKind::And:
      case OpKind::Or:
        return true;  // boolean operands are discrete
    }
    return false;
  }

  SafetyFlags scalar(const ScalarPtr& e) {
    SafetyFlags f = std::visit(
        overloaded{
            [&](const ScalarConst&) {
              return SafetyFlags{true, true, true};
            },
            [&](const ScalarColRef&) {
              return SafetyFlags{true, false, true};
            },
            [&](const ScalarOp& o) {
              std::vector<SafetyFlags> args;
              for (const ScalarPtr& a : o.args) args.push_back(scalar(a));
              SafetyFlags out{true, true, op_continuous(o, args)};
              for (const SafetyFlags& a : args) {
                out.safe &= a.safe;
                out.exact &= a.exact;
                out.continuous &= a.continuous;
              }
              return out;
            },
            [&](const ScalarProb& p) {
              bool s = cond_safe(p.cond) && model_conds_safe(p.model);
              return SafetyFlags{s, false, s};
            },
            [&](const ScalarMutualInfo& mi) {
              bool s = model_conds_safe(mi.model) && (!mi.cond || cond_safe(mi.cond));
              return SafetyFlags{s, false, s};
            },
        },
        e->node);
    return put(e, f);
  }

  bool cond_safe(const CondPtr& c) {
    bool s = std::visit(overloaded{
                            [&](const CondAtom& a) { return scalar(a.rhs).exact; },
                            [&](const CondAnd& a) {
                              bool l = cond_safe(a.left);
                              bool r = cond_safe(a.right);
                              return l && r;
                            },
                            [&](const CondOr& o) {
                              bool l = cond_safe(o.left);
                              bool r = cond_safe(o.right);
                              return l && r;
                            },
                            [&](const auto&) { return true; },
                        },
                        c->node);
    SafetyFlags f{s, false, true};
    put(c, f);
    return s;
  }

  // Normalized models are id GIVEN c0 GIVEN c1 with optional clauses.
  bool model_conds_safe(const ModelPtr& m) {
    bool s = true;
    const ModelExpr* cur = m.get();
    while (auto* g = std::get_if<ModelGiven>(&cur->node)) {
      // intentional order: recurse first so every condition gets flags
      bool c = cond_safe(g->cond);
      s = s && c;
      cur = g->base.get();
    }
    return s;
  }

  SafetyFlags table(const TablePtr& t) {
    SafetyFlags f = std::visit(
        overloaded{
            [&](const TableId&) {
              return SafetyFlags{true, true, true};
            },
            [&](const TableUnion& u) { return merge(table(u.left), table(u.right)); },
            [&](const TableJoin& j) { return merge(table(j.left), table(j.right)); },
            [&](const TableRename& r) { return table(r.base); },
            [&](const TableDedup& d) { return table(d.base); },
            [&](const TableDuplicate& d) {
              SafetyFlags base = table(d.base);
              SafetyFlags times = scalar(d.times);
              return SafetyFlags{base.safe && times.exact, base.exact && times.exact, true};
            },
            [&](const TableWhere& w) {
              SafetyFlags base = table(w.base);
              SafetyFlags pred = scalar(w.pred);
              // never safe: an approximated predicate can flip a row forever
              return SafetyFlags{false, base.exact && pred.exact, true};
            },
            [&](const TableWith& w) {
              SafetyFlags bound =
                  w.bound_table ? table(*w.bound_table) : SafetyFlags{true, true, true};
              SafetyFlags body = table(w.body);
              return merge(bound, body);
            },
            [&](const TableSelect& s) {
              SafetyFlags from = table(s.from);
              bool safe = from.safe, exact = from.exact;
              for (const SelectItem& item : s.items) {
                SafetyFlags it = scalar(item.expr);
                safe &= it.continuous;
                exact &= it.exact;
              }
              return SafetyFlags{safe, exact, true};
            },
            [&](const TableGroupBy& g) {
              SafetyFlags base = table(g.base);
              bool safe = base.safe, exact = base.exact;
              for (const auto& k : g.keys) {
                SafetyFlags kf = scalar(k.first);
                safe &= kf.continuous;
                exact &= kf.exact;
              }
              for (const AggItem& a : g.aggs) {
                SafetyFlags af = scalar(a.arg);
                safe &= af.continuous;
                exact &= af.exact;
              }
              return SafetyFlags{safe, exact, true};
            },
            [&](const TableGenerate& g) {
              SafetyFlags lim = scalar(g.limit);
              bool s = model_conds_safe(g.model) && lim.exact;
              return SafetyFlags{s, false, true};  // sampling is never exact
            },
            [&](const TableGenJoin& j) {
              SafetyFlags base = table(j.base);
              bool s = base.safe && model_conds_safe(j.model);
              return SafetyFlags{s, false, true};
            },
        },
        t->node);
    return put(t, f);
  }

  static SafetyFlags merge(SafetyFlags a, SafetyFlags b) {
    return SafetyFlags{a.safe && b.safe, a.exact && b.exact, true};
  }
};

inline SafetyReport analyze_safety(const Query& normalized, const TypeInfo& info) {
  return SafetyAnalyzer(info).analyze(normalized);
}

}  // namespace gensql
