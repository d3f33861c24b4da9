#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gensql/ami.hpp"
#include "gensql/error.hpp"
#include "gensql/events.hpp"
#include "gensql/lowering.hpp"
#include "gensql/numeric.hpp"
#include "gensql/rng.hpp"

namespace gensql {

struct EvalOptions {
  bool cache_enabled = true;
  bool indep_opt_enabled = true;
  int particles = 1000;  // approximate-backend compute budget
  int mi_samples = 1000;
  std::uint64_t seed = 0;
};

struct EvalStats {
  std::size_t backend_conditions = 0;
  std::size_t backend_scalar_calls = 0;
  std::size_t cache_model_hits = 0;
  std::size_t cache_scalar_hits = 0;
};

// Value-level memoization: keys are built from evaluated condition values,
// never from expressions, so syntactically different events that reduce to
// the same values share one backend call.
class QueryCache {
 public:
  std::optional<double> find_scalar(const std::string& key) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = scalars_.find(key);
    if (it == scalars_.end()) return std::nullopt;
    return it->second;
  }
  void put_scalar(const std::string& key, double v) {
    std::lock_guard<std::mutex> lock(mu_);
    scalars_.emplace(key, v);
  }
  ModelHandle find_model(const std::string& key) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = models_.find(key);
    return it == models_.end() ? nullptr : it->second;
  }
  void put_model(const std::string& key, ModelHandle m) {
    std::lock_guard<std::mutex> lock(mu_);
    models_.emplace(key, std::move(m));
  }

 private:
  std::mutex mu_;
  std::unordered_map<std::string, double> scalars_;
  std::unordered_map<std::string, ModelHandle> models_;
};

struct EvalEnv {
  std::map<std::string, Table> tables;
  std::map<std::string, ModelHandle> models;
  EvalOptions options;
};

// Bags at the lowered level are positional; names and output types belong to
// the query's table type and are attached by the session when rendering.
struct Bag {
  std::vector<Row> rows;
};

using EvalResult = std::variant<Value, Bag>;

class Evaluator {
 public:
  Evaluator(const EvalEnv& env, Diagnostics* diags = nullptr) : env_(env), diags_(diags) {}

  EvalResult run(const LoweredProgram& p) {
    Ctx ctx;
    ctx.path = RngStream::derive(env_.options.seed, 0x9044c7dull);
    if (p.scalar_result) return eval_scalar(p.root, ctx);
    return eval_bag(p.root, ctx);
  }

  const EvalStats& stats() const { return stats_; }

 private:
  const EvalEnv& env_;
  Diagnostics* diags_;
  QueryCache cache_;
  EvalStats stats_;

  struct Ctx {
    std::map<std::string, Row> vars;
    std::map<std::string, Bag> lets;
    std::uint64_t path = 0;
  };

  [[noreturn]] static void wrong_kind(const char* what) {
    throw EvalError("internal", std::string("lowered term evaluated as ") + what +
                                    " in the wrong position");
  }

  mutable std::map<std::string, ModelHandle> adjusted_models_;

  // Approximate backends run at the budget selected for this evaluation.
  const ModelHandle& model_of(const std::string& id) const {
    auto hit = adjusted_models_.find(id);
    if (hit != adjusted_models_.end()) return hit->second;
    auto it = env_.models.find(id);
    if (it == env_.models.end())
      throw EvalError("unbound-identifier", "no model named '" + id + "' is loaded");
    ModelHandle adjusted = it->second->with_particles(env_.options.particles);
    return adjusted_models_[id] = adjusted ? adjusted : it->second;
  }

  // ---- conditions -----------------------------------------------------------

  // Atoms whose scalar side evaluates to Null act as the unit for
  // conditioning: they denote the full space and are simply dropped.
  Assignment eval_event0(const std::optional<LEvent0>& e, Ctx& ctx) {
    Assignment out;
    if (!e) return out;
    for (const auto& [col, term] : e->pins) {
      Value v = eval_scalar(term, ctx);
      if (v.is_null()) continue;
      out.pin(col, v);
    }
    return out;
  }

  ColSet atom_set(const LEventAtom& atom, const Value& v) const {
    if (v.is_string() || v.is_bool()) {
      if (atom.op != OpKind::Eq)
        throw EvalError("event-type", "ordered comparison on a label value");
      return ColSet::of_labels({v});
    }
    double x = v.as_number();
    switch (atom.op) {
      case OpKind::Eq: return ColSet::of_interval(Interval{x, x, false, false});
      case OpKind::Lt: return ColSet::of_interval(Interval{-kInf, x, false, true});
      case OpKind::Gt: return ColSet::of_interval(Interval{x, kInf, true, false});
      default: throw EvalError("event-type", "unsupported event operator");
    }
  }

  EventSet eval_event1(const LEventPtr& e, Ctx& ctx) {
    if (!e) return EventSet::full();
    switch (e->kind) {
      case LEvent::Kind::Atom: {
        Value v = eval_scalar(e->atom.scalar, ctx);
        if (v.is_null()) return EventSet::full();  // unit for conditioning
        Rect r;
        r.sets[e->atom.col] = atom_set(e->atom, v);
        return EventSet::disjoint_union({r});
      }
      case LEvent::Kind::And:
        return EventSet::intersect(eval_event1(e->left, ctx), eval_event1(e->right, ctx));
      case LEvent::Kind::Or: {
        EventSet l = eval_event1(e->left, ctx);
        EventSet r = eval_event1(e->right, ctx);
        if (l.is_full() || r.is_full()) return EventSet::full();
        std::vector<Rect> rects = l.rects;
        rects.insert(rects.end(), r.rects.begin(), r.rects.end());
        return EventSet::disjoint_union(rects);
      }
    }
    throw EvalError("internal", "unknown event node");
  }

  // ---- caching and the independence optimization ------------------------------

  static std::string model_key(const std::string& id, const Assignment& c0,
                               const EventSet& c1) {
    return id + "|" + c0.key() + "|" + c1.key();
  }

  ModelHandle conditioned(const std::string& id, const Assignment& c0, const EventSet& c1) {
    const ModelHandle& base = model_of(id);
    if (c0.empty() && c1.is_full()) return base;
    if (!env_.options.cache_enabled) {
      ++stats_.backend_conditions;
      return ami_condition(base, c0, c1);
    }
    std::string key = model_key(id, c0, c1);
    if (ModelHandle hit = cache_.find_model(key)) {
      ++stats_.cache_model_hits;
      return hit;
    }
    ++stats_.backend_conditions;
    ModelHandle fresh = ami_condition(base, c0, c1);
    cache_.put_model(key, fresh);
    return fresh;
  }

  // Drop condition conjuncts certified independent of the target columns and
  // the remaining condition columns. Only applies to probability and density
  // calls; sampled rows include every column, so simulate keeps its
  // conditions.
  void simplify_conditions(const std::string& id, Assignment& c0, EventSet& c1,
                           const std::vector<int>& target_cols) {
    if (!env_.options.indep_opt_enabled) return;
    const ModelHandle& m = model_of(id);

    // event conditions participate only when they form a pure conjunction,
    // i.e. every rect constrains via a single rect (no disjunction)
    bool c1_conjunctive = c1.rects.size() <= 1;
    std::vector<int> c1_cols = c1_conjunctive ? c1.columns() : std::vector<int>{};

    auto other_cols = [&](int except) {
      std::vector<int> cols = target_cols;
      for (const auto& [c, v] : c0.pins)
        if (c != except) cols.push_back(c);
      for (int c : c1_cols)
        if (c != except) cols.push_back(c);
      std::sort(cols.begin(), cols.end());
      cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
      return cols;
    };

    // point conjuncts
    Assignment kept0;
    for (const auto& [c, v] : c0.pins) {
      if (m->independent({c}, other_cols(c)) == Indep::Independent) continue;
      kept0.pin(c, v);
    }
    c0 = std::move(kept0);

    if (c1_conjunctive && !c1.is_full() && !c1.is_empty()) {
      Rect kept;
      for (const auto& [c, set] : c1.rects[0].sets) {
        if (m->independent({c}, other_cols(c)) == Indep::Independent) continue;
        kept.sets[c] = set;
      }
      c1 = kept.sets.empty() ? EventSet::full() : EventSet::disjoint_union({kept});
    }
  }

  [[noreturn]] static void rethrow_at(const EvalError& e, const Span& span) {
    if (e.span().known()) throw e;
    throw EvalError(e.rule(), e.what(), span);
  }

  double scalar_call(const char* method, const std::string& id, Assignment c0, EventSet c1,
                     const std::string& target_key, const std::vector<int>& target_cols,
                     RngStream rng, double (*invoke)(const RowModel&, const void*, RngStream&),
                     const void* target) {
    simplify_conditions(id, c0, c1, target_cols);
    std::string key;
    if (env_.options.cache_enabled) {
      key = std::string(method) + "|" + model_key(id, c0, c1) + "|" + target_key;
      if (auto hit = cache_.find_scalar(key)) {
        ++stats_.cache_scalar_hits;
        return *hit;
      }
    }
    ModelHandle handle = conditioned(id, c0, c1);
    ++stats_.backend_scalar_calls;
    double value = invoke(*handle, target, rng);
    if (env_.options.cache_enabled) cache_.put_scalar(key, value);
    return value;
  }

  // ---- scalar evaluation -------------------------------------------------------

  Value eval_scalar(const LTermPtr& t, Ctx& ctx) {
    return std::visit(
        overloaded{
            [&](const LConst& c) -> Value { return c.value; },
            [&](const LVar&) -> Value { wrong_kind("a bare row variable"); },
            [&](const LProj& p) -> Value {
              auto* var = std::get_if<LVar>(&p.base->node);
              if (!var) wrong_kind("a projection of a non-variable");
              auto it = ctx.vars.find(var->name);
              if (it == ctx.vars.end())
                throw EvalError("internal", "unbound row variable " + var->name);
              const Row& row = it->second;
              if (p.index < 0 || p.index >= static_cast<int>(row.size()))
                throw EvalError("internal", "projection out of range");
              return row[p.index];
            },
            [&](const LOp& o) -> Value {
              std::vector<Value> args;
              for (const LTermPtr& a : o.args) args.push_back(eval_scalar(a, ctx));
              return op_apply(o.op, args);
            },
            [&](const LLogPdf& l) -> Value {
              Assignment c0 = eval_event0(l.c0, ctx);
              EventSet c1 = eval_event1(l.c1, ctx);
              Assignment target;
              for (const auto& [col, term] : l.target.pins) {
                Value v = eval_scalar(term, ctx);
                if (v.is_null()) continue;
                target.pin(col, v);
              }
              std::vector<int> tcols;
              for (const auto& [c, v] : target.pins) tcols.push_back(c);
              RngStream rng(RngStream::derive(ctx.path, static_cast<std::uint64_t>(t->site)));
              if (target.empty()) {
                // every pin was Null: the unit condition has density one
                return Value::real(0.0);
              }
              try {
                double v = scalar_call(
                    "logpdf", l.model, std::move(c0), std::move(c1), target.key(), tcols, rng,
                    [](const RowModel& m, const void* tgt, RngStream& r) {
                      return m.logpdf(*static_cast<const Assignment*>(tgt), r);
                    },
                    &target);
                return Value::real(v);
              } catch (const EvalError& e) {
                rethrow_at(e, t->span);
              }
            },
            [&](const LProb& p) -> Value {
              Assignment c0 = eval_event0(p.c0, ctx);
              EventSet c1 = eval_event1(p.c1, ctx);
              EventSet target = eval_event1(p.target, ctx);
              std::vector<int> tcols = target.columns();
              RngStream rng(RngStream::derive(ctx.path, static_cast<std::uint64_t>(t->site)));
              if (target.is_full()) return Value::real(1.0);
              try {
                double v = scalar_call(
                    "prob", p.model, std::move(c0), std::move(c1), target.key(), tcols, rng,
                    [](const RowModel& m, const void* tgt, RngStream& r) {
                      double out = m.prob(*static_cast<const EventSet*>(tgt), r);
                      return out < 0.0 ? 0.0 : (out > 1.0 ? 1.0 : out);
                    },
                    &target);
                return Value::real(v);
              } catch (const EvalError& e) {
                rethrow_at(e, t->span);
              }
            },
            [&](const LMutualInfo& mi) -> Value {
              try {
                return Value::real(eval_mutual_info(mi, t->site, ctx));
              } catch (const EvalError& e) {
                rethrow_at(e, t->span);
              }
            },
            [&](const auto&) -> Value { wrong_kind("a bag"); },
        },
        t->node);
  }

  // Monte Carlo estimate of the conditional mutual information: draws
  // (a_i, b_i) from the conditioned model and averages
  // log p(a_i, b_i) - log p(a_i) - log p(b_i) over marginal densities of the
  // same conditioned model.
  double eval_mutual_info(const LMutualInfo& mi, int site, Ctx& ctx) {
    Assignment c0 = eval_event0(mi.c0, ctx);
    EventSet c1 = eval_event1(mi.c1, ctx);
    ModelHandle cond = conditioned(mi.model, c0, c1);
    if (is_null_model(*cond))
      throw EvalError("null-measure", "conditioning on null-measure event");
    int n = std::max(1, env_.options.mi_samples);
    RngStream call_stream(RngStream::derive(ctx.path, static_cast<std::uint64_t>(site)));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      RngStream draw = call_stream.split(static_cast<std::uint64_t>(i));
      Row row = cond->simulate(draw);
      Assignment both, left, right;
      for (int c : mi.cols_a) {
        if (row[c].is_null())
          throw EvalError("null-measure", "model produced a null sample");
        both.pin(c, row[c]);
        left.pin(c, row[c]);
      }
      for (int c : mi.cols_b) {
        if (row[c].is_null())
          throw EvalError("null-measure", "model produced a null sample");
        both.pin(c, row[c]);
        right.pin(c, row[c]);
      }
      RngStream r1 = draw.split(1), r2 = draw.split(2), r3 = draw.split(3);
      ++stats_.backend_scalar_calls;
      double joint = cond->logpdf(both, r1);
      ++stats_.backend_scalar_calls;
      double la = cond->logpdf(left, r2);
      ++stats_.backend_scalar_calls;
      double lb = cond->logpdf(right, r3);
      total += joint - la - lb;
    }
    return total / n;
  }

  // ---- bag evaluation ----------------------------------------------------------

  std::uint64_t natural_count(const LTermPtr& t, Ctx& ctx, const char* what) {
    Value v = eval_scalar(t, ctx);
    if (v.is_null()) throw EvalError("limit", std::string(what) + " evaluated to NULL");
    if (!v.is_int() || v.as_int() < 0)
      throw EvalError("limit", std::string(what) + " must be a non-negative integer");
    return static_cast<std::uint64_t>(v.as_int());
  }

  Bag eval_bag(const LTermPtr& t, Ctx& ctx) {
    return std::visit(
        overloaded{
            [&](const LTableRef& r) -> Bag {
              auto let = ctx.lets.find(r.id);
              if (let != ctx.lets.end()) return let->second;
              auto it = env_.tables.find(r.id);
              if (it == env_.tables.end())
                throw EvalError("unbound-identifier", "no table named '" + r.id + "' is loaded");
              return Bag{it->second.rows};
            },
            [&](const LMap& m) -> Bag {
              Bag in = eval_bag(m.bag, ctx);
              auto* tuple = std::get_if<LTuple>(&m.body->node);
              if (!tuple) wrong_kind("a map body that is not a tuple");
              Bag out;
              out.rows.reserve(in.rows.size());
              std::uint64_t base_path = ctx.path;
              for (std::size_t i = 0; i < in.rows.size(); ++i) {
                Ctx inner = ctx;
                inner.vars[m.var] = in.rows[i];
                inner.path = RngStream::derive(
                    RngStream::derive(base_path, static_cast<std::uint64_t>(t->site)),
                    static_cast<std::uint64_t>(i));
                Row row;
                row.reserve(tuple->items.size());
                for (const LTermPtr& item : tuple->items)
                  row.push_back(eval_scalar(item, inner));
                out.rows.push_back(std::move(row));
              }
              return out;
            },
            [&](const LFilter& f) -> Bag {
              Bag in = eval_bag(f.bag, ctx);
              Bag out;
              std::uint64_t base_path = ctx.path;
              for (std::size_t i = 0; i < in.rows.size(); ++i) {
                Ctx inner = ctx;
                inner.vars[f.var] = in.rows[i];
                inner.path = RngStream::derive(
                    RngStream::derive(base_path, static_cast<std::uint64_t>(t->site)),
                    static_cast<std::uint64_t>(i));
                Value keep = eval_scalar(f.pred, inner);
                // WHERE NULL acts as WHERE false
                if (!keep.is_null() && keep.as_bool()) out.rows.push_back(in.rows[i]);
              }
              return out;
            },
            [&](const LMapReduce& m) -> Bag {
              Bag in = eval_bag(m.bag, ctx);
              Bag out;
              std::uint64_t base_path = ctx.path;
              for (std::size_t i = 0; i < in.rows.size(); ++i) {
                Ctx inner = ctx;
                inner.vars[m.var] = in.rows[i];
                inner.path = RngStream::derive(
                    RngStream::derive(base_path, static_cast<std::uint64_t>(t->site)),
                    static_cast<std::uint64_t>(i));
                Bag piece = eval_bag(m.body, inner);
                out.rows.insert(out.rows.end(), piece.rows.begin(), piece.rows.end());
              }
              return out;
            },
            [&](const LReplicate& r) -> Bag {
              std::uint64_t n = natural_count(r.count, ctx, "LIMIT");
              Bag out;
              std::uint64_t base_path = ctx.path;
              for (std::uint64_t i = 0; i < n; ++i) {
                Ctx inner = ctx;
                inner.path = RngStream::derive(
                    RngStream::derive(base_path, static_cast<std::uint64_t>(t->site)), i);
                Bag piece = eval_bag(r.bag, inner);
                out.rows.insert(out.rows.end(), piece.rows.begin(), piece.rows.end());
              }
              return out;
            },
            [&](const LJoin& j) -> Bag {
              Bag l = eval_bag(j.left, ctx);
              Bag r = eval_bag(j.right, ctx);
              Bag out;
              out.rows.reserve(l.rows.size() * r.rows.size());
              for (const Row& a : l.rows)
                for (const Row& b : r.rows) {
                  Row row = a;
                  row.insert(row.end(), b.begin(), b.end());
                  out.rows.push_back(std::move(row));
                }
              return out;
            },
            [&](const LSingleton& s) -> Bag {
              auto* var = std::get_if<LVar>(&s.row->node);
              if (var) {
                auto it = ctx.vars.find(var->name);
                if (it == ctx.vars.end())
                  throw EvalError("internal", "unbound row variable " + var->name);
                return Bag{{it->second}};
              }
              auto* tuple = std::get_if<LTuple>(&s.row->node);
              if (!tuple) wrong_kind("a singleton of a non-row");
              Row row;
              for (const LTermPtr& item : tuple->items) row.push_back(eval_scalar(item, ctx));
              return Bag{{std::move(row)}};
            },
            [&](const LSimulate& s) -> Bag {
              try {
                Assignment c0 = eval_event0(s.c0, ctx);
                EventSet c1 = eval_event1(s.c1, ctx);
                ModelHandle handle = conditioned(s.model, c0, c1);
                RngStream rng(RngStream::derive(ctx.path, static_cast<std::uint64_t>(t->site)));
                return Bag{{handle->simulate(rng)}};
              } catch (const EvalError& e) {
                rethrow_at(e, t->span);
              }
            },
            [&](const LUnion& u) -> Bag {
              Bag l = eval_bag(u.left, ctx);
              Bag r = eval_bag(u.right, ctx);
              l.rows.insert(l.rows.end(), r.rows.begin(), r.rows.end());
              return l;
            },
            [&](const LDedup& d) -> Bag {
              Bag in = eval_bag(d.bag, ctx);
              std::sort(in.rows.begin(), in.rows.end(), row_less);
              in.rows.erase(std::unique(in.rows.begin(), in.rows.end()), in.rows.end());
              return in;
            },
            [&](const LDuplicate& d) -> Bag {
              std::uint64_t n = natural_count(d.count, ctx, "DUPLICATE count");
              Bag in = eval_bag(d.bag, ctx);
              Bag out;
              out.rows.reserve(in.rows.size() * n);
              for (std::uint64_t i = 0; i < n; ++i)
                out.rows.insert(out.rows.end(), in.rows.begin(), in.rows.end());
              return out;
            },
            [&](const LGroupBy& g) -> Bag { return eval_group_by(g, t->site, ctx); },
            [&](const LLet& l) -> Bag {
              Bag bound = eval_bag(l.bound, ctx);
              Ctx inner = ctx;
              inner.lets[l.name] = std::move(bound);
              return eval_bag(l.body, inner);
            },
            [&](const auto&) -> Bag { wrong_kind("a scalar"); },
        },
        t->node);
  }

  // One output row per distinct key tuple, key columns before aggregates;
  // groups ordered canonically so evaluation is deterministic.
  Bag eval_group_by(const LGroupBy& g, int site, Ctx& ctx) {
    Bag in = eval_bag(g.bag, ctx);
    std::map<Row, std::vector<Row>, bool (*)(const Row&, const Row&)> groups(row_less);
    std::uint64_t base_path = ctx.path;
    std::vector<std::vector<Value>> agg_inputs_per_row(in.rows.size());
    for (std::size_t i = 0; i < in.rows.size(); ++i) {
      Ctx inner = ctx;
      inner.vars[g.var] = in.rows[i];
      inner.path = RngStream::derive(RngStream::derive(base_path, static_cast<std::uint64_t>(site)),
                                     static_cast<std::uint64_t>(i));
      Row key;
      key.reserve(g.keys.size());
      for (const LTermPtr& k : g.keys) key.push_back(eval_scalar(k, inner));
      Row agg_vals;
      agg_vals.reserve(g.aggs.size());
      for (const auto& [kind, arg] : g.aggs) agg_vals.push_back(eval_scalar(arg, inner));
      groups[key].push_back(std::move(agg_vals));
    }
    Bag out;
    for (const auto& [key, rows] : groups) {
      Row result = key;
      for (std::size_t a = 0; a < g.aggs.size(); ++a) {
        std::vector<Value> column;
        column.reserve(rows.size());
        for (const Row& r : rows) column.push_back(r[a]);
        result.push_back(aggregate(g.aggs[a].first, column));
      }
      out.rows.push_back(std::move(result));
    }
    return out;
  }

  // Aggregates skip Null inputs; an empty or all-Null group yields Null
  // (Count and CountDistinct yield 0).
  static Value aggregate(AggKind kind, const std::vector<Value>& values) {
    std::vector<Value> present;
    for (const Value& v : values)
      if (!v.is_null()) present.push_back(v);
    switch (kind) {
      case AggKind::Count:
        return Value::integer(static_cast<std::int64_t>(present.size()));
      case AggKind::CountDistinct: {
        std::vector<Value> sorted = present;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        return Value::integer(static_cast<std::int64_t>(sorted.size()));
      }
      case AggKind::Sum: {
        if (present.empty()) return Value::null();
        bool ints = true;
        for (const Value& v : present) ints &= v.is_int();
        if (ints) {
          std::int64_t s = 0;
          for (const Value& v : present) s += v.as_int();
          return Value::integer(s);
        }
        double s = 0;
        for (const Value& v : present) s += v.as_number();
        return Value::real(s);
      }
      case AggKind::Avg: {
        if (present.empty()) return Value::null();
        double s = 0;
        for (const Value& v : present) s += v.as_number();
        return Value::real(s / static_cast<double>(present.size()));
      }
      case AggKind::Max:
      case AggKind::Min: {
        if (present.empty()) return Value::null();
        Value best = present[0];
        for (const Value& v : present) {
          bool greater;
          if (v.is_number() && best.is_number())
            greater = v.as_number() > best.as_number();
          else
            greater = best < v;
          if ((kind == AggKind::Max) == greater && !(v == best)) best = v;
        }
        return best;
      }
      case AggKind::Concat: {
        std::string s;
        for (const Value& v : present) s += v.as_string();
        return Value::text(s);
      }
    }
    return Value::null();
  }
};

inline EvalResult evaluate(const LoweredProgram& p, const EvalEnv& env,
                           Diagnostics* diags = nullptr, EvalStats* stats = nullptr) {
  Evaluator ev(env, diags);
  EvalResult out = ev.run(p);
  if (stats) *stats = ev.stats();
  return out;
}

}  // namespace gensql
