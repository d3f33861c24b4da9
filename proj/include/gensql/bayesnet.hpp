#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "gensql/ami.hpp"
#include "gensql/numeric.hpp"

namespace gensql {

// Conditional distribution of one column given its parents. Discrete parents
// select a row; continuous parents enter linearly (linear-Gaussian children
// only).
struct BnCpdRow {
  std::vector<Value> given;     // discrete-parent values, in parent order
  std::vector<double> probs;    // tabular: aligned with the child's support
  double intercept = 0.0;       // linear-gaussian
  std::vector<double> coeffs;   // aligned with the continuous parents
  double stddev = 1.0;
};

struct BnNode {
  int col = 0;
  std::vector<int> parents;        // schema column indices
  bool tabular = true;             // false: linear-gaussian
  std::vector<Value> support;      // tabular child values
  std::vector<BnCpdRow> rows;

  std::vector<int> discrete_parents;    // filled by bn_validate
  std::vector<int> continuous_parents;  // positions within `parents`
};

struct BnSpec {
  Schema schema;
  std::vector<BnNode> nodes;  // topological order
};

inline std::vector<Value> label_universe(const BaseType& t) {
  if (t.kind == TypeKind::Bool) return {Value::boolean(false), Value::boolean(true)};
  if (t.kind == TypeKind::Categorical) {
    std::vector<Value> out;
    for (const std::string& l : t.labels) out.push_back(Value::text(l));
    return out;
  }
  return {};
}

inline void bn_validate(BnSpec& spec) {
  const Schema& schema = spec.schema;
  if (spec.nodes.size() != schema.columns.size())
    throw Error(Stage::Io, "bn", "node list does not cover every column exactly once");
  std::vector<bool> defined(schema.columns.size(), false);
  for (std::size_t ni = 0; ni < spec.nodes.size(); ++ni) {
    BnNode& node = spec.nodes[ni];
    std::string where = "node '" + schema.columns[node.col].name + "'";
    if (node.col < 0 || node.col >= static_cast<int>(schema.columns.size()))
      throw Error(Stage::Io, "bn", where + ": column index out of range");
    if (defined[node.col]) throw Error(Stage::Io, "bn", where + ": column defined twice");

    node.discrete_parents.clear();
    node.continuous_parents.clear();
    std::size_t combos = 1;
    for (std::size_t pi = 0; pi < node.parents.size(); ++pi) {
      int p = node.parents[pi];
      if (p < 0 || p >= static_cast<int>(schema.columns.size()) || !defined[p])
        throw Error(Stage::Io, "bn", where + ": parents must be defined earlier (acyclic order)");
      if (schema.columns[p].type.is_discrete()) {
        node.discrete_parents.push_back(static_cast<int>(pi));
        combos *= label_universe(schema.columns[p].type).size();
      } else {
        node.continuous_parents.push_back(static_cast<int>(pi));
      }
    }

    const BaseType& child = schema.columns[node.col].type;
    if (node.tabular) {
      if (!child.is_discrete())
        throw Error(Stage::Io, "bn", where + ": tabular node requires a discrete column");
      if (!node.continuous_parents.empty())
        throw Error(Stage::Io, "bn", where + ": tabular node cannot have continuous parents");
      std::vector<Value> universe = label_universe(child);
      if (node.support.empty()) node.support = universe;
      if (node.rows.size() != combos)
        throw Error(Stage::Io, "bn",
                    where + ": expected " + std::to_string(combos) +
                        " rows covering every parent combination, got " +
                        std::to_string(node.rows.size()));
      for (std::size_t ri = 0; ri < node.rows.size(); ++ri) {
        const BnCpdRow& row = node.rows[ri];
        if (row.given.size() != node.discrete_parents.size())
          throw Error(Stage::Io, "bn",
                      where + ": row " + std::to_string(ri) + " given-arity mismatch");
        if (row.probs.size() != node.support.size())
          throw Error(Stage::Io, "bn",
                      where + ": row " + std::to_string(ri) + " probs/support mismatch");
        double total = 0.0;
        for (double p : row.probs) {
          if (p < 0.0)
            throw Error(Stage::Io, "bn", where + ": negative probability in row " +
                                             std::to_string(ri));
          total += p;
        }
        if (std::fabs(total - 1.0) > 1e-9)
          throw Error(Stage::Io, "bn", where + ": row " + std::to_string(ri) + " sums to " +
                                           BaseType::format_double(total));
      }
    } else {
      if (!child.is_continuous())
        throw Error(Stage::Io, "bn",
                    where + ": linear-gaussian node requires a continuous column");
      if (node.rows.size() != combos)
        throw Error(Stage::Io, "bn",
                    where + ": expected " + std::to_string(combos) +
                        " rows covering every discrete-parent combination");
      for (const BnCpdRow& row : node.rows) {
        if (row.coeffs.size() != node.continuous_parents.size())
          throw Error(Stage::Io, "bn", where + ": coefficient arity mismatch");
        if (!(row.stddev > 0.0))
          throw Error(Stage::Io, "bn", where + ": stddev must be positive");
      }
    }
    defined[node.col] = true;
  }
}

namespace bn_detail {

inline const BnCpdRow& select_row(const BnNode& node, const Row& row) {
  for (const BnCpdRow& r : node.rows) {
    bool match = true;
    for (std::size_t i = 0; i < node.discrete_parents.size(); ++i) {
      int parent_col = node.parents[node.discrete_parents[i]];
      if (!(row[parent_col] == r.given[i])) {
        match = false;
        break;
      }
    }
    if (match) return r;
  }
  throw EvalError("bn", "no CPD row matches the parent assignment");
}

inline double lin_gauss_mean(const BnNode& node, const BnCpdRow& r, const Row& row) {
  double mean = r.intercept;
  for (std::size_t i = 0; i < node.continuous_parents.size(); ++i) {
    int parent_col = node.parents[node.continuous_parents[i]];
    mean += r.coeffs[i] * row[parent_col].as_number();
  }
  return mean;
}

inline double log_cpd(const BnNode& node, const Row& row, const Value& v) {
  const BnCpdRow& r = select_row(node, row);
  if (node.tabular) {
    for (std::size_t i = 0; i < node.support.size(); ++i)
      if (node.support[i] == v) return r.probs[i] > 0.0 ? std::log(r.probs[i]) : kNegInf;
    return kNegInf;
  }
  if (!v.is_number()) return kNegInf;
  return normal_log_pdf(v.as_number(), lin_gauss_mean(node, r, row), r.stddev);
}

inline Value sample_cpd(const BnNode& node, const Row& row, RngStream& rng) {
  const BnCpdRow& r = select_row(node, row);
  if (node.tabular) return node.support[rng.categorical(r.probs)];
  return Value::real(lin_gauss_mean(node, r, row) + r.stddev * rng.gaussian());
}

}  // namespace bn_detail

// One ancestral pass: sample unpinned nodes in topological order, score the
// pinned ones; rows that violate the event get log-weight -inf.
struct WeightedRow {
  Row row;
  double logw = 0.0;
};

inline WeightedRow bn_ancestral(const BnSpec& spec, const Assignment& c0,
                                const std::vector<EventSet>& events, RngStream& rng) {
  WeightedRow out;
  out.row.assign(spec.schema.columns.size(), Value::null());
  for (const BnNode& node : spec.nodes) {
    const Value* pin = c0.find(node.col);
    if (pin) {
      out.row[node.col] = *pin;
      out.logw += bn_detail::log_cpd(node, out.row, *pin);
    } else {
      out.row[node.col] = bn_detail::sample_cpd(node, out.row, rng);
    }
  }
  for (const EventSet& e : events)
    if (!e.contains(out.row)) {
      out.logw = kNegInf;
      break;
    }
  return out;
}

// ---------------------------------------------------------------------------
// RowModel adapter: self-normalized importance sampling over ancestral draws
// ---------------------------------------------------------------------------

class BnModel final : public RowModel {
 public:
  BnModel(std::shared_ptr<const BnSpec> spec, int particles, Assignment c0 = {},
          std::vector<EventSet> events = {})
      : RowModel(spec->schema),
        spec_(std::move(spec)),
        particles_(particles < 1 ? 1 : particles),
        c0_(std::move(c0)),
        events_(std::move(events)) {}

  int particles() const { return particles_; }

  ModelHandle with_particles(int n) const override {
    if (n == particles_) return nullptr;
    return std::make_shared<BnModel>(spec_, n, c0_, events_);
  }

  const BnSpec& spec() const { return *spec_; }
  std::shared_ptr<const BnSpec> spec_ptr() const { return spec_; }
  const Assignment& conditioned_on() const { return c0_; }
  const std::vector<EventSet>& event_conditions() const { return events_; }

  ModelHandle condition(const Assignment& c0, const EventSet& c1) const override {
    Assignment merged = c0_;
    try {
      merged = c0_.merged(c0);
    } catch (const EvalError&) {
      throw EvalError("null-conditioning", "column pinned to two different values");
    }
    std::vector<EventSet> events = events_;
    if (!c1.is_full()) events.push_back(c1);
    return std::make_shared<BnModel>(spec_, particles_, std::move(merged), std::move(events));
  }

  Row simulate(RngStream& rng) const override {
    std::vector<WeightedRow> particles = draw_particles(c0_, rng);
    double best = kNegInf;
    for (const WeightedRow& p : particles) best = std::max(best, p.logw);
    if (best == kNegInf) return Row(schema().columns.size(), Value::null());
    std::vector<double> weights;
    weights.reserve(particles.size());
    for (const WeightedRow& p : particles) weights.push_back(std::exp(p.logw - best));
    return particles[rng.categorical(weights)].row;
  }

  double logpdf(const Assignment& target, RngStream& rng) const override {
    Assignment joint;
    try {
      joint = c0_.merged(target);
    } catch (const EvalError&) {
      return kNegInf;  // contradicts a pinned value
    }
    double num = log_marginal(joint, rng);
    if (c0_.empty() && events_.empty()) return num;
    double den = log_marginal(c0_, rng);
    if (den == kNegInf) return kNegInf;
    return num - den;
  }

  double prob(const EventSet& target, RngStream& rng) const override {
    std::vector<WeightedRow> particles = draw_particles(c0_, rng);
    std::vector<double> num, den;
    num.reserve(particles.size());
    den.reserve(particles.size());
    for (const WeightedRow& p : particles) {
      den.push_back(p.logw);
      num.push_back(p.logw == kNegInf || !target.contains(p.row) ? kNegInf : p.logw);
    }
    double d = log_mean_exp(den);
    if (d == kNegInf) return 0.0;
    double value = std::exp(log_mean_exp(num) - d);
    return value > 1.0 ? 1.0 : value;
  }

 private:
  std::shared_ptr<const BnSpec> spec_;
  int particles_;
  Assignment c0_;
  std::vector<EventSet> events_;

  std::vector<WeightedRow> draw_particles(const Assignment& pins, RngStream& rng) const {
    std::vector<WeightedRow> out;
    out.reserve(particles_);
    for (int i = 0; i < particles_; ++i) out.push_back(bn_ancestral(*spec_, pins, events_, rng));
    return out;
  }

  // logmeanexp of the importance weights: estimates the log marginal density
  // of the pinned values within the event region.
  double log_marginal(const Assignment& pins, RngStream& rng) const {
    std::vector<double> ws;
    ws.reserve(particles_);
    for (int i = 0; i < particles_; ++i)
      ws.push_back(bn_ancestral(*spec_, pins, events_, rng).logw);
    return log_mean_exp(ws);
  }
};

}  // namespace gensql
