#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "gensql/ami.hpp"
#include "gensql/error.hpp"
#include "gensql/events.hpp"
#include "gensql/numeric.hpp"
#include "gensql/rng.hpp"

namespace gensql {

// ---------------------------------------------------------------------------
// Leaf distributions
// ---------------------------------------------------------------------------

// A primitive one-column distribution. Continuous leaves carry an optional
// truncation set (conditioning on events truncates them further); columns
// pinned by point conditioning become point masses.
struct LeafDist {
  enum class Kind { Categorical, Gaussian, Uniform, PointMass };
  Kind kind = Kind::Gaussian;

  std::vector<Value> support;  // Categorical
  std::vector<double> probs;

  double mean = 0.0, stddev = 1.0;  // Gaussian
  double lo = 0.0, hi = 1.0;        // Uniform

  Value point;  // PointMass

  std::optional<ColSet> trunc;  // Gaussian/Uniform only

  static LeafDist categorical(std::vector<Value> support, std::vector<double> probs) {
    LeafDist d;
    d.kind = Kind::Categorical;
    d.support = std::move(support);
    d.probs = std::move(probs);
    return d;
  }
  static LeafDist gaussian(double mean, double stddev) {
    LeafDist d;
    d.kind = Kind::Gaussian;
    d.mean = mean;
    d.stddev = stddev;
    return d;
  }
  static LeafDist uniform(double lo, double hi) {
    LeafDist d;
    d.kind = Kind::Uniform;
    d.lo = lo;
    d.hi = hi;
    return d;
  }
  static LeafDist point_mass(Value v) {
    LeafDist d;
    d.kind = Kind::PointMass;
    d.point = std::move(v);
    return d;
  }

  // Base (untruncated) measure of one interval.
  double base_interval_mass(const Interval& iv) const {
    if (kind == Kind::Gaussian)
      return normal_cdf(iv.hi, mean, stddev) - normal_cdf(iv.lo, mean, stddev);
    // Uniform
    double a = std::max(lo, iv.lo), b = std::min(hi, iv.hi);
    return b > a ? (b - a) / (hi - lo) : 0.0;
  }

  double base_set_mass(const ColSet& s) const {
    double m = 0.0;
    for (const Interval& iv : s.intervals) m += base_interval_mass(iv);
    return m;
  }

  double trunc_mass() const { return trunc ? base_set_mass(*trunc) : 1.0; }

  // Probability mass of `s` under this (possibly truncated) distribution.
  double mass(const ColSet& s) const {
    switch (kind) {
      case Kind::Categorical: {
        double m = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i)
          if (s.contains(support[i])) m += probs[i];
        return m;
      }
      case Kind::PointMass:
        return s.contains(point) ? 1.0 : 0.0;
      case Kind::Gaussian:
      case Kind::Uniform: {
        ColSet eff = trunc ? ColSet::intersect(s, *trunc) : s;
        double denom = trunc_mass();
        return denom > 0.0 ? base_set_mass(eff) / denom : 0.0;
      }
    }
    return 0.0;
  }

  // Log density (discrete: log mass) at a value.
  double log_density(const Value& v) const {
    switch (kind) {
      case Kind::Categorical: {
        for (std::size_t i = 0; i < support.size(); ++i)
          if (support[i] == v) return probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
        return kNegInf;
      }
      case Kind::PointMass:
        return point == v ? 0.0 : kNegInf;
      case Kind::Gaussian:
      case Kind::Uniform: {
        if (!v.is_number()) return kNegInf;
        double x = v.as_number();
        if (trunc && !trunc->contains(Value::real(x))) return kNegInf;
        double base = kind == Kind::Gaussian
                          ? normal_log_pdf(x, mean, stddev)
                          : (x >= lo && x <= hi ? -std::log(hi - lo) : kNegInf);
        double denom = trunc_mass();
        return denom > 0.0 ? base - std::log(denom) : kNegInf;
      }
    }
    return kNegInf;
  }

  // Restrict to `s`; returns the relative mass kept.
  std::pair<LeafDist, double> truncate(const ColSet& s) const {
    switch (kind) {
      case Kind::Categorical: {
        LeafDist d = *this;
        double kept = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i) {
          if (!s.contains(support[i])) d.probs[i] = 0.0;
          kept += d.probs[i];
        }
        if (kept > 0.0)
          for (double& p : d.probs) p /= kept;
        return {std::move(d), kept};
      }
      case Kind::PointMass:
        return {*this, s.contains(point) ? 1.0 : 0.0};
      case Kind::Gaussian:
      case Kind::Uniform: {
        LeafDist d = *this;
        d.trunc = trunc ? ColSet::intersect(*trunc, s) : s;
        double before = trunc_mass();
        double after = base_set_mass(*d.trunc);
        return {std::move(d), before > 0.0 ? after / before : 0.0};
      }
    }
    return {*this, 0.0};
  }

  Value sample(RngStream& rng) const {
    switch (kind) {
      case Kind::Categorical:
        return support[rng.categorical(probs)];
      case Kind::PointMass:
        return point;
      case Kind::Gaussian:
      case Kind::Uniform: {
        if (!trunc) {
          if (kind == Kind::Gaussian) return Value::real(mean + stddev * rng.gaussian());
          return Value::real(lo + (hi - lo) * rng.uniform());
        }
        // pick an interval by mass, then invert the conditional CDF inside it
        std::vector<double> ws;
        ws.reserve(trunc->intervals.size());
        for (const Interval& iv : trunc->intervals) ws.push_back(base_interval_mass(iv));
        const Interval& iv = trunc->intervals[rng.categorical(ws)];
        double u = rng.uniform();
        if (kind == Kind::Gaussian) {
          double a = normal_cdf(iv.lo, mean, stddev), b = normal_cdf(iv.hi, mean, stddev);
          double q = a + u * (b - a);
          return Value::real(mean + stddev * normal_quantile(q));
        }
        double a = std::max(lo, iv.lo), b = std::min(hi, iv.hi);
        return Value::real(a + u * (b - a));
      }
    }
    return Value::null();
  }
};

// ---------------------------------------------------------------------------
// Sum-product expressions
// ---------------------------------------------------------------------------

struct SpeNode;
using SpePtr = std::shared_ptr<const SpeNode>;

struct SpeNode {
  struct Leaf {
    int col;
    LeafDist dist;
  };
  struct Product {
    std::vector<SpePtr> children;
  };
  struct Sum {
    std::vector<double> weights;  // positive, sums to 1
    std::vector<SpePtr> children;
  };
  std::variant<Leaf, Product, Sum> node;
};

inline SpePtr spe_leaf(int col, LeafDist d) {
  return std::make_shared<const SpeNode>(SpeNode{SpeNode::Leaf{col, std::move(d)}});
}
inline SpePtr spe_product(std::vector<SpePtr> children) {
  return std::make_shared<const SpeNode>(SpeNode{SpeNode::Product{std::move(children)}});
}
inline SpePtr spe_sum(std::vector<double> weights, std::vector<SpePtr> children) {
  return std::make_shared<const SpeNode>(
      SpeNode{SpeNode::Sum{std::move(weights), std::move(children)}});
}

inline void spe_columns_into(const SpePtr& s, std::set<int>& out) {
  std::visit(overloaded{
                 [&](const SpeNode::Leaf& l) { out.insert(l.col); },
                 [&](const SpeNode::Product& p) {
                   for (const SpePtr& c : p.children) spe_columns_into(c, out);
                 },
                 [&](const SpeNode::Sum& m) {
                   if (!m.children.empty()) spe_columns_into(m.children[0], out);
                 },
             },
             s->node);
}

inline std::set<int> spe_columns(const SpePtr& s) {
  std::set<int> out;
  spe_columns_into(s, out);
  return out;
}

// Structural invariants: positive normalized weights, identical column sets
// across mixture components, disjoint column sets across product factors.
inline void spe_validate(const SpePtr& s, const std::string& path = "root") {
  std::visit(
      overloaded{
          [&](const SpeNode::Leaf& l) {
            const LeafDist& d = l.dist;
            if (d.kind == LeafDist::Kind::Categorical) {
              if (d.support.empty() || d.support.size() != d.probs.size())
                throw Error(Stage::Io, "spe", path + ": categorical support/probs mismatch");
              double total = 0.0;
              for (double p : d.probs) {
                if (p < 0.0) throw Error(Stage::Io, "spe", path + ": negative probability");
                total += p;
              }
              if (std::fabs(total - 1.0) > 1e-9)
                throw Error(Stage::Io, "spe", path + ": probabilities sum to " +
                                                  BaseType::format_double(total));
            } else if (d.kind == LeafDist::Kind::Gaussian) {
              if (!(d.stddev > 0.0))
                throw Error(Stage::Io, "spe", path + ": gaussian stddev must be positive");
            } else if (d.kind == LeafDist::Kind::Uniform) {
              if (!(d.lo < d.hi))
                throw Error(Stage::Io, "spe", path + ": uniform requires lo < hi");
            }
          },
          [&](const SpeNode::Product& p) {
            std::set<int> seen;
            for (std::size_t i = 0; i < p.children.size(); ++i) {
              std::set<int> child = spe_columns(p.children[i]);
              for (int c : child)
                if (!seen.insert(c).second)
                  throw Error(Stage::Io, "spe",
                              path + ": product factors share column " + std::to_string(c));
              spe_validate(p.children[i], path + ".product[" + std::to_string(i) + "]");
            }
          },
          [&](const SpeNode::Sum& m) {
            if (m.children.empty() || m.children.size() != m.weights.size())
              throw Error(Stage::Io, "spe", path + ": sum weights/children mismatch");
            double total = 0.0;
            for (double w : m.weights) {
              if (w <= 0.0) throw Error(Stage::Io, "spe", path + ": weights must be positive");
              total += w;
            }
            if (std::fabs(total - 1.0) > 1e-9)
              throw Error(Stage::Io, "spe",
                          path + ": weights sum to " + BaseType::format_double(total));
            std::set<int> first = spe_columns(m.children[0]);
            for (std::size_t i = 0; i < m.children.size(); ++i) {
              if (spe_columns(m.children[i]) != first)
                throw Error(Stage::Io, "spe",
                            path + ": mixture components cover different columns");
              spe_validate(m.children[i], path + ".sum[" + std::to_string(i) + "]");
            }
          },
      },
      s->node);
}

// Marginal log density at the pinned columns (implicit marginalization:
// unpinned leaves integrate to one).
inline double spe_log_density(const SpePtr& s, const Assignment& pins) {
  return std::visit(
      overloaded{
          [&](const SpeNode::Leaf& l) {
            const Value* v = pins.find(l.col);
            return v ? l.dist.log_density(*v) : 0.0;
          },
          [&](const SpeNode::Product& p) {
            double total = 0.0;
            for (const SpePtr& c : p.children) total += spe_log_density(c, pins);
            return total;
          },
          [&](const SpeNode::Sum& m) {
            std::vector<double> terms;
            terms.reserve(m.children.size());
            for (std::size_t i = 0; i < m.children.size(); ++i)
              terms.push_back(std::log(m.weights[i]) + spe_log_density(m.children[i], pins));
            return log_sum_exp(terms);
          },
      },
      s->node);
}

inline double spe_rect_log_mass(const SpePtr& s, const Rect& rect) {
  return std::visit(
      overloaded{
          [&](const SpeNode::Leaf& l) {
            auto it = rect.sets.find(l.col);
            if (it == rect.sets.end()) return 0.0;
            double m = l.dist.mass(it->second);
            return m > 0.0 ? std::log(m) : kNegInf;
          },
          [&](const SpeNode::Product& p) {
            double total = 0.0;
            for (const SpePtr& c : p.children) total += spe_rect_log_mass(c, rect);
            return total;
          },
          [&](const SpeNode::Sum& m) {
            std::vector<double> terms;
            terms.reserve(m.children.size());
            for (std::size_t i = 0; i < m.children.size(); ++i)
              terms.push_back(std::log(m.weights[i]) + spe_rect_log_mass(m.children[i], rect));
            return log_sum_exp(terms);
          },
      },
      s->node);
}

inline double spe_event_prob(const SpePtr& s, const EventSet& e) {
  double total = 0.0;
  for (const Rect& r : e.rects) total += std::exp(spe_rect_log_mass(s, r));
  return total;
}

// Point conditioning: pinned leaves become point masses, mixture weights are
// reweighted by component likelihoods. Returns the conditioned expression and
// the marginal log likelihood of the pins.
inline std::pair<SpePtr, double> spe_cond0(const SpePtr& s, const Assignment& pins) {
  return std::visit(
      overloaded{
          [&](const SpeNode::Leaf& l) -> std::pair<SpePtr, double> {
            const Value* v = pins.find(l.col);
            if (!v) return {s, 0.0};
            double ll = l.dist.log_density(*v);
            return {spe_leaf(l.col, LeafDist::point_mass(*v)), ll};
          },
          [&](const SpeNode::Product& p) -> std::pair<SpePtr, double> {
            std::vector<SpePtr> children;
            double ll = 0.0;
            for (const SpePtr& c : p.children) {
              auto [cc, cll] = spe_cond0(c, pins);
              children.push_back(cc);
              ll += cll;
            }
            return {spe_product(std::move(children)), ll};
          },
          [&](const SpeNode::Sum& m) -> std::pair<SpePtr, double> {
            std::vector<SpePtr> children;
            std::vector<double> logw;
            for (std::size_t i = 0; i < m.children.size(); ++i) {
              auto [cc, cll] = spe_cond0(m.children[i], pins);
              children.push_back(cc);
              logw.push_back(std::log(m.weights[i]) + cll);
            }
            double total = log_sum_exp(logw);
            if (total == kNegInf) return {s, kNegInf};
            std::vector<double> weights;
            std::vector<SpePtr> kept;
            for (std::size_t i = 0; i < children.size(); ++i) {
              double w = std::exp(logw[i] - total);
              if (w > 0.0) {
                weights.push_back(w);
                kept.push_back(children[i]);
              }
            }
            return {spe_sum(std::move(weights), std::move(kept)), total};
          },
      },
      s->node);
}

// Conditioning on one rectangle: leaves are truncated to their column's set,
// mixtures reweighted by component event mass.
inline std::pair<SpePtr, double> spe_cond_rect(const SpePtr& s, const Rect& rect) {
  return std::visit(
      overloaded{
          [&](const SpeNode::Leaf& l) -> std::pair<SpePtr, double> {
            auto it = rect.sets.find(l.col);
            if (it == rect.sets.end()) return {s, 0.0};
            auto [d, kept] = l.dist.truncate(it->second);
            if (kept <= 0.0) return {s, kNegInf};
            return {spe_leaf(l.col, std::move(d)), std::log(kept)};
          },
          [&](const SpeNode::Product& p) -> std::pair<SpePtr, double> {
            std::vector<SpePtr> children;
            double lm = 0.0;
            for (const SpePtr& c : p.children) {
              auto [cc, clm] = spe_cond_rect(c, rect);
              children.push_back(cc);
              lm += clm;
            }
            return {spe_product(std::move(children)), lm};
          },
          [&](const SpeNode::Sum& m) -> std::pair<SpePtr, double> {
            std::vector<SpePtr> children;
            std::vector<double> logw;
            for (std::size_t i = 0; i < m.children.size(); ++i) {
              auto [cc, clm] = spe_cond_rect(m.children[i], rect);
              children.push_back(cc);
              logw.push_back(std::log(m.weights[i]) + clm);
            }
            double total = log_sum_exp(logw);
            if (total == kNegInf) return {s, kNegInf};
            std::vector<double> weights;
            std::vector<SpePtr> kept;
            for (std::size_t i = 0; i < children.size(); ++i) {
              double w = std::exp(logw[i] - total);
              if (w > 0.0) {
                weights.push_back(w);
                kept.push_back(children[i]);
              }
            }
            return {spe_sum(std::move(weights), std::move(kept)), total};
          },
      },
      s->node);
}

// Event conditioning over a disjoint union of rectangles: a mixture of the
// per-rectangle conditionings weighted by their masses.
inline SpePtr spe_cond_event(const SpePtr& s, const EventSet& e) {
  if (e.is_full()) return s;
  std::vector<SpePtr> children;
  std::vector<double> logm;
  for (const Rect& r : e.rects) {
    auto [cc, lm] = spe_cond_rect(s, r);
    if (lm > kNegInf) {
      children.push_back(cc);
      logm.push_back(lm);
    }
  }
  if (children.empty()) throw EvalError("null-conditioning", "event has probability zero");
  if (children.size() == 1) return children[0];
  double total = log_sum_exp(logm);
  std::vector<double> weights;
  for (double lm : logm) weights.push_back(std::exp(lm - total));
  return spe_sum(std::move(weights), std::move(children));
}

// Marginal: drop leaves outside `cols`; mixture weights unchanged.
inline SpePtr spe_marginalize(const SpePtr& s, const std::set<int>& cols) {
  return std::visit(
      overloaded{
          [&](const SpeNode::Leaf& l) -> SpePtr {
            if (cols.count(l.col)) return s;
            return spe_product({});  // unit
          },
          [&](const SpeNode::Product& p) -> SpePtr {
            std::vector<SpePtr> children;
            for (const SpePtr& c : p.children) {
              SpePtr mc = spe_marginalize(c, cols);
              auto* unit = std::get_if<SpeNode::Product>(&mc->node);
              if (unit && unit->children.empty()) continue;
              children.push_back(mc);
            }
            if (children.size() == 1) return children[0];
            return spe_product(std::move(children));
          },
          [&](const SpeNode::Sum& m) -> SpePtr {
            std::vector<SpePtr> children;
            for (const SpePtr& c : m.children) children.push_back(spe_marginalize(c, cols));
            return spe_sum(m.weights, std::move(children));
          },
      },
      s->node);
}

inline void spe_sample_into(const SpePtr& s, RngStream& rng, Row& row) {
  std::visit(overloaded{
                 [&](const SpeNode::Leaf& l) { row[l.col] = l.dist.sample(rng); },
                 [&](const SpeNode::Product& p) {
                   for (const SpePtr& c : p.children) spe_sample_into(c, rng, row);
                 },
                 [&](const SpeNode::Sum& m) {
                   std::size_t k = rng.categorical(m.weights);
                   spe_sample_into(m.children[k], rng, row);
                 },
             },
             s->node);
}

// ---------------------------------------------------------------------------
// RowModel adapter
// ---------------------------------------------------------------------------

class SpeModel final : public RowModel {
 public:
  SpeModel(Schema schema, SpePtr root) : RowModel(std::move(schema)), root_(std::move(root)) {}

  const SpePtr& root() const { return root_; }

  ModelHandle condition(const Assignment& c0, const EventSet& c1) const override {
    SpePtr cur = root_;
    if (!c1.is_full() && !c1.is_empty()) cur = spe_cond_event(cur, c1);
    if (c1.is_empty()) throw EvalError("null-conditioning", "event has probability zero");
    if (!c0.empty()) {
      auto [conditioned, ll] = spe_cond0(cur, c0);
      if (ll == kNegInf)
        throw EvalError("null-conditioning", "conditioning on a null-density point");
      cur = conditioned;
    }
    return std::make_shared<SpeModel>(schema(), cur);
  }

  Row simulate(RngStream& rng) const override {
    Row row(schema().columns.size(), Value::null());
    spe_sample_into(root_, rng, row);
    return row;
  }

  double logpdf(const Assignment& target, RngStream&) const override {
    std::set<int> cols;
    for (const auto& [c, v] : target.pins) cols.insert(c);
    SpePtr marg = spe_marginalize(root_, cols);
    return spe_log_density(marg, target);
  }

  double prob(const EventSet& target, RngStream&) const override {
    return spe_event_prob(root_, target);
  }

  // Columns living in different factors of a root product are independent
  // (the structural read-off; mixtures couple their columns, so a sum root
  // certifies nothing).
  Indep independent(const std::vector<int>& a, const std::vector<int>& b) const override {
    auto* prod = std::get_if<SpeNode::Product>(&root_->node);
    if (!prod) return Indep::Unknown;
    std::set<int> fa, fb;
    for (std::size_t i = 0; i < prod->children.size(); ++i) {
      std::set<int> cols = spe_columns(prod->children[i]);
      for (int c : a)
        if (cols.count(c)) fa.insert(static_cast<int>(i));
      for (int c : b)
        if (cols.count(c)) fb.insert(static_cast<int>(i));
    }
    for (int f : fa)
      if (fb.count(f)) return Indep::Unknown;
    return Indep::Independent;
  }

 private:
  SpePtr root_;
};

}  // namespace gensql
