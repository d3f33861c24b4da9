#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "gensql/error.hpp"
#include "gensql/numeric.hpp"
#include "gensql/value.hpp"

namespace gensql {

// Value assignment over column indices: the backend form of a point condition.
struct Assignment {
  std::vector<std::pair<int, Value>> pins;  // sorted by column index, unique

  void pin(int col, Value v) {
    auto it = std::lower_bound(pins.begin(), pins.end(), col,
                               [](const auto& p, int c) { return p.first < c; });
    if (it != pins.end() && it->first == col) {
      if (!(it->second == v))
        throw EvalError("rebinding",
                        "column is pinned to two different values (" + it->second.to_string() +
                            " and " + v.to_string() + ")");
      return;
    }
    pins.insert(it, {col, v});
  }

  const Value* find(int col) const {
    for (const auto& [c, v] : pins)
      if (c == col) return &v;
    return nullptr;
  }

  bool empty() const { return pins.empty(); }

  Assignment merged(const Assignment& other) const {
    Assignment out = *this;
    for (const auto& [c, v] : other.pins) out.pin(c, v);
    return out;
  }

  std::string key() const {
    std::string k;
    for (const auto& [c, v] : pins) k += std::to_string(c) + "=" + v.to_string() + ";";
    return k;
  }
};

// ---------------------------------------------------------------------------
// Per-column sets
// ---------------------------------------------------------------------------

struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool lo_open = false;
  bool hi_open = false;

  bool empty() const { return lo > hi || (lo == hi && (lo_open || hi_open)); }
  bool contains(double x) const {
    if (x < lo || (x == lo && lo_open)) return false;
    if (x > hi || (x == hi && hi_open)) return false;
    return true;
  }
};

// A measurable subset of one column's domain: an interval union for numeric
// columns, a (possibly complemented) finite value set for label columns.
struct ColSet {
  bool numeric = true;
  std::vector<Interval> intervals;  // sorted, disjoint, non-adjacent
  bool negated = false;
  std::vector<Value> labels;  // sorted, unique

  static ColSet full_numeric() {
    ColSet s;
    s.numeric = true;
    s.intervals = {Interval{}};
    return s;
  }
  static ColSet full_labels() {
    ColSet s;
    s.numeric = false;
    s.negated = true;  // everything but nothing
    return s;
  }
  static ColSet of_interval(Interval iv) {
    ColSet s;
    s.numeric = true;
    if (!iv.empty()) s.intervals = {iv};
    return s;
  }
  static ColSet of_labels(std::vector<Value> vs) {
    ColSet s;
    s.numeric = false;
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    s.labels = std::move(vs);
    return s;
  }

  bool is_full() const {
    if (numeric)
      return intervals.size() == 1 && intervals[0].lo == -kInf && intervals[0].hi == kInf &&
             !intervals[0].lo_open && !intervals[0].hi_open;
    return negated && labels.empty();
  }

  // Emptiness is syntactic for negated label sets; callers that know the
  // label universe can normalize with `positivize` first.
  bool is_empty() const {
    if (numeric) return intervals.empty();
    return !negated && labels.empty();
  }

  bool contains(const Value& v) const {
    if (v.is_null()) return false;
    if (numeric) {
      if (!v.is_number()) return false;
      double x = v.as_number();
      for (const Interval& iv : intervals)
        if (iv.contains(x)) return true;
      return false;
    }
    bool in = std::binary_search(labels.begin(), labels.end(), v);
    return negated ? !in : in;
  }

  // Replace a negated set by a positive one over a finite universe.
  void positivize(const std::vector<Value>& universe) {
    if (numeric || !negated) return;
    std::vector<Value> kept;
    for (const Value& u : universe)
      if (!std::binary_search(labels.begin(), labels.end(), u)) kept.push_back(u);
    *this = of_labels(std::move(kept));
  }

  static ColSet intersect(const ColSet& a, const ColSet& b) {
    if (a.numeric != b.numeric)
      throw EvalError("event-type", "mixed numeric/label column set operation");
    if (a.numeric) {
      ColSet out;
      out.numeric = true;
      for (const Interval& x : a.intervals)
        for (const Interval& y : b.intervals) {
          Interval iv;
          if (x.lo > y.lo || (x.lo == y.lo && x.lo_open)) {
            iv.lo = x.lo;
            iv.lo_open = x.lo_open;
          } else {
            iv.lo = y.lo;
            iv.lo_open = y.lo_open;
          }
          if (x.hi < y.hi || (x.hi == y.hi && x.hi_open)) {
            iv.hi = x.hi;
            iv.hi_open = x.hi_open;
          } else {
            iv.hi = y.hi;
            iv.hi_open = y.hi_open;
          }
          if (!iv.empty()) out.intervals.push_back(iv);
        }
      out.normalize();
      return out;
    }
    // label algebra: four sign cases
    auto set_inter = [](const std::vector<Value>& x, const std::vector<Value>& y) {
      std::vector<Value> out;
      std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
      return out;
    };
    auto set_diff = [](const std::vector<Value>& x, const std::vector<Value>& y) {
      std::vector<Value> out;
      std::set_difference(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
      return out;
    };
    auto set_union = [](const std::vector<Value>& x, const std::vector<Value>& y) {
      std::vector<Value> out;
      std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
      return out;
    };
    ColSet out;
    out.numeric = false;
    if (!a.negated && !b.negated) {
      out.labels = set_inter(a.labels, b.labels);
    } else if (!a.negated && b.negated) {
      out.labels = set_diff(a.labels, b.labels);
    } else if (a.negated && !b.negated) {
      out.labels = set_diff(b.labels, a.labels);
    } else {
      out.negated = true;
      out.labels = set_union(a.labels, b.labels);
    }
    return out;
  }

  static ColSet complement(const ColSet& a) {
    if (!a.numeric) {
      ColSet out = a;
      out.negated = !a.negated;
      return out;
    }
    ColSet out;
    out.numeric = true;
    double cursor = -kInf;
    bool cursor_open = false;  // next interval's lo_open
    for (const Interval& iv : a.intervals) {
      Interval gap{cursor, iv.lo, cursor_open, !iv.lo_open};
      if (!gap.empty()) out.intervals.push_back(gap);
      cursor = iv.hi;
      cursor_open = !iv.hi_open;
    }
    Interval tail{cursor, kInf, cursor_open, false};
    if (!tail.empty() && !(cursor == kInf)) out.intervals.push_back(tail);
    out.normalize();
    return out;
  }

  static ColSet subtract(const ColSet& a, const ColSet& b) {
    return intersect(a, complement(b));
  }

  static ColSet unite(const ColSet& a, const ColSet& b) {
    return complement(intersect(complement(a), complement(b)));
  }

  void normalize() {
    if (!numeric) return;
    std::sort(intervals.begin(), intervals.end(), [](const Interval& x, const Interval& y) {
      if (x.lo != y.lo) return x.lo < y.lo;
      return !x.lo_open && y.lo_open;
    });
    std::vector<Interval> merged;
    for (const Interval& iv : intervals) {
      if (iv.empty()) continue;
      if (!merged.empty()) {
        Interval& last = merged.back();
        bool touches = iv.lo < last.hi || (iv.lo == last.hi && (!iv.lo_open || !last.hi_open));
        if (touches) {
          if (iv.hi > last.hi || (iv.hi == last.hi && last.hi_open && !iv.hi_open)) {
            last.hi = iv.hi;
            last.hi_open = iv.hi_open;
          }
          continue;
        }
      }
      merged.push_back(iv);
    }
    intervals = std::move(merged);
  }
};

// ---------------------------------------------------------------------------
// Rectangles and events
// ---------------------------------------------------------------------------

// Axis-aligned product set: column index -> set; absent columns are
// unconstrained.
struct Rect {
  std::map<int, ColSet> sets;

  bool constrains(int col) const { return sets.count(col) > 0; }

  bool is_empty() const {
    for (const auto& [c, s] : sets)
      if (s.is_empty()) return true;
    return false;
  }

  bool contains(const Row& row) const {
    for (const auto& [c, s] : sets) {
      if (c < 0 || static_cast<std::size_t>(c) >= row.size()) return false;
      if (!s.contains(row[c])) return false;
    }
    return true;
  }

  static std::optional<Rect> intersect(const Rect& a, const Rect& b) {
    Rect out = a;
    for (const auto& [c, s] : b.sets) {
      auto it = out.sets.find(c);
      if (it == out.sets.end())
        out.sets[c] = s;
      else
        it->second = ColSet::intersect(it->second, s);
    }
    if (out.is_empty()) return std::nullopt;
    return out;
  }

  // this \ b as a disjoint list of rectangles.
  std::vector<Rect> subtract(const Rect& b) const {
    if (!intersect(*this, b)) return {*this};
    std::vector<Rect> pieces;
    Rect prefix = *this;
    for (const auto& [c, bs] : b.sets) {
      ColSet mine = prefix.constrains(c)
                        ? prefix.sets.at(c)
                        : (bs.numeric ? ColSet::full_numeric() : ColSet::full_labels());
      ColSet out_part = ColSet::subtract(mine, bs);
      if (!out_part.is_empty()) {
        Rect piece = prefix;
        piece.sets[c] = out_part;
        if (!piece.is_empty()) pieces.push_back(std::move(piece));
      }
      ColSet in_part = ColSet::intersect(mine, bs);
      if (in_part.is_empty()) return pieces;  // nothing left inside b
      prefix.sets[c] = in_part;
    }
    return pieces;
  }
};

// A measurable set as a disjoint union of rectangles.
struct EventSet {
  std::vector<Rect> rects;

  static EventSet full() {
    EventSet e;
    e.rects.push_back(Rect{});
    return e;
  }

  bool is_full() const { return rects.size() == 1 && rects[0].sets.empty(); }
  bool is_empty() const { return rects.empty(); }

  bool contains(const Row& row) const {
    for (const Rect& r : rects)
      if (r.contains(row)) return true;
    return false;
  }

  // Build a disjoint union from an arbitrary list of rectangles.
  static EventSet disjoint_union(const std::vector<Rect>& raw) {
    EventSet out;
    for (const Rect& r : raw) {
      if (r.is_empty()) continue;
      std::vector<Rect> pieces = {r};
      for (const Rect& existing : out.rects) {
        std::vector<Rect> next;
        for (const Rect& p : pieces) {
          std::vector<Rect> sub = p.subtract(existing);
          next.insert(next.end(), sub.begin(), sub.end());
        }
        pieces = std::move(next);
        if (pieces.empty()) break;
      }
      out.rects.insert(out.rects.end(), pieces.begin(), pieces.end());
    }
    return out;
  }

  static EventSet intersect(const EventSet& a, const EventSet& b) {
    EventSet out;
    for (const Rect& ra : a.rects)
      for (const Rect& rb : b.rects)
        if (auto r = Rect::intersect(ra, rb)) out.rects.push_back(*r);
    return out;  // disjointness is preserved by pairwise intersection
  }

  std::vector<int> columns() const {
    std::vector<int> cols;
    for (const Rect& r : rects)
      for (const auto& [c, s] : r.sets) cols.push_back(c);
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    return cols;
  }

  std::string key() const {
    std::string k;
    for (const Rect& r : rects) {
      k += "{";
      for (const auto& [c, s] : r.sets) {
        k += std::to_string(c) + ":";
        if (s.numeric) {
          for (const Interval& iv : s.intervals)
            k += (iv.lo_open ? "(" : "[") + BaseType::format_double(iv.lo) + "," +
                 BaseType::format_double(iv.hi) + (iv.hi_open ? ")" : "]");
        } else {
          k += s.negated ? "!" : "";
          for (const Value& v : s.labels) k += v.to_string() + "|";
        }
        k += ";";
      }
      k += "}";
    }
    return k;
  }
};

}  // namespace gensql
