#include "doctest.h"
#include "gensql/events.hpp"
#include "gensql/rng.hpp"

using namespace gensql;

namespace {

Interval iv(double lo, double hi, bool lo_open = false, bool hi_open = false) {
  return Interval{lo, hi, lo_open, hi_open};
}

ColSet gt(double c) { return ColSet::of_interval(iv(c, kInf, true, false)); }
ColSet lt(double c) { return ColSet::of_interval(iv(-kInf, c, false, true)); }

Value L(const char* s) { return Value::text(s); }

// Brute-force membership oracle over a small grid, used to cross-check the
// rectangle subtraction/disjoint-union algebra.
std::vector<Row> grid3() {
  std::vector<Row> rows;
  const char* labels[] = {"a", "b", "c"};
  for (double x = -2; x <= 2; x += 0.5)
    for (double y = -2; y <= 2; y += 0.5)
      for (const char* s : labels)
        rows.push_back({Value::real(x), Value::real(y), Value::text(s)});
  return rows;
}

}  // namespace

TEST_SUITE_BEGIN("events");

TEST_CASE("interval membership and normalization") {
  ColSet s = ColSet::of_interval(iv(0, 1, true, false));  // (0, 1]
  CHECK(s.contains(Value::real(0.5)));
  CHECK(s.contains(Value::real(1.0)));
  CHECK_FALSE(s.contains(Value::real(0.0)));
  CHECK_FALSE(s.contains(Value::null()));

  ColSet u = ColSet::unite(ColSet::of_interval(iv(0, 1)), ColSet::of_interval(iv(1, 2)));
  CHECK(u.intervals.size() == 1);  // adjacent intervals merge
  CHECK(u.contains(Value::real(1.0)));

  ColSet gap = ColSet::unite(ColSet::of_interval(iv(0, 1, false, true)),
                             ColSet::of_interval(iv(1, 2, true, false)));
  CHECK_FALSE(gap.contains(Value::real(1.0)));  // {1} stays excluded
  CHECK(gap.contains(Value::real(0.99)));
}

TEST_CASE("complement round trip") {
  ColSet s = ColSet::unite(lt(0), gt(1));
  ColSet c = ColSet::complement(s);
  REQUIRE(c.intervals.size() == 1);
  CHECK(c.contains(Value::real(0.0)));
  CHECK(c.contains(Value::real(1.0)));
  CHECK_FALSE(c.contains(Value::real(-0.1)));
  ColSet cc = ColSet::complement(c);
  for (double x : {-5.0, 0.0, 0.5, 1.0, 7.0})
    CHECK(cc.contains(Value::real(x)) == s.contains(Value::real(x)));
}

TEST_CASE("label set algebra with negation") {
  ColSet ab = ColSet::of_labels({L("a"), L("b")});
  ColSet not_a = ColSet::complement(ColSet::of_labels({L("a")}));
  ColSet inter = ColSet::intersect(ab, not_a);
  CHECK(inter.contains(L("b")));
  CHECK_FALSE(inter.contains(L("a")));
  CHECK_FALSE(inter.negated);

  ColSet both_neg = ColSet::intersect(not_a, ColSet::complement(ColSet::of_labels({L("b")})));
  CHECK(both_neg.negated);
  CHECK_FALSE(both_neg.contains(L("a")));
  CHECK_FALSE(both_neg.contains(L("b")));
  CHECK(both_neg.contains(L("z")));

  both_neg.positivize({L("a"), L("b"), L("c")});
  CHECK_FALSE(both_neg.negated);
  CHECK(both_neg.contains(L("c")));
}

TEST_CASE("rect intersection and membership") {
  Rect r1;
  r1.sets[0] = gt(0);
  r1.sets[2] = ColSet::of_labels({L("a")});
  Rect r2;
  r2.sets[0] = lt(1);
  auto inter = Rect::intersect(r1, r2);
  REQUIRE(inter);
  CHECK(inter->contains({Value::real(0.5), Value::real(9), L("a")}));
  CHECK_FALSE(inter->contains({Value::real(0.5), Value::real(9), L("b")}));
  CHECK_FALSE(inter->contains({Value::real(1.5), Value::real(9), L("a")}));

  Rect r3;
  r3.sets[0] = gt(5);
  CHECK_FALSE(Rect::intersect(*inter, r3));
}

TEST_CASE("disjoint union covers exactly the set union") {
  RngStream rng(99);
  auto rows = grid3();
  for (int trial = 0; trial < 40; ++trial) {
    // random raw rectangles over (x, y, label)
    std::vector<Rect> raw;
    int n = 1 + static_cast<int>(rng.next_u64() % 4);
    for (int i = 0; i < n; ++i) {
      Rect r;
      if (rng.next_u64() % 2) {
        double a = -2 + static_cast<double>(rng.next_u64() % 9) * 0.5;
        r.sets[0] = (rng.next_u64() % 2) ? gt(a) : lt(a);
      }
      if (rng.next_u64() % 2) {
        double a = -2 + static_cast<double>(rng.next_u64() % 9) * 0.5;
        double b = a + 0.5 + static_cast<double>(rng.next_u64() % 4) * 0.5;
        r.sets[1] = ColSet::of_interval(iv(a, b, false, true));
      }
      if (rng.next_u64() % 2) {
        std::vector<Value> ls;
        if (rng.next_u64() % 2) ls.push_back(L("a"));
        if (rng.next_u64() % 2) ls.push_back(L("b"));
        ls.push_back(L("c"));
        r.sets[2] = ColSet::of_labels(ls);
      }
      raw.push_back(r);
    }
    EventSet es = EventSet::disjoint_union(raw);

    for (const Row& row : rows) {
      bool in_union = false;
      for (const Rect& r : raw) in_union |= r.contains(row);
      CHECK(es.contains(row) == in_union);
      // pairwise disjoint: at most one rect contains the row
      int hits = 0;
      for (const Rect& r : es.rects) hits += r.contains(row) ? 1 : 0;
      CHECK(hits == (in_union ? 1 : 0));
    }
  }
}

TEST_CASE("assignment pinning") {
  Assignment a;
  a.pin(2, Value::real(1.5));
  a.pin(0, L("x"));
  CHECK(a.pins[0].first == 0);
  CHECK(a.pins[1].first == 2);
  a.pin(2, Value::real(1.5));  // same value: fine
  CHECK_THROWS_AS(a.pin(2, Value::real(2.5)), EvalError);
  CHECK(a.find(2)->as_real() == 1.5);
  CHECK(a.find(7) == nullptr);

  Assignment b;
  b.pin(1, Value::boolean(true));
  Assignment m = a.merged(b);
  CHECK(m.pins.size() == 3);
}

TEST_CASE("event set intersection stays disjoint") {
  Rect half;
  half.sets[0] = gt(0);
  Rect other;
  other.sets[1] = gt(0);
  EventSet a = EventSet::disjoint_union({half});
  EventSet b = EventSet::disjoint_union({other});
  EventSet inter = EventSet::intersect(a, b);
  CHECK(inter.contains({Value::real(1), Value::real(1), L("a")}));
  CHECK_FALSE(inter.contains({Value::real(1), Value::real(-1), L("a")}));
}

TEST_SUITE_END();
