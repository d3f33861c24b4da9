#include <cmath>

#include "doctest.h"
#include "gensql/numeric.hpp"
#include "gensql/rng.hpp"
#include "gensql/value.hpp"

using namespace gensql;

namespace {

Row row(std::initializer_list<Value> vs) { return Row(vs); }

Schema two_col_schema() {
  Schema s;
  s.columns = {{"a", BaseType::integer()}, {"b", BaseType::str()}};
  return s;
}

Table small_table(std::vector<Row> rows) {
  Table t;
  t.schema = two_col_schema();
  t.rows = std::move(rows);
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("core");

TEST_CASE("null propagates through every scalar operator") {
  const Value n = Value::null();
  CHECK(op_apply(OpKind::Add, {n, Value::integer(3)}).is_null());
  CHECK(op_apply(OpKind::Mul, {Value::real(4.1), n}).is_null());
  for (OpKind op : {OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div, OpKind::Lt, OpKind::Gt,
                    OpKind::Eq, OpKind::And, OpKind::Or}) {
    CHECK(op_apply(op, {n, n}).is_null());
  }
  for (OpKind op : {OpKind::Neg, OpKind::Log, OpKind::Exp, OpKind::Sqrt}) {
    CHECK(op_apply(op, {n}).is_null());
  }
}

TEST_CASE("basic operator semantics") {
  CHECK(op_apply(OpKind::Eq, {Value::integer(2), Value::integer(2)}).as_bool());
  CHECK_FALSE(op_apply(OpKind::Eq, {Value::text("a"), Value::text("b")}).as_bool());
  CHECK(op_apply(OpKind::Log, {Value::real(std::exp(1.0))}).as_real() ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(op_apply(OpKind::Add, {Value::integer(2), Value::integer(3)}).as_int() == 5);
  CHECK(op_apply(OpKind::Add, {Value::integer(2), Value::real(0.5)}).as_real() == 2.5);
  // division by zero is the missing value, not an error
  CHECK(op_apply(OpKind::Div, {Value::real(1.0), Value::real(0.0)}).is_null());
  CHECK(op_apply(OpKind::Div, {Value::integer(7), Value::integer(2)}).as_real() == 3.5);
}

TEST_CASE("value well-typedness follows the base type") {
  CHECK(Value::null().well_typed(BaseType::boolean()));
  CHECK(Value::real(0.5).well_typed(BaseType::posreal()));
  CHECK_FALSE(Value::real(-0.5).well_typed(BaseType::posreal()));
  CHECK(Value::real(0.25).well_typed(BaseType::ranged(0, 1)));
  CHECK_FALSE(Value::real(2.0).well_typed(BaseType::ranged(0, 1)));
  CHECK(Value::integer(0).well_typed(BaseType::natural()));
  CHECK_FALSE(Value::integer(-1).well_typed(BaseType::natural()));
  CHECK(Value::text("red").well_typed(BaseType::categorical({"red", "blue"})));
  CHECK_FALSE(Value::text("green").well_typed(BaseType::categorical({"red", "blue"})));
  CHECK_FALSE(Value::integer(1).well_typed(BaseType::real()));
}

TEST_CASE("ranged and categorical invariants are checked") {
  CHECK_THROWS_AS(BaseType::ranged(1.0, 1.0), Error);
  CHECK_THROWS_AS(BaseType::categorical({}), Error);
  CHECK_THROWS_AS(BaseType::categorical({"x", "x"}), Error);
}

TEST_CASE("bag_union is a multiset sum") {
  Row r1 = row({Value::integer(1), Value::text("x")});
  Row r2 = row({Value::integer(2), Value::text("y")});
  Table a = small_table({r1});
  Table b = small_table({r1});
  Table u = bag_union(a, b);
  CHECK(u.rows.size() == 2);
  CHECK(u.rows[0] == r1);
  CHECK(u.rows[1] == r1);

  Table empty = small_table({});
  CHECK(multiset_equal(bag_union(empty, small_table({r1, r2})), small_table({r1, r2})));

  // commutative up to multiset equality
  Table ab = bag_union(small_table({r1}), small_table({r2}));
  Table ba = bag_union(small_table({r2}), small_table({r1}));
  CHECK(multiset_equal(ab, ba));

  Table other;
  other.schema.columns = {{"z", BaseType::integer()}};
  CHECK_THROWS_AS(bag_union(a, other), EvalError);
}

TEST_CASE("bag_union is associative up to multiset equality") {
  Row r1 = row({Value::integer(1), Value::text("x")});
  Row r2 = row({Value::integer(2), Value::text("y")});
  Row r3 = row({Value::integer(3), Value::text("z")});
  Table a = small_table({r1, r2}), b = small_table({r2}), c = small_table({r3, r3});
  CHECK(multiset_equal(bag_union(bag_union(a, b), c), bag_union(a, bag_union(b, c))));
}

TEST_CASE("bag_dedup keeps one copy of each distinct row") {
  Row r1 = row({Value::integer(1), Value::text("x")});
  Row r2 = row({Value::integer(2), Value::text("y")});
  Table t = small_table({r1, r1, r2});
  Table d = bag_dedup(t);
  CHECK(d.rows.size() == 2);
  CHECK(multiset_equal(d, small_table({r1, r2})));
  CHECK(bag_dedup(small_table({})).rows.empty());
}

TEST_CASE("bag_dedup is idempotent on random tables") {
  RngStream rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Row> rows;
    std::size_t n = rng.next_u64() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(row({Value::integer(static_cast<std::int64_t>(rng.next_u64() % 3)),
                          Value::text(rng.next_u64() % 2 ? "x" : "y")}));
    }
    Table t = small_table(rows);
    Table once = bag_dedup(t);
    CHECK(multiset_equal(bag_dedup(once), once));
  }
}

TEST_CASE("bag_duplicate multiplies multiplicities") {
  Row r1 = row({Value::integer(1), Value::text("x")});
  Table t3 = bag_duplicate(small_table({r1}), 3);
  CHECK(t3.rows.size() == 3);
  CHECK(multiset_equal(t3, small_table({r1, r1, r1})));
  CHECK(bag_duplicate(small_table({r1, r1}), 0).rows.empty());

  Row r2 = row({Value::integer(2), Value::text("y")});
  Table big = bag_duplicate(small_table({r1, r2, r1, r2}), 1000);
  CHECK(big.rows.size() == 4000);
}

TEST_CASE("bag_join is the cartesian product with disjoint columns") {
  Table a;
  a.schema.columns = {{"n", BaseType::integer()}};
  a.rows = {{Value::integer(1)}};
  Table b;
  b.schema.columns = {{"s", BaseType::str()}};
  b.rows = {{Value::text("x")}, {Value::text("y")}};

  Table j = bag_join(a, b);
  CHECK(j.rows.size() == 2);
  CHECK(j.schema.columns.size() == 2);
  CHECK(j.rows[0] == row({Value::integer(1), Value::text("x")}));
  CHECK(j.rows[1] == row({Value::integer(1), Value::text("y")}));

  Table empty;
  empty.schema.columns = {{"s", BaseType::str()}};
  CHECK(bag_join(a, empty).rows.empty());

  Table a3;
  a3.schema.columns = {{"n", BaseType::integer()}};
  for (int i = 0; i < 3; ++i) a3.rows.push_back({Value::integer(i)});
  Table b4;
  b4.schema.columns = {{"s", BaseType::str()}};
  for (int i = 0; i < 4; ++i) b4.rows.push_back({Value::text(std::to_string(i))});
  CHECK(bag_join(a3, b4).rows.size() == 12);

  Table clash;
  clash.schema.columns = {{"n", BaseType::str()}};
  CHECK_THROWS_AS(bag_join(a, clash), EvalError);
}

TEST_CASE("bag operations preserve schema well-typedness") {
  Row r1 = row({Value::integer(1), Value::text("x")});
  Row r2 = row({Value::integer(2), Value::text("y")});
  Table t = small_table({r1, r2});
  bag_union(t, t).validate();
  bag_dedup(t).validate();
  bag_duplicate(t, 7).validate();
  Table other;
  other.schema.columns = {{"c", BaseType::boolean()}};
  other.rows = {{Value::boolean(true)}};
  bag_join(t, other).validate();
}

TEST_CASE("log_sum_exp handles extremes") {
  CHECK(log_sum_exp({}) == kNegInf);
  CHECK(log_sum_exp({kNegInf, kNegInf}) == kNegInf);
  CHECK(log_sum_exp({0.0, 0.0}) == doctest::Approx(std::log(2.0)));
  CHECK(log_sum_exp({-1000.0, -1000.0}) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK(log_mean_exp({-1000.0, -1000.0}) == doctest::Approx(-1000.0));
}

TEST_CASE("normal cdf/pdf sanity") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-12));
  CHECK(normal_pdf(0.0, 0.0, 1.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  CHECK(normal_log_pdf(0.0, 0.0, 1.0) == doctest::Approx(std::log(1.0 / std::sqrt(2 * M_PI))));
}

TEST_CASE("rng streams are deterministic and split independently") {
  RngStream a(42), b(42);
  for (int i = 0; i < 8; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream parent(7);
  RngStream c1 = parent.split(1);
  RngStream c2 = parent.split(2);
  CHECK(c1.key() != c2.key());
  // splitting is independent of parent's draw position
  RngStream parent2(7);
  parent2.next_u64();
  CHECK(parent2.split(1).key() == c1.key());

  double u = RngStream(3).uniform();
  CHECK(u > 0.0);
  CHECK(u <= 1.0);
}

TEST_CASE("gaussian draws have roughly standard moments") {
  RngStream g(11);
  double sum = 0, sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double z = g.gaussian();
    sum += z;
    sum2 += z * z;
  }
  double mean = sum / n, var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean) < 0.03);
  CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_SUITE_END();
