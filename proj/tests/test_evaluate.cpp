#include <cmath>

#include "doctest.h"
#include "gensql/session.hpp"

using namespace gensql;

namespace {

std::string fixture(const std::string& name) {
  return std::string(GENSQL_FIXTURE_DIR) + "/" + name;
}

// A fair, perfectly correlated bit pair: b always equals a.
ModelHandle correlated_bits() {
  auto comp = [](bool v) {
    double t = v ? 1.0 : 0.0;
    return spe_product(
        {spe_leaf(0, LeafDist::categorical({Value::boolean(false), Value::boolean(true)},
                                           {1.0 - t, t})),
         spe_leaf(1, LeafDist::categorical({Value::boolean(false), Value::boolean(true)},
                                           {1.0 - t, t}))});
  };
  Schema s;
  s.columns = {{"a", BaseType::boolean()}, {"b", BaseType::boolean()}};
  return std::make_shared<SpeModel>(s, spe_sum({0.5, 0.5}, {comp(false), comp(true)}));
}

// Independent product-form pair.
ModelHandle independent_bits() {
  Schema s;
  s.columns = {{"a", BaseType::boolean()}, {"b", BaseType::boolean()}};
  SpePtr root = spe_product(
      {spe_leaf(0, LeafDist::categorical({Value::boolean(false), Value::boolean(true)},
                                         {0.3, 0.7})),
       spe_leaf(1, LeafDist::categorical({Value::boolean(false), Value::boolean(true)},
                                         {0.6, 0.4}))});
  return std::make_shared<SpeModel>(s, root);
}

Session mixture_session(std::uint64_t seed = 0) {
  Session s;
  s.eval.options.seed = seed;
  s.declare_model("m", load_model_file(fixture("mixture.json"), s.eval.options.particles));
  Schema ts;
  ts.columns = {{"v", BaseType::real()}};
  Table t;
  t.schema = ts;
  t.rows = {{Value::real(1.0)}, {Value::real(2.0)}};
  s.declare_table("t", ts, t);
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("evaluate");

TEST_CASE("replicate cardinality: GENERATE ... LIMIT n has exactly n rows") {
  Session s = mixture_session();
  CHECK(s.run("GENERATE UNDER m LIMIT 3").table.rows.size() == 3);
  CHECK(s.run("GENERATE UNDER m LIMIT 0").table.rows.empty());
  CHECK(s.run("GENERATE UNDER m GIVEN m.x > 0.0 LIMIT 5").table.rows.size() == 5);
}

TEST_CASE("filter with a constant false predicate empties the table") {
  Session s = mixture_session();
  CHECK(s.run("t WHERE FALSE").table.rows.empty());
  CHECK(s.run("t WHERE TRUE").table.rows.size() == 2);
}

TEST_CASE("WHERE NULL filters out every row") {
  Session s = mixture_session();
  CHECK(s.run("t WHERE NULL").table.rows.empty());
  // a predicate that evaluates to NULL per row acts the same way
  CHECK(s.run("t WHERE t.v + NULL > 0.0").table.rows.empty());
}

TEST_CASE("exp(logpdf) at x = 0 through the full pipeline") {
  Session s = mixture_session();
  Table out = s.run("PROBABILITY OF m.x = 0.0 UNDER m").table;
  REQUIRE(out.rows.size() == 1);
  CHECK(std::fabs(out.rows[0][0].as_real() - 0.1995380) < 1e-6);
}

TEST_CASE("generative join keeps one output row per input row") {
  Session s = mixture_session();
  Table out = s.run("t GENERATIVE JOIN m GIVEN m.x = t.v").table;
  CHECK(out.rows.size() == 2);
  REQUIRE(out.schema.columns.size() == 3);  // v, color, x
  // the model's x column is pinned to the row's v value
  for (const Row& r : out.rows) CHECK(r[2].as_real() == r[0].as_real());
}

TEST_CASE("determinism: same seed gives identical output, different seed differs") {
  Session a = mixture_session(7), b = mixture_session(7), c = mixture_session(8);
  const char* q = "GENERATE UNDER m GIVEN m.color = \"blue\" LIMIT 20";
  Table ta = a.run(q).table, tb = b.run(q).table, tc = c.run(q).table;
  CHECK(write_csv(ta) == write_csv(tb));
  CHECK(write_csv(ta) != write_csv(tc));
}

TEST_CASE("GIVEN col = NULL leaves simulate output unchanged (unit conditioning)") {
  Session a = mixture_session(5), b = mixture_session(5);
  Table plain = a.run("GENERATE UNDER m LIMIT 8").table;
  Table with_null = b.run("GENERATE UNDER m GIVEN m.x = NULL LIMIT 8").table;
  CHECK(write_csv(plain) == write_csv(with_null));
  // the same holds for prob and logpdf values
  Session c = mixture_session(5), d = mixture_session(5);
  CHECK(c.run("PROBABILITY OF m.x > 1.0 UNDER m").table.rows[0][0] ==
        d.run("PROBABILITY OF m.x > 1.0 UNDER m GIVEN m.color = NULL").table.rows[0][0]);
}

TEST_CASE("value-level caching: distinct expressions with equal values share a call") {
  Session s = mixture_session();
  auto r = s.run(
      "SELECT PROBABILITY OF m.x > 1 + 1 UNDER m AS a, "
      "PROBABILITY OF m.x > 2 UNDER m AS b FROM (t WHERE t.v = 1.0)");
  CHECK(r.table.rows.size() == 1);
  CHECK(r.table.rows[0][0] == r.table.rows[0][1]);
  CHECK(r.stats.backend_scalar_calls == 1);
  CHECK(r.stats.cache_scalar_hits == 1);

  Session off = mixture_session();
  off.eval.options.cache_enabled = false;
  auto r2 = off.run(
      "SELECT PROBABILITY OF m.x > 1 + 1 UNDER m AS a, "
      "PROBABILITY OF m.x > 2 UNDER m AS b FROM (t WHERE t.v = 1.0)");
  CHECK(r2.stats.backend_scalar_calls == 2);
  CHECK(r2.stats.cache_scalar_hits == 0);
  CHECK(r2.table.rows[0][0] == r.table.rows[0][0]);
}

TEST_CASE("conditioned-model cache: repeated equal GIVEN values condition once") {
  Session s = mixture_session();
  Schema ts;
  ts.columns = {{"c", BaseType::categorical({"red", "blue"})}};
  Table t;
  t.schema = ts;
  for (int i = 0; i < 6; ++i)
    t.rows.push_back({Value::text(i % 2 ? "red" : "blue")});
  s.declare_table("rows", ts, t);
  auto r = s.run(
      "SELECT PROBABILITY OF m.x > 0.0 UNDER m GIVEN m.color = rows.c AS p FROM rows");
  // six call sites but only two distinct conditioning values
  CHECK(r.stats.backend_conditions == 2);
  CHECK(r.stats.backend_scalar_calls == 2);
  CHECK(r.stats.cache_scalar_hits == 4);
}

TEST_CASE("cache transparency on the exact backend") {
  const char* queries[] = {
      "SELECT PROBABILITY OF m.color = \"red\" UNDER m GIVEN m.x > 1.0 AS p FROM t",
      "PROBABILITY OF m.x = 0.5 UNDER m GIVEN m.color = \"blue\"",
      "GENERATE UNDER m GIVEN m.color = \"red\" LIMIT 9",
  };
  for (const char* q : queries) {
    CAPTURE(q);
    Session on = mixture_session(3), off = mixture_session(3);
    off.eval.options.cache_enabled = false;
    CHECK(write_csv(on.run(q).table) == write_csv(off.run(q).table));
  }
}

TEST_CASE("independence simplification drops certified conjuncts") {
  Session s;
  s.declare_model("ind", independent_bits());
  auto r = s.run("PROBABILITY OF ind.a = true UNDER ind GIVEN ind.b = false");
  // with the optimization the condition vanishes: no conditioning happens
  CHECK(r.stats.backend_conditions == 0);
  CHECK(r.table.rows[0][0].as_real() == doctest::Approx(0.7).epsilon(1e-12));

  Session off;
  off.declare_model("ind", independent_bits());
  off.eval.options.indep_opt_enabled = false;
  auto r2 = off.run("PROBABILITY OF ind.a = true UNDER ind GIVEN ind.b = false");
  CHECK(r2.stats.backend_conditions == 1);
  CHECK(std::fabs(r2.table.rows[0][0].as_real() - r.table.rows[0][0].as_real()) < 1e-12);
}

TEST_CASE("independence simplification is conservative when the oracle is unknown") {
  Session s = mixture_session();  // mixture root: nothing certified
  auto r = s.run("PROBABILITY OF m.x > 4.0 UNDER m GIVEN m.color = \"blue\"");
  CHECK(r.stats.backend_conditions == 1);  // condition kept
  CHECK(std::fabs(r.table.rows[0][0].as_real() - 0.4444) < 1e-4);
}

TEST_CASE("group by: counts, averages, partition sizes") {
  Session s;
  Schema ts;
  ts.columns = {{"k", BaseType::categorical({"a", "b"})}, {"v", BaseType::integer()}};
  Table t;
  t.schema = ts;
  t.rows = {{Value::text("a"), Value::integer(1)},
            {Value::text("a"), Value::integer(2)},
            {Value::text("a"), Value::integer(3)},
            {Value::text("b"), Value::integer(10)}};
  s.declare_table("t", ts, t);

  Table grouped =
      s.run("SELECT k, COUNT(*) AS n, AVG(v) AS mean FROM t GROUP BY k").table;
  REQUIRE(grouped.rows.size() == 2);
  CHECK(grouped.rows[0][0].as_string() == "a");
  CHECK(grouped.rows[0][1].as_int() == 3);
  CHECK(grouped.rows[0][2].as_real() == doctest::Approx(2.0));
  CHECK(grouped.rows[1][1].as_int() == 1);

  // partition: group counts sum to the table size
  std::int64_t total = 0;
  for (const Row& r : grouped.rows) total += r[1].as_int();
  CHECK(total == 4);

  // single group of four rows via a constant key
  Table one = s.run("GROUP t BY [\"g\" AS g] AGGREGATING COUNT(t.v) AS n").table;
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0][1].as_int() == 4);

  // aggregates skip nulls
  Table t2 = t;
  t2.rows.push_back({Value::text("b"), Value::null()});
  Session s2;
  s2.declare_table("t", ts, t2);
  Table g2 = s2.run("SELECT k, COUNT(v) AS n, SUM(v) AS sum FROM t GROUP BY k").table;
  CHECK(g2.rows[1][1].as_int() == 1);  // null not counted
  CHECK(g2.rows[1][2].as_int() == 10);
}

TEST_CASE("group counts partition random tables") {
  RngStream rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    Session s;
    Schema ts;
    ts.columns = {{"k", BaseType::categorical({"a", "b", "c"})}, {"v", BaseType::integer()}};
    Table t;
    t.schema = ts;
    std::size_t n = 1 + rng.next_u64() % 30;
    const char* keys[] = {"a", "b", "c"};
    for (std::size_t i = 0; i < n; ++i)
      t.rows.push_back({Value::text(keys[rng.next_u64() % 3]),
                        Value::integer(static_cast<std::int64_t>(rng.next_u64() % 5))});
    s.declare_table("t", ts, t);
    Table grouped = s.run("SELECT k, COUNT(*) AS c FROM t GROUP BY k").table;
    std::int64_t total = 0;
    for (const Row& r : grouped.rows) total += r[1].as_int();
    CHECK(total == static_cast<std::int64_t>(n));
  }
}

TEST_CASE("mutual information: independent columns estimate zero") {
  Session s;
  s.declare_model("ind", independent_bits());
  s.eval.options.mi_samples = 10000;
  Table out = s.run("MUTUAL INFO ([ind.a], [ind.b]) UNDER ind").table;
  CHECK(std::fabs(out.rows[0][0].as_real()) <= 0.05);
}

TEST_CASE("mutual information: perfectly correlated fair bit estimates log 2") {
  Session s;
  s.declare_model("cb", correlated_bits());
  s.eval.options.mi_samples = 10000;
  Table out = s.run("MUTUAL INFO ([cb.a], [cb.b]) UNDER cb").table;
  CHECK(std::fabs(out.rows[0][0].as_real() - std::log(2.0)) <= 0.05);
}

TEST_CASE("mutual information: one sample still yields a finite value") {
  Session s;
  s.declare_model("cb", correlated_bits());
  s.eval.options.mi_samples = 1;
  Table out = s.run("MUTUAL INFO ([cb.a], [cb.b]) UNDER cb").table;
  CHECK(std::isfinite(out.rows[0][0].as_real()));
}

TEST_CASE("mutual information on a null-measure conditioning reports an error") {
  Session s;
  s.declare_model("cb", correlated_bits());
  // b always equals a, so pinning a = true with b = false has probability zero
  CHECK_THROWS_AS(
      s.run("MUTUAL INFO ([cb.a], [cb.b], cb.a = true AND cb.b = false) UNDER cb"),
      EvalError);
}

TEST_CASE("union, dedup, duplicate through the pipeline") {
  Session s = mixture_session();
  CHECK(s.run("t UNION t").table.rows.size() == 4);
  CHECK(s.run("DEDUP (t UNION t)").table.rows.size() == 2);
  CHECK(s.run("t DUPLICATE 1000 TIMES").table.rows.size() == 2000);
  CHECK(s.run("t DUPLICATE 0 TIMES").table.rows.empty());
}

TEST_SUITE_END();
