#include <cmath>

#include "doctest.h"
#include "gensql/session.hpp"

using namespace gensql;

namespace {

std::string fixture(const std::string& name) {
  return std::string(GENSQL_FIXTURE_DIR) + "/" + name;
}

Session demo_session(std::uint64_t seed = 0) {
  Session s;
  s.eval.options.seed = seed;
  s.load_table_files("health_data", fixture("health.csv"), fixture("health_schema.json"));
  s.load_model_file_as("h_model", fixture("health_model.json"));
  s.load_model_file_as("bn_model", fixture("mixture_bn.json"));
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("session");

TEST_CASE("table loading validates cells against the schema") {
  Session s = demo_session();
  const Table& t = s.eval.tables.at("health_data");
  CHECK(t.rows.size() == 4);
  CHECK(t.rows[0][0].as_string() == "low");
}

TEST_CASE("end-to-end conditional probability per row") {
  Session s = demo_session();
  Table out = s.run(
                   "SELECT weight, PROBABILITY OF h_model.w = health_data.weight "
                   "UNDER h_model AS p FROM health_data")
                  .table;
  REQUIRE(out.rows.size() == 4);
  // P(w=low) = .5*.8 + .5*.3 = 0.55, P(w=high) = 0.45
  for (const Row& r : out.rows) {
    double expected = r[0].as_string() == "low" ? 0.55 : 0.45;
    CHECK(r[1].as_real() == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("the worked conditional-mutual-information query runs end to end") {
  Session s = demo_session();
  s.eval.options.seed = 11;
  Table out = s.run(
                   "SELECT weight, AVG(log_pxy_div_px_py) AS mutual_information "
                   "FROM ("
                   "  SELECT weight, LOG(pxy) - (LOG(px) + LOG(py)) AS log_pxy_div_px_py "
                   "  FROM ("
                   "    SELECT weight, "
                   "      PROBABILITY OF h_model.age = tbl.age AND h_model.bmi = tbl.bmi "
                   "        UNDER h_model GIVEN h_model.w = tbl.weight AS pxy, "
                   "      PROBABILITY OF h_model.age = tbl.age "
                   "        UNDER h_model GIVEN h_model.w = tbl.weight AS px, "
                   "      PROBABILITY OF h_model.bmi = tbl.bmi "
                   "        UNDER h_model GIVEN h_model.w = tbl.weight AS py "
                   "    FROM ("
                   "      SELECT weight, age, bmi "
                   "      FROM (health_data DUPLICATE 50 TIMES "
                   "            GENERATIVE JOIN h_model "
                   "            GIVEN h_model.w = health_data.weight) AS joined) AS tbl)) "
                   "GROUP BY weight")
                  .table;
  // one row per weight group
  REQUIRE(out.rows.size() == 2);
  CHECK(out.schema.columns[0].name == "weight");
  CHECK(out.schema.columns[1].name == "mutual_information");
  // age and bmi are independent within each mixture component; conditioning
  // on w leaves a two-component mixture, so the CMI is small but positive
  for (const Row& r : out.rows) {
    CHECK(std::isfinite(r[1].as_real()));
    CHECK(r[1].as_real() > -0.05);
    CHECK(r[1].as_real() < 0.8);
  }
}

TEST_CASE("scalar queries render as one-cell tables") {
  Session s = demo_session();
  auto r = s.run("PROBABILITY OF h_model.w = \"low\" UNDER h_model");
  CHECK(r.was_scalar);
  REQUIRE(r.table.rows.size() == 1);
  CHECK(r.table.schema.columns[0].name == "value");
  CHECK(r.table.rows[0][0].as_real() == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("rendered CSV round-trips through the loader") {
  Session s = demo_session(3);
  auto r = s.run("GENERATE UNDER h_model LIMIT 4");
  std::string csv = write_csv(r.table);
  Table back = load_table_csv(csv, r.table.schema);
  CHECK(multiset_equal(back, r.table));
}

TEST_CASE("same invocation twice is byte-identical") {
  Session a = demo_session(7), b = demo_session(7);
  const char* q =
      "SELECT weight, age FROM (health_data GENERATIVE JOIN h_model "
      "GIVEN h_model.w = health_data.weight) AS j ORDER BY age LIMIT 3";
  CHECK(write_csv(a.run(q).table) == write_csv(b.run(q).table));
}

TEST_CASE("ORDER BY and LIMIT post-process the result") {
  Session s = demo_session(1);
  Table out = s.run("GENERATE UNDER h_model LIMIT 10 ORDER BY age DESC LIMIT 3").table;
  REQUIRE(out.rows.size() == 3);
  int age_col = out.schema.index_of("age");
  REQUIRE(age_col >= 0);
  CHECK(out.rows[0][age_col].as_real() >= out.rows[1][age_col].as_real());
  CHECK(out.rows[1][age_col].as_real() >= out.rows[2][age_col].as_real());

  CHECK_THROWS_AS(s.run("SELECT * FROM health_data ORDER BY nosuch"), EvalError);
}

TEST_CASE("output rows are canonically sorted for reproducibility") {
  Session s = demo_session();
  Table out = s.run("SELECT * FROM health_data").table;
  REQUIRE(out.rows.size() == 4);
  CHECK(out.rows[0][0].as_string() == "high");  // lexicographic on cell text
  CHECK(out.rows[3][0].as_string() == "low");
}

TEST_CASE("staged errors carry spans and stages") {
  Session s = demo_session();
  CHECK_THROWS_AS(s.run("SELECT FROM"), ParseError);
  CHECK_THROWS_AS(s.run("SELECT * FROM nosuch"), TypeError);
  CHECK_THROWS_AS(s.run("GENERATE UNDER h_model LIMIT nosuch.col"), TypeError);
  try {
    s.run("SELECT * FROM health_data WHERE health_data.weight > 1.0");
    FAIL("expected a type error");
  } catch (const TypeError& e) {
    CHECK(e.rule() == "string-comparison");
    CHECK(e.span().known());
  }
}

TEST_CASE("unsafe queries warn under approximate backends and error when strict") {
  Session s = demo_session();
  s.eval.options.particles = 50;
  // WHERE over a probability computed by the BN backend: unsafe
  const char* q =
      "SELECT * FROM (GENERATE UNDER bn_model LIMIT 4) AS g "
      "WHERE g.x < PROBABILITY OF bn_model.color = \"red\" UNDER bn_model";
  std::size_t before = s.diags.size();
  s.run(q);
  bool warned = false;
  for (std::size_t i = before; i < s.diags.size(); ++i)
    warned |= s.diags[i].message.find("not safe") != std::string::npos;
  CHECK(warned);

  Session strict = demo_session();
  strict.strict_safety = true;
  strict.eval.options.particles = 50;
  CHECK_THROWS_AS(strict.run(q), Error);

  // the same shape over the exact backend carries no warning
  Session exact = demo_session();
  std::size_t before2 = exact.diags.size();
  exact.run(
      "SELECT * FROM (GENERATE UNDER h_model LIMIT 4) AS g "
      "WHERE g.age < 100.0");
  for (std::size_t i = before2; i < exact.diags.size(); ++i)
    CHECK(exact.diags[i].message.find("not safe") == std::string::npos);
}

TEST_CASE("dump-lowered returns the printed plan") {
  Session s = demo_session();
  s.dump_lowered = true;
  auto r = s.run("SELECT weight FROM health_data WHERE health_data.weight = \"low\"");
  CHECK(r.lowered_text.find("filter") != std::string::npos);
  CHECK(r.lowered_text.find("map") != std::string::npos);
}

TEST_CASE("aligned text rendering") {
  Session s = demo_session();
  auto r = s.run("SELECT * FROM health_data");
  std::string text = render_aligned(r.table);
  CHECK(text.find("weight") != std::string::npos);
  CHECK(text.find("----") != std::string::npos);
}

TEST_CASE("template corpus: the worked analysis queries parse, typecheck and run") {
  // templates adapted to the bundled fixtures; every query must run end to end
  Session s;
  s.eval.options.seed = 31;
  s.load_table_files("health_data", fixture("health.csv"), fixture("health_schema.json"));
  s.load_model_file_as("h_model", fixture("health_model.json"));
  s.load_model_file_as("h_model2", fixture("health_model.json"));
  s.load_table_files("d", fixture("discrete.csv"), fixture("discrete_schema.json"));
  s.load_model_file_as("dm", fixture("discrete_model.json"));
  s.load_model_file_as("mx", fixture("mixture.json"));

  const char* corpus[] = {
      // entropy of a conditioned model
      "WITH h_model GIVEN h_model.age > 20.0 AS cm: "
      "SELECT AVG(log_p) AS entropy FROM ("
      "  SELECT 0.0 - LOG(p) AS log_p FROM ("
      "    SELECT PROBABILITY OF age AND bmi UNDER cm AS p "
      "    FROM (GENERATE UNDER cm LIMIT 40)))",
      // divergence estimate between two models
      "SELECT AVG(log_p_over_log_q) AS kl_p_q_estimate FROM ("
      "  SELECT LOG(p) - LOG(q) AS log_p_over_log_q FROM ("
      "    SELECT PROBABILITY OF * UNDER h_model AS p, "
      "           PROBABILITY OF * UNDER h_model2 AS q "
      "    FROM (GENERATE UNDER h_model LIMIT 40)))",
      // conditioning a model on the output of another
      "GENERATE UNDER h_model GIVEN (h_model.age > 10.0 * PROBABILITY OF mx.x > 0.9 UNDER mx) "
      "LIMIT 10",
      "GENERATE UNDER h_model LIMIT 10 GENERATIVE JOIN mx GIVEN mx.x > 0.0",
      // maximum a posteriori over observed weights
      "SELECT weight, PROBABILITY OF h_model.w = hd.weight UNDER h_model AS p "
      "FROM (DEDUP health_data) AS hd ORDER BY p DESC LIMIT 1",
      // anomaly detection: joint probability of each row, least likely first
      "SELECT *, PROBABILITY OF * UNDER dm AS pd FROM d ORDER BY ASC pd LIMIT 3",
      // prediction via a generative join
      "SELECT weight, age FROM (health_data GENERATIVE JOIN h_model "
      "GIVEN h_model.w = health_data.weight) AS j",
      // likely synthetic data
      "SELECT PROBABILITY OF * UNDER dm AS p, * FROM (GENERATE UNDER dm LIMIT 50) "
      "ORDER BY p DESC LIMIT 5",
      // conditional synthetic data generation
      "GENERATE UNDER dm GIVEN dm.color = \"r\" AND dm.heavy = true LIMIT 100",
      // imputation with a confidence filter
      "SELECT size, PROBABILITY OF size UNDER dm GIVEN * AS p_size FROM d "
      "WHERE d.p_size > 0.3",
      // conditional mutual information, compact primitive form
      "MUTUAL INFO ([h_model.age], [h_model.bmi], h_model.w = \"low\") UNDER h_model",
      // benchmark-style density queries without aliases
      "SELECT PROBABILITY OF h_model.age = 35.0 UNDER h_model GIVEN h_model.w = "
      "health_data.weight FROM health_data",
      "SELECT PROBABILITY OF dm.size = \"s\" AND dm.heavy = false UNDER dm "
      "GIVEN dm.color = d.color FROM d",
  };
  for (const char* q : corpus) {
    CAPTURE(q);
    Table out = s.run(q).table;
    CHECK(out.schema.columns.size() >= 1);
  }
}

TEST_SUITE_END();
