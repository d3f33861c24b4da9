#include <cmath>

#include "doctest.h"
#include "gensql/bayesnet.hpp"
#include "gensql/spe.hpp"

using namespace gensql;

namespace {

// The reference mixture as a network with an explicit cluster column:
//   z ~ Categorical(c0: .5, c1: .5)
//   color | z  tabular:      z=c0 -> (red .9, blue .1); z=c1 -> (red .2, blue .8)
//   x | z      linear-gauss: z=c0 -> N(0,1); z=c1 -> N(4,1)
std::shared_ptr<const BnSpec> mixture_bn() {
  BnSpec spec;
  spec.schema.columns = {{"z", BaseType::categorical({"c0", "c1"})},
                         {"color", BaseType::categorical({"red", "blue"})},
                         {"x", BaseType::real()}};
  BnNode z;
  z.col = 0;
  z.tabular = true;
  z.rows = {BnCpdRow{{}, {0.5, 0.5}, 0, {}, 1}};
  BnNode color;
  color.col = 1;
  color.parents = {0};
  color.tabular = true;
  color.rows = {BnCpdRow{{Value::text("c0")}, {0.9, 0.1}, 0, {}, 1},
                BnCpdRow{{Value::text("c1")}, {0.2, 0.8}, 0, {}, 1}};
  BnNode x;
  x.col = 2;
  x.parents = {0};
  x.tabular = false;
  x.rows = {BnCpdRow{{Value::text("c0")}, {}, 0.0, {}, 1.0},
            BnCpdRow{{Value::text("c1")}, {}, 4.0, {}, 1.0}};
  spec.nodes = {z, color, x};
  bn_validate(spec);
  return std::make_shared<const BnSpec>(std::move(spec));
}

// Two dependent bits for the chain-rule oracle: a ~ Bern(.3), b | a.
std::shared_ptr<const BnSpec> two_bit_bn() {
  BnSpec spec;
  spec.schema.columns = {{"a", BaseType::boolean()}, {"b", BaseType::boolean()}};
  BnNode a;
  a.col = 0;
  a.tabular = true;
  a.rows = {BnCpdRow{{}, {0.7, 0.3}, 0, {}, 1}};  // false, true
  BnNode b;
  b.col = 1;
  b.parents = {0};
  b.tabular = true;
  b.rows = {BnCpdRow{{Value::boolean(false)}, {0.9, 0.1}, 0, {}, 1},
            BnCpdRow{{Value::boolean(true)}, {0.2, 0.8}, 0, {}, 1}};
  spec.nodes = {a, b};
  bn_validate(spec);
  return std::make_shared<const BnSpec>(std::move(spec));
}

EventSet color_is(const char* label) {
  Rect r;
  r.sets[1] = ColSet::of_labels({Value::text(label)});
  return EventSet::disjoint_union({r});
}

EventSet x_above(double v) {
  Rect r;
  r.sets[2] = ColSet::of_interval(Interval{v, kInf, true, false});
  return EventSet::disjoint_union({r});
}

}  // namespace

TEST_SUITE_BEGIN("bayesnet");

TEST_CASE("validation enforces order, coverage and normalization") {
  BnSpec bad;
  bad.schema.columns = {{"a", BaseType::boolean()}, {"b", BaseType::boolean()}};
  BnNode b;
  b.col = 1;
  b.parents = {0};  // parent not yet defined
  b.tabular = true;
  b.rows = {BnCpdRow{{Value::boolean(false)}, {0.5, 0.5}, 0, {}, 1},
            BnCpdRow{{Value::boolean(true)}, {0.5, 0.5}, 0, {}, 1}};
  BnNode a;
  a.col = 0;
  a.tabular = true;
  a.rows = {BnCpdRow{{}, {0.7, 0.3}, 0, {}, 1}};
  bad.nodes = {b, a};
  CHECK_THROWS_AS(bn_validate(bad), Error);

  BnSpec unnorm;
  unnorm.schema.columns = {{"a", BaseType::boolean()}};
  BnNode n;
  n.col = 0;
  n.tabular = true;
  n.rows = {BnCpdRow{{}, {0.7, 0.4}, 0, {}, 1}};
  unnorm.nodes = {n};
  CHECK_THROWS_AS(bn_validate(unnorm), Error);

  BnSpec incomplete;
  incomplete.schema.columns = {{"a", BaseType::boolean()}, {"b", BaseType::boolean()}};
  BnNode a2 = a;
  BnNode b2;
  b2.col = 1;
  b2.parents = {0};
  b2.tabular = true;
  b2.rows = {BnCpdRow{{Value::boolean(false)}, {0.9, 0.1}, 0, {}, 1}};  // one combo missing
  incomplete.nodes = {a2, b2};
  CHECK_THROWS_AS(bn_validate(incomplete), Error);
}

TEST_CASE("ancestral: prior sample carries weight zero") {
  auto spec = mixture_bn();
  RngStream rng(1);
  WeightedRow wr = bn_ancestral(*spec, {}, {}, rng);
  CHECK(wr.logw == 0.0);
  CHECK_FALSE(wr.row[0].is_null());
  CHECK_FALSE(wr.row[2].is_null());
}

TEST_CASE("ancestral: fully pinned row scores the joint density (chain rule oracle)") {
  auto spec = two_bit_bn();
  RngStream rng(2);
  // enumerate all four cells; the oracle multiplies the two conditionals
  const double pa[2] = {0.7, 0.3};
  const double pb[2][2] = {{0.9, 0.1}, {0.2, 0.8}};
  for (int av = 0; av < 2; ++av)
    for (int bv = 0; bv < 2; ++bv) {
      Assignment pins;
      pins.pin(0, Value::boolean(av == 1));
      pins.pin(1, Value::boolean(bv == 1));
      WeightedRow wr = bn_ancestral(*spec, pins, {}, rng);
      CHECK(std::exp(wr.logw) == doctest::Approx(pa[av] * pb[av][bv]).epsilon(1e-12));
    }
}

TEST_CASE("ancestral: violating the event gives weight -inf") {
  auto spec = mixture_bn();
  RngStream rng(3);
  Rect impossible;
  impossible.sets[2] = ColSet::of_interval(Interval{1e9, kInf, true, false});
  std::vector<EventSet> evs = {EventSet::disjoint_union({impossible})};
  WeightedRow wr = bn_ancestral(*spec, {}, evs, rng);
  CHECK(wr.logw == kNegInf);
}

TEST_CASE("simulate returns the all-null row when every weight vanishes") {
  auto spec = mixture_bn();
  BnModel m(spec, 50);
  Rect impossible;
  impossible.sets[1] = ColSet::of_labels({Value::text("green")});  // not in the support
  ModelHandle cond = m.condition({}, EventSet::disjoint_union({impossible}));
  RngStream rng(4);
  Row r = cond->simulate(rng);
  for (const Value& v : r) CHECK(v.is_null());
  CHECK(cond->prob(color_is("red"), rng) == 0.0);
}

TEST_CASE("prob without conditioning converges to the exact marginal") {
  BnModel m(mixture_bn(), 20000);
  RngStream rng(5);
  double p = m.prob(color_is("red"), rng);
  double se = std::sqrt(0.55 * 0.45 / 20000.0);
  CHECK(std::fabs(p - 0.55) <= 3 * se);
}

TEST_CASE("prob of the conditioning event itself is exactly one") {
  BnModel m(mixture_bn(), 500);
  ModelHandle cond = m.condition({}, x_above(4.0));
  RngStream rng(6);
  CHECK(cond->prob(x_above(4.0), rng) == 1.0);
}

TEST_CASE("conditioned prob matches the exact mixture value") {
  // GIVEN color = blue: P(x > 4) = (1/9)(1 - Phi(4)) + (8/9)(1/2)
  BnModel m(mixture_bn(), 20000);
  Assignment pins;
  pins.pin(1, Value::text("blue"));
  ModelHandle cond = m.condition(pins, EventSet::full());
  RngStream rng(7);
  double p = cond->prob(x_above(4.0), rng);
  double expected = (1.0 / 9) * (1 - normal_cdf(4.0)) + (8.0 / 9) * 0.5;
  // self-normalized importance estimate; generous 4-sigma-style band
  CHECK(std::fabs(p - expected) < 0.02);
}

TEST_CASE("logpdf converges to the exact mixture density") {
  BnModel m(mixture_bn(), 50000);
  Assignment target;
  target.pin(2, Value::real(0.0));
  RngStream rng(8);
  double lp = m.logpdf(target, rng);
  double exact = std::log(0.5 * normal_pdf(0, 0, 1) + 0.5 * normal_pdf(0, 4, 1));
  CHECK(std::fabs(lp - exact) < 0.02);
}

TEST_CASE("logpdf of a contradicting target under conditioning is -inf") {
  BnModel m(mixture_bn(), 100);
  Assignment pins;
  pins.pin(1, Value::text("blue"));
  ModelHandle cond = m.condition(pins, EventSet::full());
  Assignment target;
  target.pin(1, Value::text("red"));
  RngStream rng(9);
  CHECK(cond->logpdf(target, rng) == kNegInf);
}

TEST_CASE("estimates improve with the particle budget (seed-averaged RMSE)") {
  auto spec = mixture_bn();
  const double exact = 0.55;
  double rmse[3] = {0, 0, 0};
  const int budgets[3] = {100, 1000, 10000};
  const int seeds = 12;
  for (int b = 0; b < 3; ++b) {
    double se = 0.0;
    for (int s = 0; s < seeds; ++s) {
      BnModel m(spec, budgets[b]);
      RngStream rng(1000 + s);
      double p = m.prob(color_is("red"), rng);
      se += (p - exact) * (p - exact);
    }
    rmse[b] = std::sqrt(se / seeds);
  }
  CHECK(rmse[0] > rmse[1]);
  CHECK(rmse[1] > rmse[2]);
}

TEST_CASE("event partition probabilities sum to one within tolerance") {
  BnModel m(mixture_bn(), 20000);
  RngStream r1(44), r2(44);
  double red = m.prob(color_is("red"), r1);
  double blue = m.prob(color_is("blue"), r2);
  // same stream seed: the indicator split is exact over the shared draws
  CHECK(red + blue == doctest::Approx(1.0).epsilon(1e-12));

  ModelHandle cond = m.condition({}, x_above(2.0));
  RngStream r3(45), r4(45);
  double a = cond->prob(color_is("red"), r3);
  double b = cond->prob(color_is("blue"), r4);
  CHECK(a + b == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_SUITE_END();
