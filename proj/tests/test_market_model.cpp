#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "peakprice/market_model.hpp"

using namespace peakprice;

namespace {

Vector<double> vec(std::initializer_list<double> v) {
  Vector<double> out(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

Matrix<double> rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix<double> m(static_cast<Index>(r.size()), static_cast<Index>(r.begin()->size()));
  Index i = 0;
  for (const auto& row : r) {
    Index t = 0;
    for (double x : row) m(i, t++) = x;
    ++i;
  }
  return m;
}

struct RandomGame {
  MarketInstance<double> instance;
  ActionProfile<double> profile;
  BaselineLoad<double> baseline;
};

RandomGame random_game(std::mt19937_64& rng, Index n, Index periods, double delta = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  Vector<double> p(periods), b(periods), r(n);
  for (Index t = 0; t < periods; ++t) {
    p(t) = u(rng) / 10.0;
    b(t) = u(rng);
  }
  Matrix<double> a(n, periods);
  for (Index i = 0; i < n; ++i) {
    for (Index t = 0; t < periods; ++t) a(i, t) = u(rng);
    r(i) = a.row(i).sum();
  }
  MarketInstance<double> instance(r, p, double(periods) * p.maxCoeff() + 1.0 + u(rng), delta);
  return {instance, ActionProfile<double>(a, instance), BaselineLoad<double>(b)};
}

}  // namespace

TEST_CASE("instance validation and the flagged marker") {
  CHECK_THROWS_AS(MarketInstance<double>(vec({0.0}), vec({1.0}), 5.0), InvalidArgument);
  CHECK_THROWS_AS(MarketInstance<double>(vec({1.0}), vec({-1.0}), 5.0), InvalidArgument);
  CHECK_THROWS_AS(MarketInstance<double>(vec({1.0}), vec({1.0}), 0.0), InvalidArgument);
  CHECK_THROWS_AS(MarketInstance<double>(vec({1.0}), vec({1.0}), 5.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(MarketInstance<double>(Vector<double>(0), vec({1.0}), 5.0), InvalidArgument);

  const MarketInstance<double> flagged(vec({1.0}), vec({1.0, 2.0}), 4.0);
  CHECK(flagged.assumption_violated());
  CHECK_THROWS_AS(require_valid_assumption(flagged, "test"), AssumptionViolated);
  CHECK_FALSE(MarketInstance<double>(vec({1.0}), vec({1.0, 2.0}), 4.0001).assumption_violated());
}

TEST_CASE("action profiles enforce nonnegativity and requirements") {
  const MarketInstance<double> m(vec({6, 6}), vec({0, 0}), 1.0);
  CHECK_THROWS_AS(ActionProfile<double>(rows({{-1, 7}, {6, 0}})), InvalidArgument);
  CHECK_THROWS_AS(ActionProfile<double>(rows({{1, 4}, {6, 0}}), m), InvalidArgument);
  CHECK_THROWS_AS(ActionProfile<double>(rows({{6}, {6}}), m), InvalidArgument);
  CHECK_NOTHROW(ActionProfile<double>(rows({{1, 6}, {6, 0}}), m));  // >= r_i is allowed
  CHECK_THROWS_AS(BaselineLoad<double>(vec({1, -2})), InvalidArgument);
}

TEST_CASE("peak demand and coincident peak period") {
  const ActionProfile<double> fig1(rows({{5, 7}, {6, 6}}));
  const BaselineLoad<double> b(vec({8, 4}));
  const auto peak = peak_demand(fig1, b);
  CHECK(peak.value == 19.0);
  CHECK(peak.period == 0);
  CHECK(coincident_peak_period(fig1, b) == 0);

  const auto zero = peak_demand(ActionProfile<double>(rows({{0, 0}})), BaselineLoad<double>(vec({3, 9})));
  CHECK(zero.value == 9.0);
  CHECK(zero.period == 1);

  SUBCASE("ties go to the earliest period; a nudge moves the peak") {
    const ActionProfile<double> a(rows({{1, 1, 1}}));
    CHECK(coincident_peak_period(a, BaselineLoad<double>(vec({2, 2, 2}))) == 0);
    CHECK(coincident_peak_period(a, BaselineLoad<double>(vec({2, 2 + 1e-6, 2}))) == 1);
    CHECK(coincident_peak_period(a, BaselineLoad<double>(vec({2, 2, 2 + 1e-6}))) == 2);
  }

  CHECK_THROWS_AS(peak_demand(fig1, BaselineLoad<double>(vec({1, 2, 3}))), InvalidArgument);
}

TEST_CASE("peak demand matches an exhaustive scan and is monotone") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = random_game(rng, 3, 5);
    const auto peak = peak_demand(g.profile, g.baseline);
    double best = -1.0;
    Index at = -1;
    for (Index t = 0; t < 5; ++t) {
      double load = g.baseline(t);
      for (Index i = 0; i < 3; ++i) load += g.profile(i, t);
      if (load > best) {
        best = load;
        at = t;
      }
    }
    CHECK(peak.value == doctest::Approx(best).epsilon(1e-15));
    CHECK(peak.period == at);
    CHECK(coincident_peak_period(g.profile, g.baseline) == peak.period);

    Matrix<double> bumped = g.profile.consumption();
    bumped(trial % 3, trial % 5) += u(rng);
    CHECK(peak_demand(ActionProfile<double>(bumped), g.baseline).value >= peak.value);
    Vector<double> raised = g.baseline.loads();
    raised(trial % 5) += u(rng);
    CHECK(peak_demand(g.profile, BaselineLoad<double>(raised)).value >= peak.value);
  }
}

TEST_CASE("anytime peak cost") {
  const MarketInstance<double> m(vec({4}), vec({1, 2}), 10.0);
  const ActionProfile<double> a(rows({{3, 1}}), m);
  const auto c = cost_ap(0, a, m);
  CHECK(c.tou_component == 5.0);
  CHECK(c.demand_component == 30.0);
  CHECK(c.total == 35.0);
  CHECK(c.charged_period == 0);

  // Requirement relaxed: the plain constructor only checks nonnegativity.
  CHECK(cost_ap(0, ActionProfile<double>(rows({{0, 0}})), m).total == 0.0);
}

TEST_CASE("coincident peak cost") {
  const MarketInstance<double> m(vec({12, 12}), vec({0, 0}), 1.0);
  const ActionProfile<double> fig1(rows({{5, 7}, {6, 6}}), m);
  const BaselineLoad<double> b(vec({8, 4}));
  const auto c = cost_cp(0, fig1, b, m);
  CHECK(c.demand_component == 5.0);
  CHECK(c.charged_period == 0);

  const ActionProfile<double> off(rows({{0, 12}, {12, 0}}), m);
  CHECK(cost_cp(0, off, BaselineLoad<double>(vec({8, 0})), m).demand_component == 0.0);
}

TEST_CASE("progressive peak cost") {
  const MarketInstance<double> m(vec({4}), vec({0, 0}), 2.0, 2.0);
  const ActionProfile<double> a(rows({{3, 1}}), m);
  const BaselineLoad<double> b(vec({0, 0}));
  CHECK(cost_pp(0, a, b, m).total == 18.0);

  // Strict convexity of the demand term at delta = 2.
  const double lo = progressive_charge(1.0, 1.0, 2.0), hi = progressive_charge(3.0, 1.0, 2.0);
  CHECK(progressive_charge(2.0, 1.0, 2.0) < (lo + hi) / 2.0);
  CHECK(progressive_charge(2.0, 1.0, 2.0) == 4.0);
}

TEST_CASE("cost relations on random profiles") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    auto g = random_game(rng, 1 + trial % 4, 1 + trial % 6);
    for (Index i = 0; i < g.instance.n_players(); ++i) {
      const auto ap = cost_ap(i, g.profile, g.instance);
      const auto cp = cost_cp(i, g.profile, g.baseline, g.instance);
      const auto pp = cost_pp(i, g.profile, g.baseline, g.instance);
      CHECK(cp.total <= ap.total);
      CHECK(pp.total == cp.total);
      CHECK(pp.demand_component == cp.demand_component);
      for (const auto* c : {&ap, &cp, &pp}) {
        CHECK(c->total >= 0.0);
        CHECK(std::isfinite(c->total));
        CHECK(c->total == c->tou_component + c->demand_component);
      }
    }
  }
}

TEST_CASE("cost dispatch and index checks") {
  const MarketInstance<double> m(vec({4}), vec({0, 0}), 2.0, 2.0);
  const ActionProfile<double> a(rows({{3, 1}}), m);
  const BaselineLoad<double> b(vec({0, 0}));
  CHECK(cost(Mechanism::PP, 0, a, b, m).total == 18.0);
  CHECK(cost(Mechanism::CP, 0, a, b, m).total == 6.0);
  CHECK(cost(Mechanism::AP, 0, a, b, m).total == 6.0);
  CHECK_THROWS_AS(cost_ap(1, a, m), InvalidArgument);
  CHECK(parse_mechanism("pp") == Mechanism::PP);
  CHECK_THROWS_AS(parse_mechanism("XP"), InvalidArgument);
}

TEST_CASE("long double instantiation") {
  using LD = long double;
  Vector<LD> r(2), p(2), bl(2);
  r << 6, 6;
  p << 0, 0;
  bl << 8, 4;
  const MarketInstance<LD> m(r, p, LD(1));
  Matrix<LD> a(2, 2);
  a << 5, 7, 6, 6;
  const ActionProfile<LD> profile(a, m);
  CHECK(peak_demand(profile, BaselineLoad<LD>(bl)).value == LD(19));
  CHECK(cost_cp(0, profile, BaselineLoad<LD>(bl), m).demand_component == LD(5));
  CHECK(m.cast<double>().demand_rate() == 1.0);
}
