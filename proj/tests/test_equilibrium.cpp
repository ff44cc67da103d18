#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <optional>
#include <random>

#include "peakprice/equilibrium_peak.hpp"

using namespace peakprice;

namespace {

Vector<double> vec(std::initializer_list<double> v) {
  Vector<double> out(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

const MarketInstance<double> kExample1(vec({6, 6}), vec({0, 0}), 1.0);
const BaselineLoad<double> kExample1Baseline(vec({12, 0}));

struct Case {
  MarketInstance<double> instance;
  BaselineLoad<double> baseline;
};

Case random_case(std::mt19937_64& rng, bool uniform_prices) {
  std::uniform_int_distribution<int> n_dist(1, 4), t_dist(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Index n = n_dist(rng), periods = t_dist(rng);
  Vector<double> p(periods), b(periods), r(n);
  for (Index t = 0; t < periods; ++t) {
    p(t) = uniform_prices ? 1.0 : 0.2 + u(rng);
    b(t) = u(rng) < 0.2 ? 0.0 : 10.0 * u(rng);
  }
  for (Index i = 0; i < n; ++i) r(i) = 0.5 + 5.0 * u(rng);
  return {MarketInstance<double>(r, p, double(periods) * p.maxCoeff() * (1.0 + u(rng)) + 0.1),
          BaselineLoad<double>(b)};
}

}  // namespace

TEST_CASE("epsilon schedule") {
  const auto s = EpsilonSchedule::standard();
  CHECK(s.values().size() == 6);
  CHECK(s.final_value() == 1e-6);
  CHECK_THROWS_AS(EpsilonSchedule({0.1, 0.1}), InvalidArgument);
  CHECK_THROWS_AS(EpsilonSchedule({0.1, -1.0}), InvalidArgument);
  CHECK_THROWS_AS(EpsilonSchedule({}), InvalidArgument);
}

TEST_CASE("deterministic closed forms") {
  CHECK(closed_form_peak_ap_deterministic(kExample1, kExample1Baseline) == 18.0);
  CHECK(closed_form_peak_cp_deterministic(kExample1, kExample1Baseline) == 12.0);
  CHECK(closed_form_peak_pp_deterministic(kExample1.with_delta(2.0), kExample1Baseline) == 12.0);

  const BaselineLoad<double> zero(vec({0, 0}));
  CHECK(closed_form_peak_ap_deterministic(kExample1, zero) == 6.0);
  CHECK(closed_form_peak_cp_deterministic(kExample1, zero) == 6.0);

  const MarketInstance<double> three(vec({6, 6}), vec({1, 1, 1}), 4.0);
  CHECK(closed_form_peak_cp_deterministic(three, BaselineLoad<double>(vec({12, 0, 0}))) == 12.0);

  const MarketInstance<double> flagged(vec({6, 6}), vec({1, 1}), 2.0);
  CHECK_THROWS_AS(closed_form_peak_ap_deterministic(flagged, kExample1Baseline), AssumptionViolated);
  CHECK_THROWS_AS(closed_form_peak_cp_deterministic(flagged, kExample1Baseline), AssumptionViolated);
  CHECK_THROWS_AS(closed_form_peak_pp_deterministic(flagged, kExample1Baseline), AssumptionViolated);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> d(1.0, 8.0);
  for (int trial = 0; trial < 500; ++trial) {
    auto c = random_case(rng, trial % 2 == 0);
    const auto pp = c.instance.with_delta(d(rng));
    CHECK(closed_form_peak_pp_deterministic(pp, c.baseline) ==
          closed_form_peak_cp_deterministic(c.instance, c.baseline));
    CHECK(closed_form_peak_cp_deterministic(c.instance, c.baseline) <=
          closed_form_peak_ap_deterministic(c.instance, c.baseline));

    // AP closed form equals the peak of everyone's best response.
    Matrix<double> a(c.instance.n_players(), c.instance.n_periods());
    for (Index i = 0; i < a.rows(); ++i) a.row(i) = best_response_ap(i, c.instance).transpose();
    CHECK(peak_demand(ActionProfile<double>(a), c.baseline).value ==
          doctest::Approx(closed_form_peak_ap_deterministic(c.instance, c.baseline)).epsilon(1e-12));
  }
}

TEST_CASE("delta gap") {
  const auto g = delta_gap(kExample1, kExample1Baseline);
  CHECK(g.value == 0.0);
  CHECK_FALSE(g.surplus());
  CHECK(g.first_max_period == 0);
  const MarketInstance<double> three(vec({6, 6}), vec({1, 1, 1}), 4.0);
  CHECK(delta_gap(three, BaselineLoad<double>(vec({12, 0, 0}))).value == 12.0);
}

TEST_CASE("constructive profile, surplus branch") {
  const MarketInstance<double> three(vec({6, 6}), vec({1, 1, 1}), 4.0);
  const BaselineLoad<double> b(vec({12, 0, 0}));
  const double eps = 1e-3;
  const auto c = construct_cp_equilibrium(three, b, eps);
  const double eta = eps / 3.0;
  CHECK(c.surplus_branch);
  CHECK(c.eta == doctest::Approx(eta));
  CHECK(c.profile(0, 0) == 0.0);
  CHECK(c.profile(0, 1) == 6.0);
  CHECK(c.profile(0, 2) == 0.0);
  CHECK(c.profile(1, 0) == 0.0);
  CHECK(c.profile(1, 1) == doctest::Approx(6.0 - eta).epsilon(1e-15));
  CHECK(c.profile(1, 2) == doctest::Approx(eta).epsilon(1e-12));
  CHECK(peak_demand(c.profile, b).value == 12.0);
  CHECK(verify_epsilon_nash_deterministic(c.profile, b, three, Mechanism::CP, eps).holds);

  CHECK_THROWS_AS(construct_cp_profile_deterministic(three, b, 100.0), InfeasibleEpsilon);
}

TEST_CASE("constructive profile, non-surplus branch") {
  const double eps = 1e-3;
  const auto c = construct_cp_equilibrium(kExample1, kExample1Baseline, eps);
  const double eta = eps / 2.0;
  CHECK_FALSE(c.surplus_branch);
  for (Index i = 0; i < 2; ++i) {
    CHECK(c.profile(i, 0) == doctest::Approx(eta / 4.0).epsilon(1e-12));
    CHECK(c.profile(i, 1) == doctest::Approx(6.0 - eta / 4.0).epsilon(1e-15));
  }
  const auto load = aggregate_load(c.profile, kExample1Baseline);
  CHECK(load(0) == doctest::Approx(12.0 + eta / 2.0).epsilon(1e-15));
  CHECK(load(1) == doctest::Approx(12.0 - eta / 2.0).epsilon(1e-15));
  CHECK(verify_epsilon_nash_deterministic(c.profile, kExample1Baseline, kExample1, Mechanism::CP, eps).holds);

  SUBCASE("uniform baseline: uniform aggregate plus eta at the first period") {
    const MarketInstance<double> m(vec({3, 9}), vec({0.5, 0.5, 0.5}), 2.0);
    const BaselineLoad<double> flat(vec({5, 5, 5}));
    const auto u = construct_cp_equilibrium(m, flat, 1e-2);
    const auto agg = aggregate_load(u.profile, flat);
    CHECK(agg(1) == doctest::Approx(agg(2)).epsilon(1e-15));
    CHECK(agg(0) - agg(1) == doctest::Approx(u.eta).epsilon(1e-9));
    CHECK(agg.sum() == doctest::Approx(27.0));
  }

  SUBCASE("two max periods with a zero gap fall back to the water level") {
    const MarketInstance<double> m(vec({8}), vec({0, 0, 0}), 1.0);
    const BaselineLoad<double> b2(vec({4, 4, 0}));
    const auto w = construct_cp_equilibrium(m, b2, 1e-2);
    CHECK(w.profile.consumption().minCoeff() >= 0.0);
    CHECK(w.profile.row(0).sum() == doctest::Approx(8.0));
    CHECK(verify_epsilon_nash_deterministic(w.profile, b2, m, Mechanism::CP, 1e-2).holds);
  }
}

TEST_CASE("constructive profiles are epsilon-Nash and converge") {
  std::mt19937_64 rng(29);
  const EpsilonSchedule schedule = EpsilonSchedule::standard();
  int surplus = 0, deficit = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto c = random_case(rng, trial % 3 == 0);
    std::optional<double> last;
    for (double eps : schedule.values()) {
      std::optional<CpConstruction<double>> built;
      try {
        built = construct_cp_equilibrium(c.instance, c.baseline, eps);
      } catch (const InfeasibleEpsilon&) {
        last.reset();
        continue;
      }
      if (eps == 1e-6) ++(built->surplus_branch ? surplus : deficit);
      CHECK(verify_epsilon_nash_deterministic(built->profile, c.baseline, c.instance,
                                              Mechanism::CP, eps)
                .holds);
      last = peak_demand(built->profile, c.baseline).value;
    }
    REQUIRE(last);
    CHECK(std::abs(*last - closed_form_peak_cp_deterministic(c.instance, c.baseline)) <
          1e-3 * c.instance.total_requirement());
  }
  CHECK(surplus > 0);
  CHECK(deficit > 0);
}

TEST_CASE("exact deviation bound against a grid") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto c = random_case(rng, false);
    const Index n = c.instance.n_players(), periods = c.instance.n_periods();
    if (periods > 4) continue;
    Matrix<double> a(n, periods);
    for (Index i = 0; i < n; ++i) {
      for (Index t = 0; t < periods; ++t) a(i, t) = u(rng);
      a.row(i) *= c.instance.requirement(i) / a.row(i).sum();
    }
    const ActionProfile<double> profile(a, c.instance);
    for (Mechanism m : {Mechanism::CP, Mechanism::PP}) {
      const auto inst = m == Mechanism::PP ? c.instance.with_delta(2.0) : c.instance;
      const auto bound = best_deviation_deterministic(m, 0, profile, c.baseline, inst);
      CHECK(bound.action.sum() == doctest::Approx(inst.requirement(0)));
      // Search over the simplex: nothing beats the bound.
      const int k = 12;
      std::vector<int> parts(static_cast<std::size_t>(periods), 0);
      std::function<void(Index, int)> rec = [&](Index t, int left) {
        if (t == periods - 1) {
          parts[static_cast<std::size_t>(t)] = left;
          Vector<double> x(periods);
          for (Index s = 0; s < periods; ++s)
            x(s) = inst.requirement(0) * parts[static_cast<std::size_t>(s)] / double(k);
          CHECK(bound.cost <= cost(m, 0, profile.with_row(0, x), c.baseline, inst).total + 1e-9);
          return;
        }
        for (int j = 0; j <= left; ++j) {
          parts[static_cast<std::size_t>(t)] = j;
          rec(t + 1, left - j);
        }
      };
      rec(0, k);
    }
  }
}

TEST_CASE("a crowded profile is not an equilibrium") {
  const MarketInstance<double> m(vec({6, 6}), vec({0, 0}), 1.0);
  Matrix<double> a(2, 2);
  a << 6, 0, 6, 0;
  const ActionProfile<double> crowded(a, m);
  const auto check = verify_epsilon_nash_deterministic(crowded, kExample1Baseline, m, Mechanism::CP, 1e-6);
  CHECK_FALSE(check.holds);
  CHECK(check.worst_gain > 1.0);
  CHECK(check.deviating_player.has_value());

  const MarketInstance<double> single(vec({2}), vec({1}), 3.0);
  Matrix<double> one(1, 1);
  one << 2;
  const auto trivial = verify_epsilon_nash(ActionProfile<double>(one, single),
                                           BaselineLoad<double>(vec({4})), single, Mechanism::CP,
                                           1e-6, VerifyMode::Exact);
  CHECK(trivial.holds);
  CHECK(trivial.worst_gain <= 1e-12);
}

TEST_CASE("progressive pricing may reward deviating into a cheap max period") {
  // The surplus construction leaves max-baseline periods empty. Under
  // (a)^delta the marginal demand charge there is zero, so with a cheaper
  // max period a small shift pays off.
  const MarketInstance<double> m(vec({6}), vec({0, 1, 1}), 4.0, 2.0);
  const BaselineLoad<double> b(vec({12, 0, 0}));
  const auto profile = construct_cp_profile_deterministic(m, b, 1e-4);
  CHECK(verify_epsilon_nash_deterministic(profile, b, m, Mechanism::CP, 1e-4).holds);
  const auto pp = verify_epsilon_nash_deterministic(profile, b, m, Mechanism::PP, 1e-4);
  CHECK_FALSE(pp.holds);
  CHECK(pp.worst_gain == doctest::Approx(1.0 / 16.0).epsilon(1e-3));
}

TEST_CASE("equilibrium_peak dispatch") {
  const EpsilonSchedule schedule = EpsilonSchedule::standard();
  const auto cp = equilibrium_peak(kExample1, kExample1Baseline, Mechanism::CP, schedule);
  const auto ap = equilibrium_peak(kExample1, kExample1Baseline, Mechanism::AP, schedule);
  CHECK(cp.peak == 12.0);
  CHECK(ap.peak == 18.0);
  CHECK(ap.peak / cp.peak == 1.5);
  CHECK(cp.method == Method::ClosedForm);
  REQUIRE(cp.witness_profile);
  CHECK(peak_demand(*cp.witness_profile, *cp.witness_baseline).value ==
        doctest::Approx(12.0).epsilon(1e-6));
  REQUIRE(cp.verification);
  CHECK(cp.verification->holds);

  AnalysisOptions constructive;
  constructive.prefer_constructive = true;
  const auto built = equilibrium_peak(kExample1, kExample1Baseline, Mechanism::CP, schedule, constructive);
  CHECK(built.method == Method::Constructive);
  REQUIRE(built.schedule_peaks.size() == 6);
  for (std::size_t k = 1; k < built.schedule_peaks.size(); ++k)
    CHECK(built.schedule_peaks[k] <= built.schedule_peaks[k - 1]);
  CHECK(std::abs(built.schedule_peaks[5] - built.schedule_peaks[4]) < 1e-3 * 12.0);

  // The closed form ignores the schedule.
  const auto coarse = equilibrium_peak(kExample1, kExample1Baseline, Mechanism::CP, EpsilonSchedule({0.5}));
  CHECK(coarse.peak == cp.peak);

  const MarketInstance<double> flagged(vec({6, 6}), vec({1, 1}), 2.0);
  CHECK_THROWS_AS(equilibrium_peak(flagged, kExample1Baseline, Mechanism::CP, schedule), AssumptionViolated);

  const MarketInstance<double> tight(vec({6}), vec({1, 1, 1}), 4.0);
  CHECK_THROWS_AS(equilibrium_peak(tight, BaselineLoad<double>(vec({12, 0, 0})), Mechanism::CP,
                                   EpsilonSchedule({100.0}), constructive),
                  InfeasibleEpsilon);
}

TEST_CASE("search-based verification modes") {
  const auto c = construct_cp_profile_deterministic(kExample1, kExample1Baseline, 1e-3);
  for (VerifyMode mode : {VerifyMode::Grid, VerifyMode::MonteCarlo}) {
    const auto ok = verify_epsilon_nash(c, kExample1Baseline, kExample1, Mechanism::CP, 1e-3, mode);
    CHECK(ok.holds);
    CHECK_FALSE(ok.certified);
    Matrix<double> a(2, 2);
    a << 6, 0, 6, 0;
    const auto bad = verify_epsilon_nash(ActionProfile<double>(a, kExample1), kExample1Baseline,
                                         kExample1, Mechanism::CP, 1e-3, mode);
    CHECK_FALSE(bad.holds);
    CHECK(bad.worst_gain > 1.0);
  }
  Matrix<double> short_of(2, 2);
  short_of << 1, 1, 6, 0;
  CHECK_THROWS_AS(verify_epsilon_nash(ActionProfile<double>(short_of), kExample1Baseline, kExample1,
                                      Mechanism::CP, 1e-3, VerifyMode::Exact),
                  Infeasible);
  CHECK(parse_verify_mode("grid") == VerifyMode::Grid);
  CHECK_THROWS_AS(parse_verify_mode("fuzzy"), InvalidArgument);
}
