#pragma once

// Per-player optimal responses: capped water-filling, the spreading analysis
// behind anytime-peak allocations, cap-constrained fills for coincident peak
// under known baselines, and the responses to a fixed peak-period
// distribution pi (linear for CP, KKT for PP).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "peakprice/market_model.hpp"

namespace peakprice {

/// Time-of-use rates sorted ascending. Stable, so equal rates keep their
/// original period order.
template <typename Scalar = double>
class SortedPriceView {
 public:
  explicit SortedPriceView(const Vector<Scalar>& rates) : order_(rates.size()) {
    std::iota(order_.begin(), order_.end(), Index{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](Index a, Index b) { return rates(a) < rates(b); });
    sorted_rates_.resize(rates.size());
    for (Index k = 0; k < rates.size(); ++k) sorted_rates_(k) = rates(order_[k]);
  }

  /// order()[k] is the original period of the k-th cheapest rate.
  const std::vector<Index>& order() const { return order_; }
  const Vector<Scalar>& sorted_rates() const { return sorted_rates_; }
  Index size() const { return sorted_rates_.size(); }

  /// Maps a vector indexed in sorted order back to original period order.
  Vector<Scalar> to_original(const Vector<Scalar>& sorted_values) const {
    Vector<Scalar> out(sorted_values.size());
    for (Index k = 0; k < sorted_values.size(); ++k) out(order_[k]) = sorted_values(k);
    return out;
  }

  Vector<Scalar> to_sorted(const Vector<Scalar>& original) const {
    Vector<Scalar> out(original.size());
    for (Index k = 0; k < original.size(); ++k) out(k) = original(order_[k]);
    return out;
  }

 private:
  std::vector<Index> order_;
  Vector<Scalar> sorted_rates_;
};

/// Allocation a^t = [min(m, r - m t)]_+ (t = 0..T-1, in sorted-price order):
/// fills each period up to the cap m until r is used up.
template <typename Scalar>
Vector<Scalar> water_fill_capped(Scalar r, Scalar m, Index periods) {
  using std::max;
  using std::min;
  if (periods <= 0) throw InvalidArgument("water_fill_capped: need at least one period");
  if (!(r > Scalar(0)) || !(m > Scalar(0)))
    throw InvalidArgument("water_fill_capped: r and m must be positive");
  if (m * Scalar(periods) < r)
    throw Infeasible("water_fill_capped: cap m < r / T cannot hold the requirement");
  Vector<Scalar> a(periods);
  for (Index t = 0; t < periods; ++t) a(t) = max(Scalar(0), min(m, r - m * Scalar(t)));
  return a;
}

/// Anytime-peak cost of the capped water-fill, in closed form:
/// m (p^D + sum_{s <= t'} p^s) + p^{t'+1} (r - m t') with t' = floor(r / m).
/// sorted_rates must be ascending.
template <typename Scalar>
Scalar water_fill_cost(Scalar r, Scalar m, const Vector<Scalar>& sorted_rates,
                       Scalar demand_rate) {
  using std::floor;
  const Index periods = sorted_rates.size();
  const Index full = std::min<Index>(static_cast<Index>(floor(r / m)), periods);
  const Scalar remainder = r - m * Scalar(full);
  Scalar cost = m * (demand_rate + sorted_rates.head(full).sum());
  if (full < periods && remainder > Scalar(0)) cost += sorted_rates(full) * remainder;
  return cost;
}

/// Average cost per period h(t) = (p^D + sum_{s<=t} p^s) / t over sorted rates.
template <typename Scalar = double>
struct SpreadAnalysis {
  Vector<Scalar> h_values;  ///< h_values(k) is h(k + 1)
  Index minimizer = 0;      ///< smallest spreading width t* in 1..T minimizing h
  bool unimodal = false;
  SortedPriceView<Scalar> prices;
};

namespace detail {

template <typename Scalar>
bool nearly_le(Scalar a, Scalar b) {
  using std::abs;
  using std::max;
  const Scalar tol = Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
                     max({Scalar(1), abs(a), abs(b)});
  return a <= b + tol;
}

}  // namespace detail

template <typename Scalar>
SpreadAnalysis<Scalar> spread_analysis(const MarketInstance<Scalar>& instance) {
  SpreadAnalysis<Scalar> out{Vector<Scalar>(instance.n_periods()), 0, false,
                             SortedPriceView<Scalar>(instance.tou_rates())};
  const auto& p = out.prices.sorted_rates();
  const Index periods = p.size();
  Scalar cumulative = instance.demand_rate();
  for (Index k = 0; k < periods; ++k) {
    cumulative += p(k);
    out.h_values(k) = cumulative / Scalar(k + 1);
  }
  const auto& h = out.h_values;
  out.unimodal = true;
  for (Index k = 0; k + 2 < periods; ++k) {
    if (h(k) <= h(k + 1) && !detail::nearly_le(h(k + 1), h(k + 2))) out.unimodal = false;
  }
  if (!out.unimodal) throw InternalError("spread_analysis: h(t) is not unimodal");
  out.minimizer = argmin_earliest(h) + 1;
  return out;
}

/// Anytime-peak best response: r_i / t* on the t* cheapest periods. Under
/// p^D > T max p^t, t* = T and this is the uniform split, independent of the
/// other players and of the baseline.
template <typename Scalar>
Vector<Scalar> best_response_ap(Index i, const MarketInstance<Scalar>& instance) {
  require_valid_assumption(instance, "best_response_ap");
  if (i < 0 || i >= instance.n_players()) throw InvalidArgument("player index out of range");
  const auto spread = spread_analysis(instance);
  const Index width = spread.minimizer;
  Vector<Scalar> sorted = Vector<Scalar>::Zero(instance.n_periods());
  sorted.head(width).setConstant(instance.requirement(i) / Scalar(width));
  return spread.prices.to_original(sorted);
}

template <typename Scalar>
struct CappedFill {
  Vector<Scalar> allocation;
  Scalar unfilled;
};

/// Puts `amount` into periods in the given order, each up to max(0, caps(t)).
template <typename Scalar>
CappedFill<Scalar> fill_under_caps(const Vector<Scalar>& caps, Scalar amount,
                                   const std::vector<Index>& order) {
  using std::max;
  using std::min;
  CappedFill<Scalar> out{Vector<Scalar>::Zero(caps.size()), amount};
  for (Index t : order) {
    if (!(out.unfilled > Scalar(0))) break;
    const Scalar take = min(max(Scalar(0), caps(t)), out.unfilled);
    out.allocation(t) = take;
    out.unfilled -= take;
  }
  out.unfilled = max(Scalar(0), out.unfilled);
  return out;
}

/// Cheapest way for player i to meet r_i while keeping every period's
/// aggregate load at or below peak_cap, given the others' consumption.
template <typename Scalar>
Vector<Scalar> best_response_deterministic_cp(Index i, const ActionProfile<Scalar>& profile,
                                              const BaselineLoad<Scalar>& baseline,
                                              const MarketInstance<Scalar>& instance,
                                              Scalar peak_cap) {
  detail::check_player(profile, instance, i);
  detail::check_periods<Scalar>(baseline.n_periods(), instance.n_periods(),
                                "best_response_deterministic_cp");
  const Vector<Scalar> others = profile.flexible_load() - profile.row(i).transpose();
  const Vector<Scalar> headroom =
      (Vector<Scalar>::Constant(others.size(), peak_cap) - baseline.loads() - others)
          .cwiseMax(Scalar(0));
  const Scalar r = instance.requirement(i);
  if (!detail::meets_requirement(headroom.sum(), r))
    throw Infeasible("best_response_deterministic_cp: headroom under the peak cap is below r_i");
  const SortedPriceView<Scalar> prices(instance.tou_rates());
  return fill_under_caps(headroom, r, prices.order()).allocation;
}

namespace detail {

template <typename Scalar>
void check_peak_probabilities(const Vector<Scalar>& pi, Index periods) {
  using std::abs;
  check_periods<Scalar>(pi.size(), periods, "peak probabilities");
  if (!all_finite(pi) || (pi.array() < Scalar(0)).any())
    throw InvalidArgument("peak probabilities must be finite and nonnegative");
  if (abs(pi.sum() - Scalar(1)) > Scalar(1e-6))
    throw InvalidArgument("peak probabilities must sum to 1");
}

template <typename Scalar>
bool uniform_rates(const Vector<Scalar>& rates) {
  return (rates.array() == rates(0)).all();
}

}  // namespace detail

/// Coincident-peak response to an action-independent peak distribution pi:
/// everything on the earliest period minimizing p^t + p^D pi^t.
template <typename Scalar>
Vector<Scalar> best_response_cp_random(Index i, const Vector<Scalar>& pi,
                                       const MarketInstance<Scalar>& instance) {
  detail::check_peak_probabilities(pi, instance.n_periods());
  if (i < 0 || i >= instance.n_players()) throw InvalidArgument("player index out of range");
  const Vector<Scalar> coefficient = instance.tou_rates() + instance.demand_rate() * pi;
  Vector<Scalar> a = Vector<Scalar>::Zero(instance.n_periods());
  a(argmin_earliest(coefficient)) = instance.requirement(i);
  return a;
}

/// Progressive-peak response to an action-independent peak distribution pi,
/// minimizing sum_t p^t a^t + p^D sum_t pi^t (a^t)^delta.
///
/// With equal time-of-use rates the KKT point is closed form,
/// a^t = r_i w_t / sum_s w_s with w_t = (pi_min / pi^t)^(1/(delta-1)).
/// Otherwise the multiplier nu is found by bisection.
template <typename Scalar>
Vector<Scalar> best_response_pp_random(Index i, const Vector<Scalar>& pi,
                                       const MarketInstance<Scalar>& instance) {
  using std::max;
  using std::pow;
  detail::check_peak_probabilities(pi, instance.n_periods());
  if (i < 0 || i >= instance.n_players()) throw InvalidArgument("player index out of range");
  if (instance.delta() == Scalar(1))
    throw InvalidArgument("best_response_pp_random needs delta > 1; use best_response_cp_random");

  const Index periods = instance.n_periods();
  const Scalar r = instance.requirement(i);
  const Scalar inv = Scalar(1) / (instance.delta() - Scalar(1));
  const Vector<Scalar>& p = instance.tou_rates();
  Vector<Scalar> a = Vector<Scalar>::Zero(periods);

  if (detail::uniform_rates(p)) {
    const Scalar pi_min = pi.minCoeff();
    if (pi_min == Scalar(0)) {
      a(argmin_earliest(pi)) = r;
      return a;
    }
    Vector<Scalar> w(periods);
    for (Index t = 0; t < periods; ++t) w(t) = pow(pi_min / pi(t), inv);
    return r * w / w.sum();
  }

  // Stationarity: p^t + delta p^D pi^t (a^t)^(delta-1) = nu on the support.
  const Scalar scale = instance.delta() * instance.demand_rate();
  auto level = [&](Scalar nu, Index t) {
    const Scalar excess = nu - p(t);
    return excess > Scalar(0) ? pow(excess / (scale * pi(t)), inv) : Scalar(0);
  };
  auto positive_mass = [&](Scalar nu) {
    Scalar s(0);
    for (Index t = 0; t < periods; ++t)
      if (pi(t) > Scalar(0)) s += level(nu, t);
    return s;
  };

  // Periods with pi^t = 0 absorb any amount at marginal cost p^t.
  Index sink = -1;
  for (Index t = 0; t < periods; ++t)
    if (pi(t) == Scalar(0) && (sink < 0 || p(t) < p(sink))) sink = t;

  if (sink >= 0 && positive_mass(p(sink)) <= r) {
    for (Index t = 0; t < periods; ++t)
      if (pi(t) > Scalar(0)) a(t) = level(p(sink), t);
    a(sink) = max(Scalar(0), r - a.sum());
    return a;
  }

  Scalar lo = p.minCoeff();
  Scalar step = max(Scalar(1), instance.demand_rate());
  Scalar hi = lo + step;
  while (positive_mass(hi) < r) {
    lo = hi;
    step *= Scalar(2);
    hi += step;
  }
  for (int iter = 0; iter < 4096; ++iter) {
    const Scalar mid = lo + (hi - lo) / Scalar(2);
    if (mid <= lo || mid >= hi) break;
    (positive_mass(mid) < r ? lo : hi) = mid;
  }
  for (Index t = 0; t < periods; ++t)
    if (pi(t) > Scalar(0)) a(t) = level(hi, t);
  return a * (r / a.sum());
}

/// Expected bill of one action when the peak period is drawn from pi
/// independently of actions. AP ignores pi.
template <typename Scalar>
Scalar expected_cost_given_pi(Mechanism m, const Vector<Scalar>& action, const Vector<Scalar>& pi,
                              const MarketInstance<Scalar>& instance) {
  detail::check_periods<Scalar>(action.size(), instance.n_periods(), "expected_cost_given_pi");
  const Scalar tou = tou_cost(action, instance);
  switch (m) {
    case Mechanism::AP: return tou + instance.demand_rate() * action.maxCoeff();
    case Mechanism::CP: return tou + instance.demand_rate() * pi.dot(action);
    case Mechanism::PP: {
      Scalar demand(0);
      for (Index t = 0; t < action.size(); ++t)
        demand += pi(t) * progressive_charge(action(t), instance.demand_rate(), instance.delta());
      return tou + demand;
    }
  }
  throw InvalidArgument("unknown mechanism");
}

/// Best response to pi for the given mechanism (PP with delta == 1 falls back to CP).
template <typename Scalar>
Vector<Scalar> best_response_given_pi(Mechanism m, Index i, const Vector<Scalar>& pi,
                                      const MarketInstance<Scalar>& instance) {
  switch (m) {
    case Mechanism::AP: return best_response_ap(i, instance);
    case Mechanism::CP: return best_response_cp_random(i, pi, instance);
    case Mechanism::PP:
      return instance.delta() == Scalar(1) ? best_response_cp_random(i, pi, instance)
                                           : best_response_pp_random(i, pi, instance);
  }
  throw InvalidArgument("unknown mechanism");
}

}  // namespace peakprice
