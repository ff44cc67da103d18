#pragma once

// Equilibrium peak demand for known baselines: closed forms, the explicit
// epsilon-Nash profiles for coincident/progressive peak pricing, and the exact
// deviation bound used to certify them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "peakprice/best_response.hpp"
#include "peakprice/market_model.hpp"

namespace peakprice {

enum class Extrapolation { None, LastValue };

/// Strictly decreasing positive epsilons standing in for the epsilon -> 0+ limit.
class EpsilonSchedule {
 public:
  explicit EpsilonSchedule(std::vector<double> values,
                           Extrapolation extrapolation = Extrapolation::LastValue)
      : values_(std::move(values)), extrapolation_(extrapolation) {
    if (values_.empty()) throw InvalidArgument("epsilon schedule is empty");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!(values_[k] > 0.0) || !std::isfinite(values_[k]))
        throw InvalidArgument("epsilon schedule values must be positive and finite");
      if (k > 0 && !(values_[k] < values_[k - 1]))
        throw InvalidArgument("epsilon schedule must be strictly decreasing");
    }
  }

  /// 1e-1, 1e-2, ..., 1e-6.
  static EpsilonSchedule standard() {
    return EpsilonSchedule({1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6});
  }

  const std::vector<double>& values() const { return values_; }
  double final_value() const { return values_.back(); }
  Extrapolation extrapolation() const { return extrapolation_; }

 private:
  std::vector<double> values_;
  Extrapolation extrapolation_;
};

/// Delta = sum_t (b_max - b^t) - sum_i r_i and the max-baseline periods.
template <typename Scalar = double>
struct DeltaGap {
  Scalar value;
  Scalar b_max;
  std::vector<Index> max_periods;  ///< periods with b^t == b_max, ascending
  Index first_max_period;          ///< t_max

  bool surplus() const { return value > Scalar(0); }
};

template <typename Scalar>
DeltaGap<Scalar> delta_gap(const MarketInstance<Scalar>& instance,
                           const BaselineLoad<Scalar>& baseline) {
  detail::check_periods<Scalar>(baseline.n_periods(), instance.n_periods(), "delta_gap");
  DeltaGap<Scalar> g{Scalar(0), baseline.max(), {}, 0};
  const auto& b = baseline.loads();
  g.value = (Vector<Scalar>::Constant(b.size(), g.b_max) - b).sum() - instance.total_requirement();
  for (Index t = 0; t < b.size(); ++t)
    if (b(t) == g.b_max) g.max_periods.push_back(t);
  g.first_max_period = g.max_periods.front();
  return g;
}

/// max_t b^t + sum_i r_i / T.
template <typename Scalar>
Scalar closed_form_peak_ap_deterministic(const MarketInstance<Scalar>& instance,
                                         const BaselineLoad<Scalar>& baseline) {
  require_valid_assumption(instance, "closed_form_peak_ap_deterministic");
  detail::check_periods<Scalar>(baseline.n_periods(), instance.n_periods(), "closed form");
  return baseline.max() + instance.total_requirement() / Scalar(instance.n_periods());
}

/// max(max_t b^t, (sum_t b^t + sum_i r_i) / T).
template <typename Scalar>
Scalar closed_form_peak_cp_deterministic(const MarketInstance<Scalar>& instance,
                                         const BaselineLoad<Scalar>& baseline) {
  using std::max;
  require_valid_assumption(instance, "closed_form_peak_cp_deterministic");
  detail::check_periods<Scalar>(baseline.n_periods(), instance.n_periods(), "closed form");
  return max(baseline.max(), (baseline.loads().sum() + instance.total_requirement()) /
                                 Scalar(instance.n_periods()));
}

/// Identical to the coincident-peak value for every delta >= 1.
template <typename Scalar>
Scalar closed_form_peak_pp_deterministic(const MarketInstance<Scalar>& instance,
                                         const BaselineLoad<Scalar>& baseline) {
  return closed_form_peak_cp_deterministic(instance, baseline);
}

template <typename Scalar>
Scalar closed_form_peak_deterministic(Mechanism m, const MarketInstance<Scalar>& instance,
                                      const BaselineLoad<Scalar>& baseline) {
  switch (m) {
    case Mechanism::AP: return closed_form_peak_ap_deterministic(instance, baseline);
    case Mechanism::CP: return closed_form_peak_cp_deterministic(instance, baseline);
    case Mechanism::PP: return closed_form_peak_pp_deterministic(instance, baseline);
  }
  throw InvalidArgument("unknown mechanism");
}

template <typename Scalar = double>
struct CpConstruction {
  ActionProfile<Scalar> profile;
  Scalar eta;
  bool surplus_branch;  ///< Delta > 0: flexible load kept eta below b_max off the max periods
};

namespace detail {

/// Level L with sum_t max(0, L - b^t) == volume.
template <typename Scalar>
Scalar water_level(const Vector<Scalar>& b, Scalar volume) {
  std::vector<Scalar> sorted(b.data(), b.data() + b.size());
  std::sort(sorted.begin(), sorted.end());
  Scalar prefix(0);
  const std::size_t n = sorted.size();
  for (std::size_t k = 0; k < n; ++k) {
    prefix += sorted[k];
    const Scalar level = (volume + prefix) / Scalar(k + 1);
    if (k + 1 == n || level <= sorted[k + 1]) return level;
  }
  return sorted.back();
}

}  // namespace detail

/// The explicit epsilon-Nash profile for coincident peak pricing.
///
/// Delta > 0: players, in index order, water-fill the periods outside the
/// max-baseline set in ascending price order, keeping each period at most
/// b_max - eta, with eta = eps / (T p_max) (eps / T when all rates are zero).
///
/// Delta <= 0: aggregate load b_max - (Delta + eta) / T in every period plus
/// eta on t_max, eta = eps / (2 (p^D + p_max)); each player takes the share
/// r_i / sum_j r_j of every period. If that would put negative load on a
/// second max period (possible only for Delta > -eta), the flexible load
/// instead fills the baseline to the common level L with
/// sum_t [L - b^t]_+ = sum r - eta, again with eta on t_max.
template <typename Scalar>
CpConstruction<Scalar> construct_cp_equilibrium(const MarketInstance<Scalar>& instance,
                                                const BaselineLoad<Scalar>& baseline,
                                                Scalar epsilon) {
  using std::max;
  using std::min;
  require_valid_assumption(instance, "construct_cp_profile_deterministic");
  if (!(epsilon > Scalar(0))) throw InvalidArgument("epsilon must be positive");
  const DeltaGap<Scalar> gap = delta_gap(instance, baseline);
  const Index n = instance.n_players();
  const Index periods = instance.n_periods();
  const Scalar p_max = instance.max_tou_rate();
  const auto& b = baseline.loads();
  Matrix<Scalar> a = Matrix<Scalar>::Zero(n, periods);

  if (gap.surplus()) {
    const Scalar eta = p_max > Scalar(0) ? epsilon / (Scalar(periods) * p_max)
                                         : epsilon / Scalar(periods);
    if (!(gap.value > Scalar(periods) * eta))
      throw InfeasibleEpsilon("construct_cp_profile_deterministic: epsilon too large, need Delta > "
                              "T * eta; retry with a smaller epsilon");
    std::vector<Index> slots;
    const SortedPriceView<Scalar> prices(instance.tou_rates());
    for (Index t : prices.order())
      if (b(t) != gap.b_max) slots.push_back(t);

    Vector<Scalar> load = b;
    std::size_t cursor = 0;
    for (Index i = 0; i < n; ++i) {
      Scalar remaining = instance.requirement(i);
      while (remaining > Scalar(0)) {
        if (cursor >= slots.size())
          throw InfeasibleEpsilon("construct_cp_profile_deterministic: ran out of headroom; "
                                  "retry with a smaller epsilon");
        const Index t = slots[cursor];
        const Scalar headroom = max(Scalar(0), gap.b_max - load(t) - eta);
        if (remaining < headroom) {
          a(i, t) += remaining;
          load(t) += remaining;
          remaining = Scalar(0);
        } else {
          a(i, t) += headroom;
          load(t) += headroom;
          remaining -= headroom;
          ++cursor;
        }
      }
    }
    return {ActionProfile<Scalar>(std::move(a), instance), eta, true};
  }

  const Scalar eta = epsilon / (Scalar(2) * (instance.demand_rate() + p_max));
  const Scalar total = instance.total_requirement();
  if (!(total > eta))
    throw InfeasibleEpsilon("construct_cp_profile_deterministic: eta exceeds the total "
                            "requirement; retry with a smaller epsilon");
  Vector<Scalar> flexible = Vector<Scalar>::Constant(periods, gap.b_max) - b -
                            Vector<Scalar>::Constant(periods, (gap.value + eta) / Scalar(periods));
  flexible(gap.first_max_period) += eta;
  if ((flexible.array() < Scalar(0)).any()) {
    const Scalar level = detail::water_level(b, total - eta);
    flexible = (Vector<Scalar>::Constant(periods, level) - b).cwiseMax(Scalar(0));
    flexible(gap.first_max_period) += eta;
  }
  for (Index i = 0; i < n; ++i)
    a.row(i) = (instance.requirement(i) / total) * flexible.transpose();
  return {ActionProfile<Scalar>(std::move(a), instance), eta, false};
}

template <typename Scalar>
ActionProfile<Scalar> construct_cp_profile_deterministic(const MarketInstance<Scalar>& instance,
                                                         const BaselineLoad<Scalar>& baseline,
                                                         Scalar epsilon) {
  return construct_cp_equilibrium(instance, baseline, epsilon).profile;
}

/// Lowest cost player i can reach against the others' fixed consumption.
/// For CP/PP this is an infimum: ties at the peak are resolved in the
/// player's favour, so it lower-bounds every attainable deviation cost.
template <typename Scalar = double>
struct DeviationBound {
  Scalar cost;
  Vector<Scalar> action;
  Index peak_period;
};

template <typename Scalar>
DeviationBound<Scalar> best_deviation_deterministic(Mechanism m, Index i,
                                                    const ActionProfile<Scalar>& profile,
                                                    const BaselineLoad<Scalar>& baseline,
                                                    const MarketInstance<Scalar>& instance) {
  using std::max;
  detail::check_player(profile, instance, i);
  detail::check_periods<Scalar>(baseline.n_periods(), instance.n_periods(), "deviation");
  if (m == Mechanism::AP) {
    Vector<Scalar> action = best_response_ap(i, instance);
    const auto c = cost_ap(i, profile.with_row(i, action), instance);
    return {c.total, std::move(action), c.charged_period};
  }

  const Scalar delta = m == Mechanism::CP ? Scalar(1) : instance.delta();
  const Index periods = instance.n_periods();
  const Scalar r = instance.requirement(i);
  const Vector<Scalar>& p = instance.tou_rates();
  const Vector<Scalar> occupied =
      baseline.loads() + profile.flexible_load() - profile.row(i).transpose();
  const SortedPriceView<Scalar> prices(p);

  DeviationBound<Scalar> best{std::numeric_limits<Scalar>::infinity(),
                              Vector<Scalar>::Zero(periods), 0};

  for (Index s = 0; s < periods; ++s) {
    // Player puts x in period s; every other period t is capped at o^s + x.
    Scalar others_max = -std::numeric_limits<Scalar>::infinity();
    Scalar others_sum(0);
    for (Index t = 0; t < periods; ++t) {
      if (t == s) continue;
      others_max = max(others_max, occupied(t));
      others_sum += occupied(t);
    }
    Scalar x_lo = periods > 1 ? max(Scalar(0), others_max - occupied(s)) : Scalar(0);
    if (x_lo > r) continue;
    const Scalar x_fit =
        (r - Scalar(periods - 1) * occupied(s) + others_sum) / Scalar(periods);
    x_lo = std::min(r, max(x_lo, x_fit));

    auto evaluate = [&](Scalar x, Vector<Scalar>* action) {
      Vector<Scalar> caps = (Vector<Scalar>::Constant(periods, occupied(s) + x) - occupied);
      caps(s) = Scalar(0);
      const auto fill = fill_under_caps(caps, r - x, prices.order());
      const Scalar placed = x + fill.unfilled;
      Scalar value = tou_cost(fill.allocation, instance) + p(s) * placed +
                     progressive_charge(placed, instance.demand_rate(), delta);
      if (action) {
        *action = fill.allocation;
        (*action)(s) = placed;
      }
      return value;
    };

    // Convex in x: golden-section search.
    const Scalar phi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
    Scalar lo = x_lo, hi = r;
    Scalar x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    Scalar f1 = evaluate(x1, nullptr), f2 = evaluate(x2, nullptr);
    for (int iter = 0; iter < 200 && hi - lo > Scalar(0); ++iter) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = evaluate(x1, nullptr);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = evaluate(x2, nullptr);
      }
    }
    for (Scalar x : {x_lo, r, lo, hi, x1, x2}) {
      Vector<Scalar> action;
      const Scalar value = evaluate(x, &action);
      if (value < best.cost) best = {value, std::move(action), s};
    }
  }
  return best;
}

/// Outcome of an epsilon-Nash check. `certified` is true when worst_gain is an
/// exact (or upper-bounding) gain; search-based modes only give lower bounds.
struct NashCheck {
  bool holds = false;
  double worst_gain = 0.0;
  std::optional<Index> deviating_player;
  bool certified = false;
};

/// Exact check against a known baseline: compares each player's bill with
/// best_deviation_deterministic.
template <typename Scalar>
NashCheck verify_epsilon_nash_deterministic(const ActionProfile<Scalar>& profile,
                                            const BaselineLoad<Scalar>& baseline,
                                            const MarketInstance<Scalar>& instance,
                                            Mechanism m, Scalar epsilon) {
  if (!profile.satisfies_requirements(instance))
    throw InvalidArgument("verify_epsilon_nash: profile is infeasible for this market");
  NashCheck out;
  out.certified = true;
  Scalar worst = -std::numeric_limits<Scalar>::infinity();
  Index who = 0;
  for (Index i = 0; i < instance.n_players(); ++i) {
    const Scalar current = cost(m, i, profile, baseline, instance).total;
    const Scalar gain = current - best_deviation_deterministic(m, i, profile, baseline, instance).cost;
    if (gain > worst) {
      worst = gain;
      who = i;
    }
  }
  out.worst_gain = static_cast<double>(worst);
  out.holds = worst <= epsilon;
  if (!out.holds) out.deviating_player = who;
  return out;
}

}  // namespace peakprice
