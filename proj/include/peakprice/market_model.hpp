#pragma once

// Game primitives: instances, action profiles, baseline loads, the three
// demand-charge cost functions and the aggregate peak.
//
// Periods are 0-based throughout the C++ API. Ties in every argmax resolve to
// the earliest period, using exact floating comparison.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>

#include "peakprice/errors.hpp"

namespace peakprice {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Mechanism { AP, CP, PP };

inline std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::AP: return "AP";
    case Mechanism::CP: return "CP";
    case Mechanism::PP: return "PP";
  }
  return "?";
}

inline Mechanism parse_mechanism(std::string_view s) {
  if (s == "AP" || s == "ap") return Mechanism::AP;
  if (s == "CP" || s == "cp") return Mechanism::CP;
  if (s == "PP" || s == "pp") return Mechanism::PP;
  throw InvalidArgument("unknown mechanism '" + std::string(s) + "' (expected AP, CP or PP)");
}

/// Relative slack allowed when checking sum_t a_i^t >= r_i on computed profiles.
inline constexpr double kRequirementTolerance = 1e-9;

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  for (Index i = 0; i < m.size(); ++i) {
    using std::isfinite;
    if (!isfinite(m.derived().coeff(i))) return false;
  }
  return true;
}

template <typename Scalar>
bool meets_requirement(Scalar consumed, Scalar requirement) {
  using std::max;
  const Scalar slack = Scalar(kRequirementTolerance) * max(Scalar(1), requirement);
  return consumed >= requirement - slack;
}

}  // namespace detail

/// Earliest index attaining the maximum of a vector expression.
template <typename Derived>
Index argmax_earliest(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw InvalidArgument("argmax of an empty vector");
  Index best = 0;
  for (Index t = 1; t < v.size(); ++t) {
    if (v.coeff(t) > v.coeff(best)) best = t;
  }
  return best;
}

/// Earliest index attaining the minimum of a vector expression.
template <typename Derived>
Index argmin_earliest(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw InvalidArgument("argmin of an empty vector");
  Index best = 0;
  for (Index t = 1; t < v.size(); ++t) {
    if (v.coeff(t) < v.coeff(best)) best = t;
  }
  return best;
}

/// N players with requirements r_i, T periods with time-of-use rates p^t, a
/// demand rate p^D and the progressive exponent delta (1 for coincident peak).
///
/// Instances with p^D <= T * max_t p^t can be built but are flagged; the
/// closed-form routines refuse them.
template <typename Scalar = double>
class MarketInstance {
 public:
  MarketInstance(Vector<Scalar> requirements, Vector<Scalar> tou_rates, Scalar demand_rate,
                 Scalar delta = Scalar(1))
      : requirements_(std::move(requirements)),
        tou_rates_(std::move(tou_rates)),
        demand_rate_(demand_rate),
        delta_(delta) {
    using std::isfinite;
    if (requirements_.size() == 0) throw InvalidArgument("market needs at least one player");
    if (tou_rates_.size() == 0) throw InvalidArgument("market needs at least one period");
    if (!detail::all_finite(requirements_) || (requirements_.array() <= Scalar(0)).any())
      throw InvalidArgument("requirements must be finite and strictly positive");
    if (!detail::all_finite(tou_rates_) || (tou_rates_.array() < Scalar(0)).any())
      throw InvalidArgument("time-of-use rates must be finite and nonnegative");
    if (!isfinite(demand_rate_) || demand_rate_ <= Scalar(0))
      throw InvalidArgument("demand rate must be finite and positive");
    if (!isfinite(delta_) || delta_ < Scalar(1))
      throw InvalidArgument("progressive exponent delta must be >= 1");
  }

  Index n_players() const { return requirements_.size(); }
  Index n_periods() const { return tou_rates_.size(); }
  const Vector<Scalar>& requirements() const { return requirements_; }
  Scalar requirement(Index i) const { return requirements_(i); }
  Scalar total_requirement() const { return requirements_.sum(); }
  const Vector<Scalar>& tou_rates() const { return tou_rates_; }
  Scalar max_tou_rate() const { return tou_rates_.maxCoeff(); }
  Scalar demand_rate() const { return demand_rate_; }
  Scalar delta() const { return delta_; }

  /// True when p^D <= T * max_t p^t.
  bool assumption_violated() const {
    return !(demand_rate_ > Scalar(n_periods()) * max_tou_rate());
  }

  MarketInstance with_delta(Scalar delta) const {
    return MarketInstance(requirements_, tou_rates_, demand_rate_, delta);
  }

  template <typename Other>
  MarketInstance<Other> cast() const {
    return MarketInstance<Other>(requirements_.template cast<Other>(),
                                 tou_rates_.template cast<Other>(), Other(demand_rate_),
                                 Other(delta_));
  }

 private:
  Vector<Scalar> requirements_;
  Vector<Scalar> tou_rates_;
  Scalar demand_rate_;
  Scalar delta_;
};

template <typename Scalar>
void require_valid_assumption(const MarketInstance<Scalar>& instance, std::string_view what) {
  if (instance.assumption_violated())
    throw AssumptionViolated(std::string(what) +
                             ": instance violates p^D > T * max_t p^t (flagged instance)");
}

/// Inflexible per-period load b^t.
template <typename Scalar = double>
class BaselineLoad {
 public:
  explicit BaselineLoad(Vector<Scalar> loads) : loads_(std::move(loads)) {
    if (loads_.size() == 0) throw InvalidArgument("baseline needs at least one period");
    if (!detail::all_finite(loads_) || (loads_.array() < Scalar(0)).any())
      throw InvalidArgument("baseline loads must be finite and nonnegative");
  }

  Index n_periods() const { return loads_.size(); }
  const Vector<Scalar>& loads() const { return loads_; }
  Scalar operator()(Index t) const { return loads_(t); }
  Scalar max() const { return loads_.maxCoeff(); }

  template <typename Other>
  BaselineLoad<Other> cast() const {
    return BaselineLoad<Other>(loads_.template cast<Other>());
  }

 private:
  Vector<Scalar> loads_;
};

/// N x T nonnegative consumption matrix a_i^t, one row per player.
template <typename Scalar = double>
class ActionProfile {
 public:
  /// Checks nonnegativity only.
  explicit ActionProfile(Matrix<Scalar> consumption) : consumption_(std::move(consumption)) {
    if (consumption_.rows() == 0 || consumption_.cols() == 0)
      throw InvalidArgument("action profile must be non-empty");
    if (!detail::all_finite(consumption_) || (consumption_.array() < Scalar(0)).any())
      throw InvalidArgument("consumption must be finite and nonnegative");
  }

  /// Also checks the dimensions and every player's requirement against the instance.
  ActionProfile(Matrix<Scalar> consumption, const MarketInstance<Scalar>& instance)
      : ActionProfile(std::move(consumption)) {
    if (n_players() != instance.n_players() || n_periods() != instance.n_periods())
      throw InvalidArgument("action profile is " + std::to_string(n_players()) + "x" +
                            std::to_string(n_periods()) + " but the market is " +
                            std::to_string(instance.n_players()) + "x" +
                            std::to_string(instance.n_periods()));
    for (Index i = 0; i < n_players(); ++i) {
      if (!detail::meets_requirement(consumption_.row(i).sum(), instance.requirement(i)))
        throw InvalidArgument("player " + std::to_string(i) +
                              " consumes less than their requirement");
    }
  }

  Index n_players() const { return consumption_.rows(); }
  Index n_periods() const { return consumption_.cols(); }
  const Matrix<Scalar>& consumption() const { return consumption_; }
  Scalar operator()(Index i, Index t) const { return consumption_(i, t); }
  auto row(Index i) const { return consumption_.row(i); }

  /// Column sums: total flexible load per period.
  Vector<Scalar> flexible_load() const { return consumption_.colwise().sum().transpose(); }

  bool satisfies_requirements(const MarketInstance<Scalar>& instance) const {
    if (n_players() != instance.n_players() || n_periods() != instance.n_periods()) return false;
    for (Index i = 0; i < n_players(); ++i)
      if (!detail::meets_requirement(consumption_.row(i).sum(), instance.requirement(i)))
        return false;
    return true;
  }

  /// Copy with player i's row replaced (a_i, a_{-i}).
  template <typename Derived>
  ActionProfile with_row(Index i, const Eigen::MatrixBase<Derived>& action) const {
    Matrix<Scalar> m = consumption_;
    m.row(i) = action.transpose();
    return ActionProfile(std::move(m));
  }

 private:
  Matrix<Scalar> consumption_;
};

template <typename Scalar>
struct PeakDemand {
  Scalar value;
  Index period;
};

/// Decomposition of a player's bill. total == tou_component + demand_component.
template <typename Scalar>
struct CostBreakdown {
  Scalar tou_component{0};
  Scalar demand_component{0};
  Scalar total{0};
  Index charged_period{0};
};

namespace detail {

template <typename Scalar>
void check_periods(Index a, Index b, const char* what) {
  if (a != b)
    throw InvalidArgument(std::string(what) + ": period count mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
}

template <typename Scalar>
void check_player(const ActionProfile<Scalar>& profile, const MarketInstance<Scalar>& instance,
                  Index i) {
  if (i < 0 || i >= profile.n_players())
    throw InvalidArgument("player index " + std::to_string(i) + " out of range");
  check_periods<Scalar>(profile.n_periods(), instance.n_periods(), "cost");
  if (profile.n_players() != instance.n_players())
    throw InvalidArgument("cost: player count mismatch");
}

}  // namespace detail

/// b^t + sum_i a_i^t.
template <typename Scalar>
Vector<Scalar> aggregate_load(const ActionProfile<Scalar>& profile,
                              const BaselineLoad<Scalar>& baseline) {
  detail::check_periods<Scalar>(profile.n_periods(), baseline.n_periods(), "aggregate_load");
  return baseline.loads() + profile.flexible_load();
}

template <typename Scalar>
PeakDemand<Scalar> peak_demand(const ActionProfile<Scalar>& profile,
                               const BaselineLoad<Scalar>& baseline) {
  const Vector<Scalar> load = aggregate_load(profile, baseline);
  const Index t = argmax_earliest(load);
  return {load(t), t};
}

template <typename Scalar>
Index coincident_peak_period(const ActionProfile<Scalar>& profile,
                             const BaselineLoad<Scalar>& baseline) {
  return argmax_earliest(aggregate_load(profile, baseline));
}

/// sum_t p^t a^t for a single action.
template <typename Derived, typename Scalar>
Scalar tou_cost(const Eigen::MatrixBase<Derived>& action, const MarketInstance<Scalar>& instance) {
  detail::check_periods<Scalar>(action.size(), instance.n_periods(), "tou_cost");
  Scalar total(0);
  for (Index t = 0; t < action.size(); ++t) total += instance.tou_rates()(t) * action.coeff(t);
  return total;
}

/// p^D * q^delta, exact passthrough for delta == 1.
template <typename Scalar>
Scalar progressive_charge(Scalar quantity, Scalar demand_rate, Scalar delta) {
  using std::pow;
  return demand_rate * (delta == Scalar(1) ? quantity : pow(quantity, delta));
}

template <typename Scalar>
CostBreakdown<Scalar> cost_ap(Index i, const ActionProfile<Scalar>& profile,
                              const MarketInstance<Scalar>& instance) {
  detail::check_player(profile, instance, i);
  CostBreakdown<Scalar> c;
  const auto a = profile.row(i);
  c.charged_period = argmax_earliest(a.transpose());
  c.tou_component = tou_cost(a.transpose(), instance);
  c.demand_component = instance.demand_rate() * a(c.charged_period);
  c.total = c.tou_component + c.demand_component;
  return c;
}

template <typename Scalar>
CostBreakdown<Scalar> cost_cp(Index i, const ActionProfile<Scalar>& profile,
                              const BaselineLoad<Scalar>& baseline,
                              const MarketInstance<Scalar>& instance) {
  detail::check_player(profile, instance, i);
  CostBreakdown<Scalar> c;
  const auto a = profile.row(i);
  c.charged_period = coincident_peak_period(profile, baseline);
  c.tou_component = tou_cost(a.transpose(), instance);
  c.demand_component = instance.demand_rate() * a(c.charged_period);
  c.total = c.tou_component + c.demand_component;
  return c;
}

template <typename Scalar>
CostBreakdown<Scalar> cost_pp(Index i, const ActionProfile<Scalar>& profile,
                              const BaselineLoad<Scalar>& baseline,
                              const MarketInstance<Scalar>& instance) {
  detail::check_player(profile, instance, i);
  CostBreakdown<Scalar> c;
  const auto a = profile.row(i);
  c.charged_period = coincident_peak_period(profile, baseline);
  c.tou_component = tou_cost(a.transpose(), instance);
  c.demand_component =
      progressive_charge(a(c.charged_period), instance.demand_rate(), instance.delta());
  c.total = c.tou_component + c.demand_component;
  return c;
}

template <typename Scalar>
CostBreakdown<Scalar> cost(Mechanism m, Index i, const ActionProfile<Scalar>& profile,
                           const BaselineLoad<Scalar>& baseline,
                           const MarketInstance<Scalar>& instance) {
  switch (m) {
    case Mechanism::AP: return cost_ap(i, profile, instance);
    case Mechanism::CP: return cost_cp(i, profile, baseline, instance);
    case Mechanism::PP: return cost_pp(i, profile, baseline, instance);
  }
  throw InvalidArgument("unknown mechanism");
}

}  // namespace peakprice
