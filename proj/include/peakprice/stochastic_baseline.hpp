#pragma once

// Random baseline loads: distribution specs, sampling, the peak-period
// probabilities pi^t = P[b^t = argmax_s b^s], support maxima, and the closed
// forms that hold when every period shares the same support maximum and the
// peak period does not depend on the players' actions.

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "peakprice/market_model.hpp"
#include "peakprice/rng.hpp"

namespace peakprice {

/// scale * Triangular(min, mode, max).
struct TriangularFamily {
  double min = 0.0;
  double mode = 0.0;
  double max = 1.0;
  double scale = 1.0;
};

/// scale * Beta(alpha, beta).
struct BetaFamily {
  double alpha = 1.0;
  double beta = 1.0;
  double scale = 1.0;
};

struct UniformFamily {
  double min = 0.0;
  double max = 1.0;
};

using PeriodFamily = std::variant<TriangularFamily, BetaFamily, UniformFamily>;

struct BaselineAtom {
  BaselineLoad<double> loads;
  double probability;
};

struct DiscreteAtoms {
  std::vector<BaselineAtom> atoms;
};

/// Each period drawn independently from its own family.
struct IndependentPeriods {
  std::vector<PeriodFamily> periods;
};

/// One period, chosen with the given probabilities, draws from U[high_min,
/// high_max]; every other period draws from U[low_min, low_max].
struct ConditionalUniform {
  Vector<double> peak_probabilities;
  double low_min = 0.0;
  double low_max = 0.0;
  double high_min = 0.0;
  double high_max = 0.0;
};

class DistributionSpec {
 public:
  using Kind = std::variant<DiscreteAtoms, IndependentPeriods, ConditionalUniform>;

  static DistributionSpec discrete(std::vector<BaselineAtom> atoms);
  static DistributionSpec degenerate(BaselineLoad<double> loads);
  static DistributionSpec independent(std::vector<PeriodFamily> periods);
  static DistributionSpec conditional_uniform(Vector<double> peak_probabilities, double low_min,
                                              double low_max, double high_min, double high_max);

  Index n_periods() const;
  const Kind& kind() const { return kind_; }

  /// pi is available without sampling (discrete atoms, conditional uniform).
  bool has_analytic_peak_probabilities() const;

  /// The single baseline of a one-atom discrete spec.
  std::optional<BaselineLoad<double>> as_deterministic() const;

 private:
  explicit DistributionSpec(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

/// Deterministic loads or a distribution over them.
using BaselineScenario = std::variant<BaselineLoad<double>, DistributionSpec>;

std::optional<BaselineLoad<double>> deterministic_baseline(const BaselineScenario& scenario);
Index n_periods(const BaselineScenario& scenario);

BaselineLoad<double> sample(const DistributionSpec& spec, RandomStream& stream);

/// Draws rows 0..count-1; row k comes from stream (seed, purpose, k).
Matrix<double> sample_many(const DistributionSpec& spec, std::size_t count, std::uint64_t seed,
                           StreamPurpose purpose, unsigned threads = 1);

struct PeakProbabilities {
  enum class Method { Analytic, MonteCarlo };

  Vector<double> pi;
  Method method = Method::Analytic;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::optional<Vector<double>> stderr_;  ///< binomial standard error per entry
};

/// Frequency of each period being the earliest argmax of draws.row(k) + flexible.
Vector<double> empirical_peak_probabilities(const Matrix<double>& draws,
                                            const Vector<double>& flexible, unsigned threads = 1);

/// Exact for discrete and conditional-uniform specs, Monte Carlo otherwise.
PeakProbabilities peak_probabilities(const DistributionSpec& spec, std::size_t samples,
                                     std::uint64_t seed, unsigned threads = 1);

/// Always Monte Carlo, whatever the spec.
PeakProbabilities peak_probabilities_monte_carlo(const DistributionSpec& spec, std::size_t samples,
                                                 std::uint64_t seed, unsigned threads = 1);

struct SupportMax {
  Vector<double> per_period;
  double global = 0.0;
  bool equal_support = false;  ///< every period reaches the same maximum
};

SupportMax support_max(const DistributionSpec& spec);

/// sup over the support of max_t (b^t + flexible^t), with a baseline attaining it.
struct WorstRealization {
  double peak;
  BaselineLoad<double> baseline;
};

WorstRealization worst_case_peak(const DistributionSpec& spec, const Vector<double>& flexible);

struct Condition11Check {
  bool plausible = false;
  double max_discrepancy = 0.0;
  double tolerance = 0.0;  ///< 3x pooled standard error at the worst entry
};

/// Monte Carlo falsification test of action independence of the peak period.
/// Each probe gives every player a uniformly random split of r_i; the peak
/// frequencies under the probe are compared with the baseline-only
/// frequencies on the same draws.
Condition11Check check_condition_11(const DistributionSpec& spec,
                                    const Vector<double>& requirements, std::size_t samples,
                                    std::size_t probes, std::uint64_t seed, unsigned threads = 1);

struct StochasticPeaks {
  double ap;
  double cp;
  double pp;
  double pp_factor;  ///< share of sum_i r_i landing in the least likely peak period, in [1/T, 1]
};

/// Peaks when every period has support maximum b_max and pi does not depend on
/// actions (the caller vouches for the latter):
///   AP: b_max + sum r / T,  CP: b_max + sum r,
///   PP: b_max + (delta pi_min)^(-1/(delta-1)) / sum_t (delta pi^t)^(-1/(delta-1)) * sum r.
StochasticPeaks closed_form_peaks_condition_10_11(const MarketInstance<double>& instance,
                                                  const DistributionSpec& spec,
                                                  const PeakProbabilities& pi);

}  // namespace peakprice
