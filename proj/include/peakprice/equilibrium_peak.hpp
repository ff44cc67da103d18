#pragma once

// Equilibrium peak reports for deterministic and random baselines, and the
// epsilon-Nash check in its exact, grid and Monte Carlo forms.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "peakprice/equilibrium.hpp"
#include "peakprice/stochastic_baseline.hpp"

namespace peakprice {

enum class Method { ClosedForm, Constructive, MonteCarlo };
enum class VerifyMode { Exact, Grid, MonteCarlo };

std::string_view to_string(Method m);
std::string_view to_string(VerifyMode m);
VerifyMode parse_verify_mode(std::string_view s);

struct AnalysisOptions {
  std::size_t pi_samples = 100000;
  std::size_t cost_samples = 10000;       ///< baseline draws for expected costs
  std::size_t deviation_samples = 1000;   ///< random deviations per player (Monte Carlo mode)
  std::size_t grid_divisions = 20;        ///< simplex grid step r_i / grid_divisions
  std::size_t max_grid_points = 1000000;
  std::size_t condition_probes = 32;
  std::size_t heuristic_iterations = 400;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool prefer_constructive = false;  ///< deterministic CP/PP: evaluate the profile at each epsilon
  bool assume_condition_11 = false;  ///< skip the action-independence test and trust pi
  bool verify = true;
};

struct EquilibriumReport {
  Mechanism mechanism = Mechanism::CP;
  double delta = 1.0;
  double peak = 0.0;
  Method method = Method::ClosedForm;
  EpsilonSchedule schedule = EpsilonSchedule::standard();
  std::optional<ActionProfile<double>> witness_profile;
  std::optional<BaselineLoad<double>> witness_baseline;
  std::vector<double> schedule_peaks;  ///< constructive path: peak at each epsilon
  std::optional<PeakProbabilities> peak_probabilities;
  std::optional<NashCheck> verification;
  std::optional<Condition11Check> condition_11;
  bool lower_bound = false;  ///< heuristic: a lower bound on the true supremum
  std::optional<double> peak_stderr;
  std::size_t samples = 0;
};

/// Worst gain over players of (current cost - best deviation cost found).
///  Exact: known baseline, or an analytic pi under equal support maxima with
///         action independence (tested, or assumed via options).
///  Grid:  every point of the simplex with step r_i / grid_divisions.
///  MonteCarlo: random splits, simplex vertices and the uniform split.
/// Search modes return certified == false.
NashCheck verify_epsilon_nash(const ActionProfile<double>& profile,
                              const BaselineScenario& scenario,
                              const MarketInstance<double>& instance, Mechanism mechanism,
                              double epsilon, VerifyMode mode,
                              const AnalysisOptions& options = {});

EquilibriumReport equilibrium_peak(const MarketInstance<double>& instance,
                                   const BaselineScenario& scenario, Mechanism mechanism,
                                   const EpsilonSchedule& schedule,
                                   const AnalysisOptions& options = {});

}  // namespace peakprice
