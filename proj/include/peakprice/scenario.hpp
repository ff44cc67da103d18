#pragma once

// Scenario files: market, baseline and run sections in YAML. The format is
// documented in docs/scenario_format.md.

#include <cstdint>
#include <string>
#include <vector>

#include "peakprice/equilibrium_peak.hpp"

namespace peakprice {

struct RunConfig {
  std::vector<Mechanism> mechanisms{Mechanism::AP, Mechanism::CP, Mechanism::PP};
  std::vector<double> delta_grid;  ///< PP rows; empty means the market's delta
  EpsilonSchedule schedule = EpsilonSchedule::standard();
  std::size_t samples = 100000;  ///< draws for peak probabilities
  std::size_t cost_samples = 10000;
  std::size_t deviation_samples = 1000;
  std::size_t grid_divisions = 20;
  std::size_t condition_probes = 32;
  std::size_t heuristic_iterations = 400;
  std::uint64_t seed = 1;
  bool constructive = false;
  bool assume_condition_11 = false;
  bool verify = true;
};

struct Scenario {
  std::string name;
  MarketInstance<double> market;
  BaselineScenario baseline;
  RunConfig run;
};

/// Throws ParseError naming the origin, line and column of the offending field.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<scenario>");
Scenario load_scenario(const std::string& path);

/// Canonical text; parse_scenario(serialize_scenario(s)) serializes identically.
std::string serialize_scenario(const Scenario& scenario);

AnalysisOptions analysis_options(const RunConfig& run, unsigned threads = 1);

/// Comma-separated reals, e.g. "0.1,0.01".
std::vector<double> parse_real_list(const std::string& text);

/// N rows of T comma-separated reals.
Matrix<double> parse_profile_csv(const std::string& text, const std::string& origin = "<profile>");

}  // namespace peakprice
