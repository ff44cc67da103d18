#pragma once

// Mechanism comparisons over scenario files, the bundled presets and the
// reproduction targets.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "peakprice/result_table.hpp"
#include "peakprice/scenario.hpp"

namespace peakprice {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::vector<double>> delta_grid;
  std::optional<EpsilonSchedule> schedule;
};

Scenario apply_overrides(Scenario scenario, const RunOverrides& overrides);

struct RunRecord {
  ResultRow row;
  EquilibriumReport report;
};

/// One record per requested mechanism; PP gets one per delta > 1 in the grid
/// (the market's delta when the grid is empty).
std::vector<RunRecord> run_scenario(const Scenario& scenario, unsigned threads = 1,
                                    bool timing = false);

ResultTable run_compare(const Scenario& scenario, unsigned threads = 1, bool timing = false);

/// example1, example2, figure2, figure3-conditional-uniform, figure3-beta, figure3-triangular.
Scenario preset(std::string_view name);
std::vector<std::string> preset_names();

struct OutputFile {
  std::string name;
  std::string content;
};

struct Reproduction {
  ResultTable table;
  std::vector<OutputFile> files;  ///< the table CSV first, then plot data
};

/// Targets: example1, example2, figure2, figure3.
Reproduction reproduce(std::string_view target, const RunOverrides& overrides = {},
                       unsigned threads = 1, bool timing = false);

/// draw,period_1..period_T rows from stream (seed, Baseline, k).
std::string sample_csv(const BaselineScenario& baseline, std::size_t count, std::uint64_t seed,
                       unsigned threads = 1);

/// period,pi,stderr,method
std::string peak_probabilities_csv(const BaselineScenario& baseline, std::size_t samples,
                                   std::uint64_t seed, unsigned threads = 1);

}  // namespace peakprice
