#include "peakprice/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <sstream>

namespace peakprice {

namespace {

const std::map<std::string, std::string, std::less<>>& presets() {
  static const std::map<std::string, std::string, std::less<>> table = {
      {"example1", R"(name: example1
market:
  requirements: [6, 6]
  tou_rates: [0, 0]
  demand_rate: 1
baseline:
  loads: [12, 0]
run:
  mechanisms: [CP, AP]
)"},
      {"example2", R"(name: example2
market:
  requirements: [6, 6]
  tou_rates: [0, 0]
  demand_rate: 1
baseline:
  atoms:
    - {loads: [12, 0], probability: 0.6}
    - {loads: [0, 12], probability: 0.4}
run:
  mechanisms: [AP, CP, PP]
  delta_grid: [1, 2]
)"},
      {"figure2", R"(name: figure2
market:
  requirements: [24, 24]
  tou_rates: [0, 0, 0, 0]
  demand_rate: 1
baseline:
  independent:
    - {family: triangular, min: 0, mode: 4, max: 12, scale: 1}
    - {family: triangular, min: 0, mode: 8, max: 12, scale: 1}
    - {family: triangular, min: 0, mode: 4, max: 12, scale: 1}
    - {family: triangular, min: 0, mode: 8, max: 12, scale: 1}
run:
  mechanisms: [AP, CP]
  assume_condition_11: true
)"},
      {"figure3-conditional-uniform", R"(name: figure3-conditional-uniform
market:
  requirements: [24, 24]
  tou_rates: [0, 0, 0, 0]
  demand_rate: 1
  delta: 2
baseline:
  conditional_uniform:
    peak_probabilities: [0.1, 0.2, 0.3, 0.4]
    low: [0, 6]
    high: [6, 12]
run:
  mechanisms: [AP, CP, PP]
  delta_grid: [1, 1.25, 1.5, 2, 3, 4, 8]
  assume_condition_11: true
)"},
      {"figure3-beta", R"(name: figure3-beta
market:
  requirements: [24, 24]
  tou_rates: [0, 0, 0, 0]
  demand_rate: 1
  delta: 2
baseline:
  independent:
    - {family: beta, alpha: 2, beta: 5, scale: 12}
    - {family: beta, alpha: 5, beta: 2, scale: 12}
    - {family: beta, alpha: 2, beta: 5, scale: 12}
    - {family: beta, alpha: 5, beta: 2, scale: 12}
run:
  mechanisms: [AP, CP, PP]
  delta_grid: [1, 1.25, 1.5, 2, 3, 4, 8]
  assume_condition_11: true
)"},
      {"figure3-triangular", R"(name: figure3-triangular
market:
  requirements: [24, 24]
  tou_rates: [0, 0, 0, 0]
  demand_rate: 1
  delta: 2
baseline:
  independent:
    - {family: triangular, min: 0, mode: 4, max: 12, scale: 1}
    - {family: triangular, min: 0, mode: 8, max: 12, scale: 1}
    - {family: triangular, min: 0, mode: 4, max: 12, scale: 1}
    - {family: triangular, min: 0, mode: 8, max: 12, scale: 1}
run:
  mechanisms: [AP, CP, PP]
  delta_grid: [1, 1.25, 1.5, 2, 3, 4, 8]
  assume_condition_11: true
)"},
  };
  return table;
}

const char* const kFigure3Presets[] = {"figure3-conditional-uniform", "figure3-beta",
                                       "figure3-triangular"};

std::string join_path(std::string_view name) { return std::string(name) + ".csv"; }

}  // namespace

Scenario apply_overrides(Scenario scenario, const RunOverrides& overrides) {
  if (overrides.seed) scenario.run.seed = *overrides.seed;
  if (overrides.samples) {
    if (*overrides.samples == 0) throw InvalidArgument("--samples must be positive");
    scenario.run.samples = *overrides.samples;
  }
  if (overrides.delta_grid) {
    for (double d : *overrides.delta_grid)
      if (!(d >= 1.0)) throw InvalidArgument("every delta in the grid must be >= 1");
    scenario.run.delta_grid = *overrides.delta_grid;
  }
  if (overrides.schedule) scenario.run.schedule = *overrides.schedule;
  return scenario;
}

std::vector<RunRecord> run_scenario(const Scenario& scenario, unsigned threads, bool timing) {
  const AnalysisOptions options = analysis_options(scenario.run, threads);
  std::vector<std::pair<Mechanism, double>> jobs;
  for (Mechanism m : scenario.run.mechanisms) {
    if (m != Mechanism::PP) {
      jobs.emplace_back(m, 1.0);
    } else if (scenario.run.delta_grid.empty()) {
      jobs.emplace_back(m, scenario.market.delta());
    } else {
      for (double d : scenario.run.delta_grid)
        if (d > 1.0) jobs.emplace_back(m, d);
    }
  }

  std::vector<RunRecord> out;
  for (const auto& [m, delta] : jobs) {
    const auto start = std::chrono::steady_clock::now();
    const MarketInstance<double> instance =
        m == Mechanism::PP ? scenario.market.with_delta(delta) : scenario.market;
    EquilibriumReport report =
        equilibrium_peak(instance, scenario.baseline, m, scenario.run.schedule, options);
    ResultRow row;
    row.scenario = scenario.name;
    row.mechanism = m;
    row.delta = report.delta;
    row.peak = report.peak;
    row.method = report.method;
    row.epsilon_final = scenario.run.schedule.final_value();
    row.samples = scenario.run.samples;
    row.seed = scenario.run.seed;
    row.peak_stderr = report.peak_stderr;
    row.lower_bound = report.lower_bound;
    if (report.verification) {
      row.nash_holds = report.verification->holds;
      row.worst_gain = report.verification->worst_gain;
    }
    if (timing)
      row.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // Without extrapolation every scheduled epsilon gets its own row.
    const auto& schedule = scenario.run.schedule;
    if (report.method == Method::Constructive &&
        schedule.extrapolation() == Extrapolation::None) {
      for (std::size_t k = 0; k + 1 < report.schedule_peaks.size(); ++k) {
        ResultRow step = row;
        step.peak = report.schedule_peaks[k];
        step.epsilon_final = schedule.values()[k];
        step.nash_holds.reset();
        step.worst_gain.reset();
        out.push_back({std::move(step), report});
      }
    }
    out.push_back({std::move(row), std::move(report)});
  }
  return out;
}

ResultTable run_compare(const Scenario& scenario, unsigned threads, bool timing) {
  ResultTable table;
  for (auto& record : run_scenario(scenario, threads, timing)) table.add(std::move(record.row));
  return table;
}

Scenario preset(std::string_view name) {
  const auto it = presets().find(name);
  if (it == presets().end()) throw InvalidArgument("unknown preset '" + std::string(name) + "'");
  return parse_scenario(it->second, "preset:" + std::string(name));
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : presets()) names.push_back(name);
  return names;
}

Reproduction reproduce(std::string_view target, const RunOverrides& overrides, unsigned threads,
                       bool timing) {
  Reproduction out;
  if (target == "example1" || target == "example2") {
    out.table = run_compare(apply_overrides(preset(target), overrides), threads, timing);
    out.files.push_back({join_path(target), out.table.to_csv(timing)});
    return out;
  }

  if (target == "figure2") {
    const Scenario scenario = apply_overrides(preset("figure2"), overrides);
    const auto records = run_scenario(scenario, threads, timing);
    const auto& spec = std::get<DistributionSpec>(scenario.baseline);
    const Matrix<double> draws = sample_many(spec, scenario.run.cost_samples, scenario.run.seed,
                                             StreamPurpose::Baseline, threads);
    std::ostringstream actions, worst;
    actions << "mechanism,player,period,consumption\n";
    worst << "mechanism,period,baseline,flexible,aggregate,source\n";
    for (const auto& record : records) {
      out.table.add(record.row);
      const auto& profile = *record.report.witness_profile;
      const std::string m(to_string(record.row.mechanism));
      for (Index i = 0; i < profile.n_players(); ++i)
        for (Index t = 0; t < profile.n_periods(); ++t)
          actions << m << ',' << i + 1 << ',' << t + 1 << ',' << format_real(profile(i, t)) << '\n';

      // Largest realized peak among the draws.
      const Vector<double> flexible = profile.flexible_load();
      Index chosen = 0;
      double highest = -1.0;
      for (Index k = 0; k < draws.rows(); ++k) {
        const double peak = (draws.row(k).transpose() + flexible).maxCoeff();
        if (peak > highest) {
          highest = peak;
          chosen = k;
        }
      }
      for (Index t = 0; t < flexible.size(); ++t)
        worst << m << ',' << t + 1 << ',' << format_real(draws(chosen, t)) << ','
              << format_real(flexible(t)) << ',' << format_real(draws(chosen, t) + flexible(t))
              << ",sampled-max\n";
    }
    out.files.push_back({"figure2.csv", out.table.to_csv(timing)});
    out.files.push_back({"figure2_actions.csv", actions.str()});
    out.files.push_back({"figure2_worst_case.csv", worst.str()});
    return out;
  }

  if (target == "figure3") {
    // delta -> per-preset (peak, stderr); delta 1 is the coincident-peak bar.
    std::map<double, std::vector<std::pair<double, std::optional<double>>>> sweep;
    std::size_t column = 0;
    for (const char* name : kFigure3Presets) {
      const Scenario scenario = apply_overrides(preset(name), overrides);
      for (const auto& record : run_scenario(scenario, threads, timing)) {
        out.table.add(record.row);
        if (record.row.mechanism == Mechanism::AP) continue;
        auto& cells = sweep[record.row.delta];
        cells.resize(std::size(kFigure3Presets));
        cells[column] = {record.row.peak, record.row.peak_stderr};
      }
      ++column;
    }
    std::ostringstream os;
    os << "delta";
    for (const char* name : kFigure3Presets) {
      std::string label = std::string(name).substr(std::string("figure3-").size());
      std::replace(label.begin(), label.end(), '-', '_');
      os << ',' << label << ',' << label << "_stderr";
    }
    os << '\n';
    for (const auto& [delta, cells] : sweep) {
      os << format_real(delta);
      for (const auto& [peak, stderr_] : cells)
        os << ',' << format_real(peak) << ',' << (stderr_ ? format_real(*stderr_) : "");
      os << '\n';
    }
    out.files.push_back({"figure3.csv", out.table.to_csv(timing)});
    out.files.push_back({"figure3_sweep.csv", os.str()});
    return out;
  }

  throw InvalidArgument("unknown reproduction target '" + std::string(target) +
                        "' (expected example1, example2, figure2 or figure3)");
}

std::string sample_csv(const BaselineScenario& baseline, std::size_t count, std::uint64_t seed,
                       unsigned threads) {
  const Index periods = n_periods(baseline);
  Matrix<double> draws;
  if (const auto* b = std::get_if<BaselineLoad<double>>(&baseline))
    draws = b->loads().transpose().replicate(static_cast<Index>(count), 1);
  else
    draws = sample_many(std::get<DistributionSpec>(baseline), count, seed,
                        StreamPurpose::Baseline, threads);
  std::ostringstream os;
  os << "draw";
  for (Index t = 0; t < periods; ++t) os << ",period_" << t + 1;
  os << '\n';
  for (Index k = 0; k < draws.rows(); ++k) {
    os << k;
    for (Index t = 0; t < periods; ++t) os << ',' << format_real(draws(k, t));
    os << '\n';
  }
  return os.str();
}

std::string peak_probabilities_csv(const BaselineScenario& baseline, std::size_t samples,
                                   std::uint64_t seed, unsigned threads) {
  const PeakProbabilities pi = [&] {
    if (const auto* b = std::get_if<BaselineLoad<double>>(&baseline)) {
      PeakProbabilities point;
      point.pi = Vector<double>::Zero(b->n_periods());
      point.pi(argmax_earliest(b->loads())) = 1.0;
      return point;
    }
    return peak_probabilities(std::get<DistributionSpec>(baseline), samples, seed, threads);
  }();
  const bool mc = pi.method == PeakProbabilities::Method::MonteCarlo;
  std::ostringstream os;
  os << "period,pi,stderr,method\n";
  for (Index t = 0; t < pi.pi.size(); ++t)
    os << t + 1 << ',' << format_real(pi.pi(t)) << ','
       << (pi.stderr_ ? format_real((*pi.stderr_)(t)) : "") << ','
       << (mc ? "monte-carlo" : "analytic") << '\n';
  return os.str();
}

}  // namespace peakprice
