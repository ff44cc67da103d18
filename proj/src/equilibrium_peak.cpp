#include "peakprice/equilibrium_peak.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "peakprice/parallel.hpp"

namespace peakprice {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::ClosedForm: return "closed-form";
    case Method::Constructive: return "constructive";
    case Method::MonteCarlo: return "monte-carlo";
  }
  return "?";
}

std::string_view to_string(VerifyMode m) {
  switch (m) {
    case VerifyMode::Exact: return "exact";
    case VerifyMode::Grid: return "grid";
    case VerifyMode::MonteCarlo: return "monte-carlo";
  }
  return "?";
}

VerifyMode parse_verify_mode(std::string_view s) {
  if (s == "exact") return VerifyMode::Exact;
  if (s == "grid") return VerifyMode::Grid;
  if (s == "monte-carlo") return VerifyMode::MonteCarlo;
  throw InvalidArgument("unknown verification mode '" + std::string(s) +
                        "' (expected exact, grid or monte-carlo)");
}

namespace {

constexpr std::size_t kCandidateChunk = 256;

/// Baseline realizations with weights summing to 1.
struct WeightedDraws {
  Matrix<double> loads;
  Vector<double> weights;
};

WeightedDraws cost_draws(const BaselineScenario& scenario, const AnalysisOptions& options) {
  if (auto b = deterministic_baseline(scenario))
    return {b->loads().transpose(), Vector<double>::Ones(1)};
  const auto& spec = std::get<DistributionSpec>(scenario);
  if (const auto* d = std::get_if<DiscreteAtoms>(&spec.kind())) {
    std::vector<const BaselineAtom*> kept;
    for (const auto& atom : d->atoms)
      if (atom.probability > 0.0) kept.push_back(&atom);
    WeightedDraws w{Matrix<double>(static_cast<Index>(kept.size()), spec.n_periods()),
                    Vector<double>(static_cast<Index>(kept.size()))};
    for (std::size_t k = 0; k < kept.size(); ++k) {
      w.loads.row(static_cast<Index>(k)) = kept[k]->loads.loads().transpose();
      w.weights(static_cast<Index>(k)) = kept[k]->probability;
    }
    return w;
  }
  if (options.cost_samples == 0) throw InvalidArgument("cost_samples must be positive");
  Matrix<double> loads = sample_many(spec, options.cost_samples, options.seed,
                                     StreamPurpose::Verification, options.threads);
  const Index n = loads.rows();
  return {std::move(loads), Vector<double>::Constant(n, 1.0 / static_cast<double>(n))};
}

/// Expected bill of `action` for one player when the rest of the flexible load is `others`.
double expected_cost(Mechanism m, const Vector<double>& action, const Vector<double>& others,
                     const WeightedDraws& draws, const MarketInstance<double>& instance) {
  const double tou = tou_cost(action, instance);
  if (m == Mechanism::AP) return tou + instance.demand_rate() * action.maxCoeff();
  const double delta = m == Mechanism::CP ? 1.0 : instance.delta();
  const Vector<double> flexible = others + action;
  const Index periods = flexible.size();
  double demand = 0.0;
  for (Index k = 0; k < draws.loads.rows(); ++k) {
    Index peak = 0;
    double best = draws.loads(k, 0) + flexible(0);
    for (Index t = 1; t < periods; ++t) {
      const double v = draws.loads(k, t) + flexible(t);
      if (v > best) {
        best = v;
        peak = t;
      }
    }
    demand += draws.weights(k) * progressive_charge(action(peak), instance.demand_rate(), delta);
  }
  return tou + demand;
}

/// Smallest expected cost over candidate rows, reduced in chunk order.
double best_candidate_cost(Mechanism m, const Matrix<double>& candidates,
                           const Vector<double>& others, const WeightedDraws& draws,
                           const MarketInstance<double>& instance, unsigned threads) {
  const std::size_t n = static_cast<std::size_t>(candidates.rows());
  const std::size_t chunks = (n + kCandidateChunk - 1) / kCandidateChunk;
  std::vector<double> best(chunks, std::numeric_limits<double>::infinity());
  parallel_chunks(n, kCandidateChunk, threads, [&](std::size_t begin, std::size_t end, std::size_t c) {
    for (std::size_t k = begin; k < end; ++k) {
      const Vector<double> a = candidates.row(static_cast<Index>(k)).transpose();
      best[c] = std::min(best[c], expected_cost(m, a, others, draws, instance));
    }
  });
  double out = std::numeric_limits<double>::infinity();
  for (double v : best) out = std::min(out, v);
  return out;
}

double binomial(std::size_t n, std::size_t k) {
  double out = 1.0;
  for (std::size_t j = 1; j <= k; ++j) out = out * static_cast<double>(n - k + j) / static_cast<double>(j);
  return out;
}

/// All splits of r into T parts on the lattice r / divisions.
Matrix<double> simplex_grid(double r, Index periods, std::size_t divisions) {
  const std::size_t count = static_cast<std::size_t>(
      std::llround(binomial(divisions + static_cast<std::size_t>(periods) - 1,
                            static_cast<std::size_t>(periods) - 1)));
  Matrix<double> out(static_cast<Index>(count), periods);
  std::vector<std::size_t> parts(static_cast<std::size_t>(periods), 0);
  Index row = 0;
  auto emit = [&] {
    for (Index t = 0; t < periods; ++t)
      out(row, t) = r * static_cast<double>(parts[static_cast<std::size_t>(t)]) /
                    static_cast<double>(divisions);
    ++row;
  };
  auto recurse = [&](auto&& self, Index t, std::size_t left) -> void {
    if (t == periods - 1) {
      parts[static_cast<std::size_t>(t)] = left;
      emit();
      return;
    }
    for (std::size_t k = 0; k <= left; ++k) {
      parts[static_cast<std::size_t>(t)] = k;
      self(self, t + 1, left - k);
    }
  };
  recurse(recurse, 0, divisions);
  return out;
}

std::size_t fitting_divisions(Index periods, const AnalysisOptions& options) {
  if (options.grid_divisions == 0) throw InvalidArgument("grid_divisions must be positive");
  std::size_t k = options.grid_divisions;
  const auto count = [&](std::size_t d) {
    return binomial(d + static_cast<std::size_t>(periods) - 1, static_cast<std::size_t>(periods) - 1);
  };
  while (k > 1 && count(k) > static_cast<double>(options.max_grid_points)) --k;
  return k;
}

Matrix<double> random_deviations(Index player, double r, Index periods,
                                 const AnalysisOptions& options) {
  const Index n = static_cast<Index>(options.deviation_samples);
  Matrix<double> out(n + periods + 1, periods);
  for (Index k = 0; k < n; ++k) {
    RandomStream stream(options.seed, StreamPurpose::Deviation,
                        static_cast<std::uint64_t>(player) * options.deviation_samples +
                            static_cast<std::uint64_t>(k));
    for (Index t = 0; t < periods; ++t) out(k, t) = stream.exponential();
    out.row(k) *= r / out.row(k).sum();
  }
  out.block(n, 0, periods, periods) = r * Matrix<double>::Identity(periods, periods);
  out.row(n + periods).setConstant(r / static_cast<double>(periods));
  return out;
}

struct PiRegime {
  bool usable = false;
  PeakProbabilities pi;
};

/// pi usable as an action-independent peak distribution with equal support maxima.
PiRegime stochastic_regime(const DistributionSpec& spec, const MarketInstance<double>& instance,
                           const AnalysisOptions& options,
                           std::optional<Condition11Check>* condition = nullptr) {
  PiRegime out;
  out.pi = peak_probabilities(spec, options.pi_samples, options.seed, options.threads);
  if (!support_max(spec).equal_support) return out;
  if (options.assume_condition_11) {
    out.usable = true;
    return out;
  }
  if (!spec.has_analytic_peak_probabilities()) return out;
  const auto check = check_condition_11(spec, instance.requirements(), options.cost_samples,
                                        options.condition_probes, options.seed, options.threads);
  if (condition) *condition = check;
  out.usable = check.plausible;
  return out;
}

NashCheck finish(const std::vector<double>& gains, double epsilon, bool certified) {
  NashCheck out;
  out.certified = certified;
  out.worst_gain = -std::numeric_limits<double>::infinity();
  Index who = 0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (gains[i] > out.worst_gain) {
      out.worst_gain = gains[i];
      who = static_cast<Index>(i);
    }
  }
  out.holds = out.worst_gain <= epsilon;
  if (!out.holds) out.deviating_player = who;
  return out;
}

Matrix<double> stack_rows(const std::vector<Vector<double>>& rows) {
  Matrix<double> m(static_cast<Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Index>(i)) = rows[i].transpose();
  return m;
}

/// Damped fictitious play: every round each player best-responds to the peak
/// frequencies that the current aggregate load produces on the draws.
Matrix<double> fictitious_play(Mechanism m, const Matrix<double>& draws,
                               const MarketInstance<double>& instance,
                               const AnalysisOptions& options) {
  const Index n = instance.n_players();
  const Index periods = instance.n_periods();
  Matrix<double> profile = Matrix<double>::Zero(n, periods);
  Vector<double> flexible = Vector<double>::Zero(periods);
  for (std::size_t k = 0; k <= options.heuristic_iterations; ++k) {
    const Vector<double> pi = empirical_peak_probabilities(draws, flexible, options.threads);
    const double weight = k == 0 ? 1.0 : 1.0 / static_cast<double>(k + 1);
    for (Index i = 0; i < n; ++i) {
      const Vector<double> response = best_response_given_pi(m, i, pi, instance);
      profile.row(i) = (1.0 - weight) * profile.row(i) + weight * response.transpose();
    }
    flexible = profile.colwise().sum().transpose();
  }
  return profile;
}

double sample_stderr(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace

NashCheck verify_epsilon_nash(const ActionProfile<double>& profile,
                              const BaselineScenario& scenario,
                              const MarketInstance<double>& instance, Mechanism mechanism,
                              double epsilon, VerifyMode mode, const AnalysisOptions& options) {
  if (!profile.satisfies_requirements(instance))
    throw Infeasible("verify_epsilon_nash: profile does not meet every requirement of the market");
  detail::check_periods<double>(n_periods(scenario), instance.n_periods(), "verify_epsilon_nash");
  const Index n = instance.n_players();
  const Index periods = instance.n_periods();
  const Vector<double> flexible = profile.flexible_load();

  if (mode == VerifyMode::Exact) {
    if (auto b = deterministic_baseline(scenario))
      return verify_epsilon_nash_deterministic(profile, *b, instance, mechanism, epsilon);
    if (mechanism == Mechanism::AP) {
      // The anytime bill ignores the baseline.
      const BaselineLoad<double> zero(Vector<double>::Zero(periods));
      return verify_epsilon_nash_deterministic(profile, zero, instance, mechanism, epsilon);
    }
    const auto& spec = std::get<DistributionSpec>(scenario);
    const PiRegime regime = stochastic_regime(spec, instance, options);
    if (!regime.usable)
      throw InvalidArgument("exact verification needs a known baseline, or equal support maxima "
                            "with an action-independent peak distribution");
    std::vector<double> gains(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const Vector<double> current = profile.row(i).transpose();
      const Vector<double> response = best_response_given_pi(mechanism, i, regime.pi.pi, instance);
      gains[static_cast<std::size_t>(i)] =
          expected_cost_given_pi(mechanism, current, regime.pi.pi, instance) -
          expected_cost_given_pi(mechanism, response, regime.pi.pi, instance);
    }
    return finish(gains, epsilon, true);
  }

  const WeightedDraws draws = cost_draws(scenario, options);
  const std::size_t divisions = mode == VerifyMode::Grid ? fitting_divisions(periods, options) : 0;
  std::vector<double> gains(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Vector<double> current = profile.row(i).transpose();
    const Vector<double> others = flexible - current;
    const double r = instance.requirement(i);
    const Matrix<double> candidates = mode == VerifyMode::Grid
                                          ? simplex_grid(r, periods, divisions)
                                          : random_deviations(i, r, periods, options);
    gains[static_cast<std::size_t>(i)] =
        expected_cost(mechanism, current, others, draws, instance) -
        best_candidate_cost(mechanism, candidates, others, draws, instance, options.threads);
  }
  return finish(gains, epsilon, false);
}

EquilibriumReport equilibrium_peak(const MarketInstance<double>& instance,
                                   const BaselineScenario& scenario, Mechanism mechanism,
                                   const EpsilonSchedule& schedule,
                                   const AnalysisOptions& options) {
  require_valid_assumption(instance, "equilibrium_peak");
  detail::check_periods<double>(n_periods(scenario), instance.n_periods(), "equilibrium_peak");
  EquilibriumReport report;
  report.mechanism = mechanism;
  report.delta = mechanism == Mechanism::PP ? instance.delta() : 1.0;
  report.schedule = schedule;
  const Index n = instance.n_players();
  const double eps = schedule.final_value();

  std::vector<Vector<double>> ap_rows;
  if (mechanism == Mechanism::AP)
    for (Index i = 0; i < n; ++i) ap_rows.push_back(best_response_ap(i, instance));

  if (auto b = deterministic_baseline(scenario)) {
    report.peak = closed_form_peak_deterministic(mechanism, instance, *b);
    report.witness_baseline = *b;
    if (mechanism == Mechanism::AP) {
      report.witness_profile = ActionProfile<double>(stack_rows(ap_rows), instance);
    } else if (options.prefer_constructive) {
      report.method = Method::Constructive;
      for (double e : schedule.values()) {
        auto profile = construct_cp_profile_deterministic(instance, *b, e);
        report.schedule_peaks.push_back(peak_demand(profile, *b).value);
        report.witness_profile = std::move(profile);
      }
      report.peak = report.schedule_peaks.back();
    } else {
      try {
        report.witness_profile = construct_cp_profile_deterministic(instance, *b, eps);
      } catch (const InfeasibleEpsilon&) {
        // The closed form stands without a witness.
      }
    }
    if (options.verify && report.witness_profile)
      report.verification = verify_epsilon_nash_deterministic(*report.witness_profile, *b,
                                                              instance, mechanism, eps);
    return report;
  }

  const auto& spec = std::get<DistributionSpec>(scenario);
  if (mechanism == Mechanism::AP) {
    // Unique response, independent of the baseline: exact for any distribution.
    ActionProfile<double> profile(stack_rows(ap_rows), instance);
    const auto worst = worst_case_peak(spec, profile.flexible_load());
    report.peak = worst.peak;
    report.witness_baseline = worst.baseline;
    report.witness_profile = std::move(profile);
    if (options.verify)
      report.verification = verify_epsilon_nash(*report.witness_profile, scenario, instance,
                                                mechanism, eps, VerifyMode::Exact, options);
    return report;
  }

  const PiRegime regime = stochastic_regime(spec, instance, options, &report.condition_11);
  report.peak_probabilities = regime.pi;
  report.samples = regime.pi.samples;

  if (regime.usable) {
    const auto peaks = closed_form_peaks_condition_10_11(instance, spec, regime.pi);
    report.peak = mechanism == Mechanism::CP ? peaks.cp : peaks.pp;
    std::vector<Vector<double>> rows;
    for (Index i = 0; i < n; ++i)
      rows.push_back(best_response_given_pi(mechanism, i, regime.pi.pi, instance));
    ActionProfile<double> profile(stack_rows(rows), instance);
    report.witness_baseline = worst_case_peak(spec, profile.flexible_load()).baseline;
    report.witness_profile = std::move(profile);

    if (regime.pi.method == PeakProbabilities::Method::MonteCarlo) {
      // Batch means over disjoint slices of the same draws.
      const Matrix<double> draws = sample_many(spec, options.pi_samples, options.seed,
                                               StreamPurpose::PeakProbabilities, options.threads);
      const Index batches = std::min<Index>(10, draws.rows());
      const Index size = draws.rows() / batches;
      std::vector<double> values;
      for (Index k = 0; k < batches; ++k) {
        PeakProbabilities slice;
        slice.pi = empirical_peak_probabilities(draws.middleRows(k * size, size),
                                                Vector<double>::Zero(spec.n_periods()),
                                                options.threads);
        const auto p = closed_form_peaks_condition_10_11(instance, spec, slice);
        values.push_back(mechanism == Mechanism::CP ? p.cp : p.pp);
      }
      report.peak_stderr = sample_stderr(values);
    }
    if (options.verify) {
      AnalysisOptions trusted = options;
      trusted.assume_condition_11 = true;
      report.verification = verify_epsilon_nash(*report.witness_profile, scenario, instance,
                                                mechanism, eps, VerifyMode::Exact, trusted);
    }
    return report;
  }

  // General distribution: heuristic lower bound.
  if (options.cost_samples == 0) throw InvalidArgument("cost_samples must be positive");
  report.method = Method::MonteCarlo;
  report.lower_bound = true;
  report.samples = options.cost_samples;
  const Matrix<double> draws = sample_many(spec, options.cost_samples, options.seed,
                                           StreamPurpose::Baseline, options.threads);
  ActionProfile<double> profile(fictitious_play(mechanism, draws, instance, options), instance);
  const auto worst = worst_case_peak(spec, profile.flexible_load());
  report.peak = worst.peak;
  report.witness_baseline = worst.baseline;
  PeakProbabilities realized;
  realized.pi = empirical_peak_probabilities(draws, profile.flexible_load(), options.threads);
  realized.method = PeakProbabilities::Method::MonteCarlo;
  realized.samples = options.cost_samples;
  realized.seed = options.seed;
  realized.stderr_ = (realized.pi.array() * (1.0 - realized.pi.array()) /
                      static_cast<double>(options.cost_samples))
                         .sqrt()
                         .matrix();
  report.peak_probabilities = std::move(realized);

  const Index batches = std::min<Index>(4, draws.rows());
  if (batches >= 2) {
    const Index size = draws.rows() / batches;
    std::vector<double> values;
    for (Index k = 0; k < batches; ++k) {
      const Matrix<double> slice = draws.middleRows(k * size, size);
      const Matrix<double> p = fictitious_play(mechanism, slice, instance, options);
      values.push_back(worst_case_peak(spec, p.colwise().sum().transpose()).peak);
    }
    report.peak_stderr = sample_stderr(values);
  }
  report.witness_profile = std::move(profile);
  if (options.verify)
    report.verification = verify_epsilon_nash(*report.witness_profile, scenario, instance,
                                              mechanism, eps, VerifyMode::MonteCarlo, options);
  return report;
}

}  // namespace peakprice
