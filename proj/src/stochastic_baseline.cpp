#include "peakprice/stochastic_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "peakprice/best_response.hpp"
#include "peakprice/parallel.hpp"

namespace peakprice {

namespace {

constexpr double kProbabilitySumTolerance = 1e-12;
constexpr std::size_t kChunk = 4096;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate_family(const PeriodFamily& family) {
  std::visit(overloaded{
                 [](const TriangularFamily& f) {
                   if (!(f.min >= 0.0 && f.min <= f.mode && f.mode <= f.max && f.min < f.max))
                     throw InvalidArgument("triangular family needs 0 <= min <= mode <= max, min < max");
                   if (!(f.scale > 0.0) || !std::isfinite(f.scale) || !std::isfinite(f.max))
                     throw InvalidArgument("triangular family needs a finite positive scale");
                 },
                 [](const BetaFamily& f) {
                   if (!(f.alpha > 0.0) || !(f.beta > 0.0) || !std::isfinite(f.alpha) ||
                       !std::isfinite(f.beta))
                     throw InvalidArgument("beta family needs alpha, beta > 0");
                   if (!(f.scale > 0.0) || !std::isfinite(f.scale))
                     throw InvalidArgument("beta family needs a finite positive scale");
                 },
                 [](const UniformFamily& f) {
                   if (!(f.min >= 0.0 && f.min < f.max && std::isfinite(f.max)))
                     throw InvalidArgument("uniform family needs 0 <= min < max < inf");
                 },
             },
             family);
}

void validate_probabilities(const Vector<double>& q, const char* what) {
  if (q.size() == 0) throw InvalidArgument(std::string(what) + ": empty");
  if (!detail::all_finite(q) || (q.array() < 0.0).any())
    throw InvalidArgument(std::string(what) + ": probabilities must be finite and nonnegative");
  if (std::abs(q.sum() - 1.0) > kProbabilitySumTolerance)
    throw InvalidArgument(std::string(what) + ": probabilities must sum to 1");
}

double family_max(const PeriodFamily& family) {
  return std::visit(overloaded{
                        [](const TriangularFamily& f) { return f.scale * f.max; },
                        [](const BetaFamily& f) { return f.scale; },
                        [](const UniformFamily& f) { return f.max; },
                    },
                    family);
}

double draw_family(const PeriodFamily& family, RandomStream& stream) {
  return std::visit(
      overloaded{
          [&](const TriangularFamily& f) {
            const double u = stream.uniform();
            const double width = f.max - f.min;
            const double split = (f.mode - f.min) / width;
            const double x = u < split ? f.min + std::sqrt(u * width * (f.mode - f.min))
                                       : f.max - std::sqrt((1.0 - u) * width * (f.max - f.mode));
            return f.scale * x;
          },
          [&](const BetaFamily& f) {
            std::gamma_distribution<double> ga(f.alpha, 1.0);
            std::gamma_distribution<double> gb(f.beta, 1.0);
            const double x = ga(stream);
            const double y = gb(stream);
            const double total = x + y;
            return f.scale * (total > 0.0 ? x / total : 0.5);
          },
          [&](const UniformFamily& f) { return f.min + (f.max - f.min) * stream.uniform(); },
      },
      family);
}

Index pick(const Vector<double>& probabilities, double u) {
  double cumulative = 0.0;
  Index last_positive = 0;
  for (Index k = 0; k < probabilities.size(); ++k) {
    if (probabilities(k) <= 0.0) continue;
    cumulative += probabilities(k);
    last_positive = k;
    if (u < cumulative) return k;
  }
  return last_positive;
}

Vector<double> atom_probabilities(const DiscreteAtoms& d) {
  Vector<double> q(static_cast<Index>(d.atoms.size()));
  for (std::size_t k = 0; k < d.atoms.size(); ++k) q(static_cast<Index>(k)) = d.atoms[k].probability;
  return q;
}

Vector<double> binomial_stderr(const Vector<double>& pi, std::size_t samples) {
  return (pi.array() * (1.0 - pi.array()) / static_cast<double>(samples)).sqrt().matrix();
}

}  // namespace

DistributionSpec DistributionSpec::discrete(std::vector<BaselineAtom> atoms) {
  if (atoms.empty()) throw InvalidArgument("discrete baseline needs at least one atom");
  const Index periods = atoms.front().loads.n_periods();
  for (const auto& atom : atoms)
    if (atom.loads.n_periods() != periods)
      throw InvalidArgument("discrete baseline atoms must share the period count");
  DiscreteAtoms d{std::move(atoms)};
  validate_probabilities(atom_probabilities(d), "discrete baseline");
  return DistributionSpec(std::move(d));
}

DistributionSpec DistributionSpec::degenerate(BaselineLoad<double> loads) {
  std::vector<BaselineAtom> atoms;
  atoms.push_back({std::move(loads), 1.0});
  return discrete(std::move(atoms));
}

DistributionSpec DistributionSpec::independent(std::vector<PeriodFamily> periods) {
  if (periods.empty()) throw InvalidArgument("independent baseline needs at least one period");
  for (const auto& f : periods) validate_family(f);
  return DistributionSpec(IndependentPeriods{std::move(periods)});
}

DistributionSpec DistributionSpec::conditional_uniform(Vector<double> peak_probabilities,
                                                       double low_min, double low_max,
                                                       double high_min, double high_max) {
  validate_probabilities(peak_probabilities, "conditional-uniform peak probabilities");
  if (!(0.0 <= low_min && low_min <= low_max && low_max <= high_min && high_min <= high_max) ||
      !std::isfinite(high_max))
    throw InvalidArgument(
        "conditional-uniform needs 0 <= low_min <= low_max <= high_min <= high_max < inf");
  return DistributionSpec(
      ConditionalUniform{std::move(peak_probabilities), low_min, low_max, high_min, high_max});
}

Index DistributionSpec::n_periods() const {
  return std::visit(overloaded{
                        [](const DiscreteAtoms& d) { return d.atoms.front().loads.n_periods(); },
                        [](const IndependentPeriods& d) { return Index(d.periods.size()); },
                        [](const ConditionalUniform& d) { return d.peak_probabilities.size(); },
                    },
                    kind_);
}

bool DistributionSpec::has_analytic_peak_probabilities() const {
  return !std::holds_alternative<IndependentPeriods>(kind_);
}

std::optional<BaselineLoad<double>> DistributionSpec::as_deterministic() const {
  if (const auto* d = std::get_if<DiscreteAtoms>(&kind_)) {
    std::optional<BaselineLoad<double>> only;
    for (const auto& atom : d->atoms) {
      if (atom.probability <= 0.0) continue;
      if (only && (only->loads().array() != atom.loads.loads().array()).any()) return std::nullopt;
      only = atom.loads;
    }
    return only;
  }
  return std::nullopt;
}

std::optional<BaselineLoad<double>> deterministic_baseline(const BaselineScenario& scenario) {
  if (const auto* b = std::get_if<BaselineLoad<double>>(&scenario)) return *b;
  return std::get<DistributionSpec>(scenario).as_deterministic();
}

Index n_periods(const BaselineScenario& scenario) {
  return std::visit(overloaded{
                        [](const BaselineLoad<double>& b) { return b.n_periods(); },
                        [](const DistributionSpec& s) { return s.n_periods(); },
                    },
                    scenario);
}

BaselineLoad<double> sample(const DistributionSpec& spec, RandomStream& stream) {
  return std::visit(
      overloaded{
          [&](const DiscreteAtoms& d) {
            return d.atoms[static_cast<std::size_t>(pick(atom_probabilities(d), stream.uniform()))]
                .loads;
          },
          [&](const IndependentPeriods& d) {
            Vector<double> b(static_cast<Index>(d.periods.size()));
            for (Index t = 0; t < b.size(); ++t)
              b(t) = draw_family(d.periods[static_cast<std::size_t>(t)], stream);
            return BaselineLoad<double>(std::move(b));
          },
          [&](const ConditionalUniform& d) {
            const Index chosen = pick(d.peak_probabilities, stream.uniform());
            Vector<double> b(d.peak_probabilities.size());
            for (Index t = 0; t < b.size(); ++t) {
              const double u = stream.uniform();
              b(t) = t == chosen ? d.high_min + (d.high_max - d.high_min) * u
                                 : d.low_min + (d.low_max - d.low_min) * u;
            }
            return BaselineLoad<double>(std::move(b));
          },
      },
      spec.kind());
}

Matrix<double> sample_many(const DistributionSpec& spec, std::size_t count, std::uint64_t seed,
                           StreamPurpose purpose, unsigned threads) {
  Matrix<double> draws(static_cast<Index>(count), spec.n_periods());
  parallel_chunks(count, kChunk, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t k = begin; k < end; ++k) {
      RandomStream stream(seed, purpose, k);
      draws.row(static_cast<Index>(k)) = sample(spec, stream).loads().transpose();
    }
  });
  return draws;
}

Vector<double> empirical_peak_probabilities(const Matrix<double>& draws,
                                            const Vector<double>& flexible, unsigned threads) {
  const Index periods = draws.cols();
  detail::check_periods<double>(flexible.size(), periods, "empirical_peak_probabilities");
  const std::size_t n = static_cast<std::size_t>(draws.rows());
  if (n == 0) throw InvalidArgument("empirical_peak_probabilities: no draws");
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<std::vector<std::size_t>> counts(chunks, std::vector<std::size_t>(periods, 0));
  parallel_chunks(n, kChunk, threads, [&](std::size_t begin, std::size_t end, std::size_t c) {
    auto& local = counts[c];
    for (std::size_t k = begin; k < end; ++k) {
      const auto row = draws.row(static_cast<Index>(k));
      Index best = 0;
      double best_value = row(0) + flexible(0);
      for (Index t = 1; t < periods; ++t) {
        const double v = row(t) + flexible(t);
        if (v > best_value) {
          best_value = v;
          best = t;
        }
      }
      ++local[static_cast<std::size_t>(best)];
    }
  });
  Vector<double> pi = Vector<double>::Zero(periods);
  for (const auto& local : counts)
    for (Index t = 0; t < periods; ++t) pi(t) += static_cast<double>(local[static_cast<std::size_t>(t)]);
  return pi / static_cast<double>(n);
}

PeakProbabilities peak_probabilities_monte_carlo(const DistributionSpec& spec, std::size_t samples,
                                                 std::uint64_t seed, unsigned threads) {
  if (samples == 0) throw InvalidArgument("peak_probabilities: need at least one sample");
  const Matrix<double> draws =
      sample_many(spec, samples, seed, StreamPurpose::PeakProbabilities, threads);
  PeakProbabilities out;
  out.pi = empirical_peak_probabilities(draws, Vector<double>::Zero(spec.n_periods()), threads);
  out.method = PeakProbabilities::Method::MonteCarlo;
  out.samples = samples;
  out.seed = seed;
  out.stderr_ = binomial_stderr(out.pi, samples);
  return out;
}

PeakProbabilities peak_probabilities(const DistributionSpec& spec, std::size_t samples,
                                     std::uint64_t seed, unsigned threads) {
  if (const auto* d = std::get_if<DiscreteAtoms>(&spec.kind())) {
    PeakProbabilities out;
    out.pi = Vector<double>::Zero(spec.n_periods());
    for (const auto& atom : d->atoms) out.pi(argmax_earliest(atom.loads.loads())) += atom.probability;
    return out;
  }
  if (const auto* c = std::get_if<ConditionalUniform>(&spec.kind())) {
    PeakProbabilities out;
    out.pi = c->peak_probabilities;
    return out;
  }
  return peak_probabilities_monte_carlo(spec, samples, seed, threads);
}

SupportMax support_max(const DistributionSpec& spec) {
  SupportMax out;
  out.per_period = std::visit(
      overloaded{
          [](const DiscreteAtoms& d) {
            Vector<double> m = Vector<double>::Zero(d.atoms.front().loads.n_periods());
            for (const auto& atom : d.atoms)
              if (atom.probability > 0.0) m = m.cwiseMax(atom.loads.loads());
            return m;
          },
          [](const IndependentPeriods& d) {
            Vector<double> m(static_cast<Index>(d.periods.size()));
            for (Index t = 0; t < m.size(); ++t) m(t) = family_max(d.periods[static_cast<std::size_t>(t)]);
            return m;
          },
          [](const ConditionalUniform& d) {
            Vector<double> m(d.peak_probabilities.size());
            for (Index t = 0; t < m.size(); ++t)
              m(t) = d.peak_probabilities(t) > 0.0 ? d.high_max : d.low_max;
            return m;
          },
      },
      spec.kind());
  out.global = out.per_period.maxCoeff();
  out.equal_support = (out.per_period.array() == out.global).all();
  return out;
}

WorstRealization worst_case_peak(const DistributionSpec& spec, const Vector<double>& flexible) {
  detail::check_periods<double>(flexible.size(), spec.n_periods(), "worst_case_peak");
  auto peak_of = [&](const Vector<double>& b) { return (b + flexible).maxCoeff(); };
  return std::visit(
      overloaded{
          [&](const DiscreteAtoms& d) {
            const BaselineAtom* best = nullptr;
            double best_peak = 0.0;
            for (const auto& atom : d.atoms) {
              if (atom.probability <= 0.0) continue;
              const double v = peak_of(atom.loads.loads());
              if (!best || v > best_peak) {
                best = &atom;
                best_peak = v;
              }
            }
            return WorstRealization{best_peak, best->loads};
          },
          [&](const IndependentPeriods&) {
            const Vector<double> b = support_max(spec).per_period;
            return WorstRealization{peak_of(b), BaselineLoad<double>(b)};
          },
          [&](const ConditionalUniform& d) {
            std::optional<WorstRealization> best;
            for (Index k = 0; k < d.peak_probabilities.size(); ++k) {
              if (d.peak_probabilities(k) <= 0.0) continue;
              Vector<double> b = Vector<double>::Constant(flexible.size(), d.low_max);
              b(k) = d.high_max;
              const double v = peak_of(b);
              if (!best || v > best->peak) best = WorstRealization{v, BaselineLoad<double>(b)};
            }
            return *best;
          },
      },
      spec.kind());
}

Condition11Check check_condition_11(const DistributionSpec& spec,
                                    const Vector<double>& requirements, std::size_t samples,
                                    std::size_t probes, std::uint64_t seed, unsigned threads) {
  if (samples == 0) throw InvalidArgument("check_condition_11: need at least one sample");
  const Index periods = spec.n_periods();
  const Matrix<double> draws =
      sample_many(spec, samples, seed, StreamPurpose::PeakProbabilities, threads);
  const Vector<double> reference =
      empirical_peak_probabilities(draws, Vector<double>::Zero(periods), threads);

  Condition11Check out;
  out.plausible = true;
  double worst_excess = -1.0;
  for (std::size_t k = 0; k < probes; ++k) {
    RandomStream stream(seed, StreamPurpose::ConditionProbe, k);
    Vector<double> flexible = Vector<double>::Zero(periods);
    for (Index i = 0; i < requirements.size(); ++i) {
      Vector<double> split(periods);
      for (Index t = 0; t < periods; ++t) split(t) = stream.exponential();
      flexible += requirements(i) * split / split.sum();
    }
    const Vector<double> probe = empirical_peak_probabilities(draws, flexible, threads);
    for (Index t = 0; t < periods; ++t) {
      const double discrepancy = std::abs(probe(t) - reference(t));
      const double pooled = std::sqrt((reference(t) * (1.0 - reference(t)) +
                                       probe(t) * (1.0 - probe(t))) /
                                      static_cast<double>(samples));
      const double tolerance = 3.0 * pooled;
      if (discrepancy > tolerance) out.plausible = false;
      if (discrepancy - tolerance > worst_excess) {
        worst_excess = discrepancy - tolerance;
        out.tolerance = tolerance;
      }
      out.max_discrepancy = std::max(out.max_discrepancy, discrepancy);
    }
  }
  return out;
}

StochasticPeaks closed_form_peaks_condition_10_11(const MarketInstance<double>& instance,
                                                  const DistributionSpec& spec,
                                                  const PeakProbabilities& pi) {
  require_valid_assumption(instance, "closed_form_peaks_condition_10_11");
  const Index periods = instance.n_periods();
  detail::check_periods<double>(spec.n_periods(), periods, "closed_form_peaks_condition_10_11");
  detail::check_peak_probabilities(pi.pi, periods);
  const SupportMax support = support_max(spec);
  if (!support.equal_support)
    throw InvalidArgument(
        "closed_form_peaks_condition_10_11: periods do not share the same support maximum");

  const double b_max = support.global;
  const double total = instance.total_requirement();
  StochasticPeaks out{};
  out.ap = b_max + total / static_cast<double>(periods);
  out.cp = b_max + total;

  const double pi_min = pi.pi.minCoeff();
  if (instance.delta() == 1.0 || pi_min == 0.0) {
    out.pp = out.cp;
    out.pp_factor = 1.0;
    return out;
  }
  // (delta pi_min)^(-k) / sum_t (delta pi^t)^(-k) == 1 / sum_t (pi_min / pi^t)^k
  const double k = 1.0 / (instance.delta() - 1.0);
  double denominator = 0.0;
  for (Index t = 0; t < periods; ++t) denominator += std::pow(pi_min / pi.pi(t), k);
  out.pp_factor = 1.0 / denominator;
  const double slack = 1e-12;
  if (out.pp_factor < 1.0 / static_cast<double>(periods) - slack || out.pp_factor > 1.0 + slack)
    throw InternalError("progressive peak factor left [1/T, 1]");

  if (detail::uniform_rates(instance.tou_rates())) {
    out.pp = b_max + out.pp_factor * total;
  } else {
    // Unequal rates move the KKT point; sum the actual responses instead.
    Vector<double> flexible = Vector<double>::Zero(periods);
    for (Index i = 0; i < instance.n_players(); ++i)
      flexible += best_response_pp_random(i, pi.pi, instance);
    out.pp = b_max + flexible.maxCoeff();
  }
  return out;
}

}  // namespace peakprice
