#include "peakprice/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace peakprice {

namespace {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& field,
                         const std::string& message) const {
    const YAML::Mark mark = node.IsDefined() ? node.Mark() : YAML::Mark::null_mark();
    std::ostringstream os;
    os << origin_;
    if (!mark.is_null()) os << ':' << mark.line + 1 << ':' << mark.column + 1;
    os << ": " << field << ": " << message;
    throw ParseError(os.str());
  }

  void expect_map(const YAML::Node& node, const std::string& field,
                  std::initializer_list<const char*> allowed) const {
    if (!node.IsMap()) fail(node, field, "expected a mapping");
    for (const auto& entry : node) {
      const auto key = entry.first.as<std::string>();
      const bool known = std::any_of(allowed.begin(), allowed.end(),
                                     [&](const char* k) { return key == k; });
      if (!known) fail(entry.first, field.empty() ? key : field + "." + key, "unknown key");
    }
  }

  YAML::Node required(const YAML::Node& parent, const char* key, const std::string& field) const {
    const YAML::Node child = parent[key];
    if (!child) fail(parent, field, std::string("missing required key '") + key + "'");
    return child;
  }

  double real(const YAML::Node& node, const std::string& field) const {
    if (!node.IsScalar()) fail(node, field, "expected a number");
    double v = 0.0;
    try {
      v = node.as<double>();
    } catch (const YAML::Exception&) {
      fail(node, field, "expected a number, got '" + node.Scalar() + "'");
    }
    if (!std::isfinite(v)) fail(node, field, "must be finite");
    return v;
  }

  std::uint64_t count(const YAML::Node& node, const std::string& field) const {
    if (!node.IsScalar() || node.Scalar().empty() || node.Scalar().front() == '-')
      fail(node, field, "expected a nonnegative integer");
    try {
      return node.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      fail(node, field, "expected a nonnegative integer, got '" + node.Scalar() + "'");
    }
  }

  bool flag(const YAML::Node& node, const std::string& field) const {
    try {
      return node.as<bool>();
    } catch (const YAML::Exception&) {
      fail(node, field, "expected true or false");
    }
  }

  std::string text(const YAML::Node& node, const std::string& field) const {
    if (!node.IsScalar()) fail(node, field, "expected a string");
    return node.Scalar();
  }

  std::vector<double> reals(const YAML::Node& node, const std::string& field) const {
    if (!node.IsSequence()) fail(node, field, "expected a list of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < node.size(); ++k)
      out.push_back(real(node[k], field + "[" + std::to_string(k) + "]"));
    return out;
  }

  Vector<double> vector(const YAML::Node& node, const std::string& field) const {
    const auto values = reals(node, field);
    return Eigen::Map<const Vector<double>>(values.data(), static_cast<Index>(values.size()));
  }

  /// Runs a domain constructor, reporting its complaint against `node`.
  template <typename Fn>
  auto build(const YAML::Node& node, const std::string& field, Fn&& fn) const {
    try {
      return fn();
    } catch (const InvalidArgument& e) {
      fail(node, field, e.what());
    }
  }

 private:
  std::string origin_;
};

PeriodFamily parse_family(const Reader& in, const YAML::Node& node, const std::string& field) {
  if (!node.IsMap()) in.fail(node, field, "expected a mapping with a 'family' key");
  const std::string family = in.text(in.required(node, "family", field), field + ".family");
  auto get = [&](const char* key, double fallback) {
    return node[key] ? in.real(node[key], field + "." + key) : fallback;
  };
  if (family == "triangular") {
    in.expect_map(node, field, {"family", "min", "mode", "max", "scale"});
    return TriangularFamily{in.real(in.required(node, "min", field), field + ".min"),
                            in.real(in.required(node, "mode", field), field + ".mode"),
                            in.real(in.required(node, "max", field), field + ".max"),
                            get("scale", 1.0)};
  }
  if (family == "beta") {
    in.expect_map(node, field, {"family", "alpha", "beta", "scale"});
    return BetaFamily{in.real(in.required(node, "alpha", field), field + ".alpha"),
                      in.real(in.required(node, "beta", field), field + ".beta"),
                      get("scale", 1.0)};
  }
  if (family == "uniform") {
    in.expect_map(node, field, {"family", "min", "max"});
    return UniformFamily{in.real(in.required(node, "min", field), field + ".min"),
                         in.real(in.required(node, "max", field), field + ".max")};
  }
  in.fail(node["family"], field + ".family",
          "unknown family '" + family + "' (expected triangular, beta or uniform)");
}

std::pair<double, double> parse_range(const Reader& in, const YAML::Node& node,
                                      const std::string& field) {
  const auto values = in.reals(node, field);
  if (values.size() != 2) in.fail(node, field, "expected [min, max]");
  return {values[0], values[1]};
}

BaselineScenario parse_baseline(const Reader& in, const YAML::Node& node) {
  in.expect_map(node, "baseline", {"loads", "atoms", "independent", "conditional_uniform"});
  if (node.size() != 1)
    in.fail(node, "baseline",
            "expected exactly one of loads, atoms, independent, conditional_uniform");
  if (const auto loads = node["loads"])
    return in.build(loads, "baseline.loads",
                    [&] { return BaselineLoad<double>(in.vector(loads, "baseline.loads")); });

  if (const auto atoms = node["atoms"]) {
    if (!atoms.IsSequence()) in.fail(atoms, "baseline.atoms", "expected a list of atoms");
    std::vector<BaselineAtom> parsed;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const std::string field = "baseline.atoms[" + std::to_string(k) + "]";
      const auto atom = atoms[k];
      in.expect_map(atom, field, {"loads", "probability"});
      const auto loads = in.required(atom, "loads", field);
      parsed.push_back(
          {in.build(loads, field + ".loads",
                    [&] { return BaselineLoad<double>(in.vector(loads, field + ".loads")); }),
           in.real(in.required(atom, "probability", field), field + ".probability")});
    }
    return in.build(atoms, "baseline.atoms",
                    [&] { return DistributionSpec::discrete(std::move(parsed)); });
  }

  if (const auto periods = node["independent"]) {
    if (!periods.IsSequence())
      in.fail(periods, "baseline.independent", "expected one family per period");
    std::vector<PeriodFamily> families;
    for (std::size_t k = 0; k < periods.size(); ++k)
      families.push_back(
          parse_family(in, periods[k], "baseline.independent[" + std::to_string(k) + "]"));
    return in.build(periods, "baseline.independent",
                    [&] { return DistributionSpec::independent(std::move(families)); });
  }

  const auto cu = node["conditional_uniform"];
  const std::string field = "baseline.conditional_uniform";
  in.expect_map(cu, field, {"peak_probabilities", "low", "high"});
  const auto q = in.vector(in.required(cu, "peak_probabilities", field),
                           field + ".peak_probabilities");
  const auto low = parse_range(in, in.required(cu, "low", field), field + ".low");
  const auto high = parse_range(in, in.required(cu, "high", field), field + ".high");
  return in.build(cu, field, [&] {
    return DistributionSpec::conditional_uniform(q, low.first, low.second, high.first,
                                                 high.second);
  });
}

RunConfig parse_run(const Reader& in, const YAML::Node& node) {
  RunConfig run;
  if (!node) return run;
  in.expect_map(node, "run",
                {"mechanisms", "delta_grid", "epsilon_schedule", "extrapolation", "samples",
                 "cost_samples", "deviation_samples", "grid_divisions", "condition_probes",
                 "heuristic_iterations", "seed", "method", "assume_condition_11", "verify"});
  if (const auto m = node["mechanisms"]) {
    if (!m.IsSequence()) in.fail(m, "run.mechanisms", "expected a list such as [AP, CP, PP]");
    run.mechanisms.clear();
    for (std::size_t k = 0; k < m.size(); ++k) {
      const std::string field = "run.mechanisms[" + std::to_string(k) + "]";
      run.mechanisms.push_back(in.build(m[k], field, [&] { return parse_mechanism(in.text(m[k], field)); }));
    }
  }
  if (const auto g = node["delta_grid"]) {
    run.delta_grid = in.reals(g, "run.delta_grid");
    for (double d : run.delta_grid)
      if (!(d >= 1.0)) in.fail(g, "run.delta_grid", "every delta must be >= 1");
  }
  Extrapolation extrapolation = run.schedule.extrapolation();
  if (const auto e = node["extrapolation"]) {
    const std::string v = in.text(e, "run.extrapolation");
    if (v == "none") extrapolation = Extrapolation::None;
    else if (v == "last-value") extrapolation = Extrapolation::LastValue;
    else in.fail(e, "run.extrapolation", "expected none or last-value");
  }
  std::vector<double> eps = run.schedule.values();
  if (const auto s = node["epsilon_schedule"]) eps = in.reals(s, "run.epsilon_schedule");
  run.schedule = in.build(node["epsilon_schedule"] ? node["epsilon_schedule"] : node,
                          "run.epsilon_schedule",
                          [&] { return EpsilonSchedule(eps, extrapolation); });

  auto counted = [&](const char* key, std::size_t& target, bool positive) {
    if (const auto v = node[key]) {
      target = static_cast<std::size_t>(in.count(v, std::string("run.") + key));
      if (positive && target == 0) in.fail(v, std::string("run.") + key, "must be positive");
    }
  };
  counted("samples", run.samples, true);
  counted("cost_samples", run.cost_samples, true);
  counted("deviation_samples", run.deviation_samples, false);
  counted("grid_divisions", run.grid_divisions, true);
  counted("condition_probes", run.condition_probes, false);
  counted("heuristic_iterations", run.heuristic_iterations, false);
  if (const auto v = node["seed"]) run.seed = in.count(v, "run.seed");
  if (const auto v = node["method"]) {
    const std::string m = in.text(v, "run.method");
    if (m == "auto") run.constructive = false;
    else if (m == "constructive") run.constructive = true;
    else in.fail(v, "run.method", "expected auto or constructive");
  }
  if (const auto v = node["assume_condition_11"])
    run.assume_condition_11 = in.flag(v, "run.assume_condition_11");
  if (const auto v = node["verify"]) run.verify = in.flag(v, "run.verify");
  return run;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename Range>
std::string list(const Range& values) {
  std::string out = "[";
  bool first = true;
  for (double v : values) {
    if (!first) out += ", ";
    out += fmt(v);
    first = false;
  }
  return out + "]";
}

std::string list(const Vector<double>& v) {
  return list(std::vector<double>(v.data(), v.data() + v.size()));
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

void write_family(std::ostream& os, const PeriodFamily& family) {
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, TriangularFamily>)
          os << "{family: triangular, min: " << fmt(f.min) << ", mode: " << fmt(f.mode)
             << ", max: " << fmt(f.max) << ", scale: " << fmt(f.scale) << "}";
        else if constexpr (std::is_same_v<T, BetaFamily>)
          os << "{family: beta, alpha: " << fmt(f.alpha) << ", beta: " << fmt(f.beta)
             << ", scale: " << fmt(f.scale) << "}";
        else
          os << "{family: uniform, min: " << fmt(f.min) << ", max: " << fmt(f.max) << "}";
      },
      family);
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  Reader in(origin);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(origin + ":" + std::to_string(e.mark.line + 1) + ":" +
                     std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  in.expect_map(root, "", {"name", "market", "baseline", "run"});

  const auto market = in.required(root, "market", "market");
  in.expect_map(market, "market", {"requirements", "tou_rates", "demand_rate", "delta"});
  const auto r = in.vector(in.required(market, "requirements", "market"), "market.requirements");
  const auto p = in.vector(in.required(market, "tou_rates", "market"), "market.tou_rates");
  const double pd = in.real(in.required(market, "demand_rate", "market"), "market.demand_rate");
  const double delta = market["delta"] ? in.real(market["delta"], "market.delta") : 1.0;
  auto instance = in.build(market, "market", [&] { return MarketInstance<double>(r, p, pd, delta); });

  auto baseline = parse_baseline(in, in.required(root, "baseline", "baseline"));
  if (n_periods(baseline) != instance.n_periods())
    in.fail(root["baseline"], "baseline",
            "has " + std::to_string(n_periods(baseline)) + " periods but market.tou_rates has " +
                std::to_string(instance.n_periods()));

  std::string name = root["name"] ? in.text(root["name"], "name") : "scenario";
  return Scenario{std::move(name), std::move(instance), std::move(baseline),
                  parse_run(in, root["run"])};
}

Scenario load_scenario(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ParseError(path + ": cannot open scenario file");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_scenario(buffer.str(), path);
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "name: " << quoted(s.name) << "\n";
  os << "market:\n";
  os << "  requirements: " << list(s.market.requirements()) << "\n";
  os << "  tou_rates: " << list(s.market.tou_rates()) << "\n";
  os << "  demand_rate: " << fmt(s.market.demand_rate()) << "\n";
  os << "  delta: " << fmt(s.market.delta()) << "\n";
  os << "baseline:\n";
  if (const auto* b = std::get_if<BaselineLoad<double>>(&s.baseline)) {
    os << "  loads: " << list(b->loads()) << "\n";
  } else {
    const auto& spec = std::get<DistributionSpec>(s.baseline);
    std::visit(
        [&](const auto& kind) {
          using T = std::decay_t<decltype(kind)>;
          if constexpr (std::is_same_v<T, DiscreteAtoms>) {
            os << "  atoms:\n";
            for (const auto& atom : kind.atoms)
              os << "    - {loads: " << list(atom.loads.loads())
                 << ", probability: " << fmt(atom.probability) << "}\n";
          } else if constexpr (std::is_same_v<T, IndependentPeriods>) {
            os << "  independent:\n";
            for (const auto& f : kind.periods) {
              os << "    - ";
              write_family(os, f);
              os << "\n";
            }
          } else {
            os << "  conditional_uniform:\n";
            os << "    peak_probabilities: " << list(kind.peak_probabilities) << "\n";
            os << "    low: [" << fmt(kind.low_min) << ", " << fmt(kind.low_max) << "]\n";
            os << "    high: [" << fmt(kind.high_min) << ", " << fmt(kind.high_max) << "]\n";
          }
        },
        spec.kind());
  }
  const RunConfig& run = s.run;
  os << "run:\n";
  os << "  mechanisms: [";
  for (std::size_t k = 0; k < run.mechanisms.size(); ++k)
    os << (k ? ", " : "") << to_string(run.mechanisms[k]);
  os << "]\n";
  os << "  delta_grid: " << list(run.delta_grid) << "\n";
  os << "  epsilon_schedule: " << list(run.schedule.values()) << "\n";
  os << "  extrapolation: "
     << (run.schedule.extrapolation() == Extrapolation::None ? "none" : "last-value") << "\n";
  os << "  samples: " << run.samples << "\n";
  os << "  cost_samples: " << run.cost_samples << "\n";
  os << "  deviation_samples: " << run.deviation_samples << "\n";
  os << "  grid_divisions: " << run.grid_divisions << "\n";
  os << "  condition_probes: " << run.condition_probes << "\n";
  os << "  heuristic_iterations: " << run.heuristic_iterations << "\n";
  os << "  seed: " << run.seed << "\n";
  os << "  method: " << (run.constructive ? "constructive" : "auto") << "\n";
  os << "  assume_condition_11: " << (run.assume_condition_11 ? "true" : "false") << "\n";
  os << "  verify: " << (run.verify ? "true" : "false") << "\n";
  return os.str();
}

AnalysisOptions analysis_options(const RunConfig& run, unsigned threads) {
  AnalysisOptions o;
  o.pi_samples = run.samples;
  o.cost_samples = run.cost_samples;
  o.deviation_samples = run.deviation_samples;
  o.grid_divisions = run.grid_divisions;
  o.condition_probes = run.condition_probes;
  o.heuristic_iterations = run.heuristic_iterations;
  o.seed = run.seed;
  o.threads = threads;
  o.prefer_constructive = run.constructive;
  o.assume_condition_11 = run.assume_condition_11;
  o.verify = run.verify;
  return o;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    if (begin == std::string::npos) {
      if (text.find_first_not_of(" \t,") == std::string::npos) continue;
      throw InvalidArgument("empty entry in list '" + text + "'");
    }
    const auto end = item.find_last_not_of(" \t");
    const std::string token = item.substr(begin, end - begin + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || !std::isfinite(v))
      throw InvalidArgument("'" + token + "' is not a finite number");
    out.push_back(v);
  }
  return out;
}

Matrix<double> parse_profile_csv(const std::string& text, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      rows.push_back(parse_real_list(line));
    } catch (const InvalidArgument& e) {
      throw ParseError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
    if (rows.back().size() != rows.front().size())
      throw ParseError(origin + ":" + std::to_string(number) + ": expected " +
                       std::to_string(rows.front().size()) + " values per row");
  }
  if (rows.empty() || rows.front().empty()) throw ParseError(origin + ": profile has no rows");
  Matrix<double> m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t t = 0; t < rows[i].size(); ++t)
      m(static_cast<Index>(i), static_cast<Index>(t)) = rows[i][t];
  return m;
}

}  // namespace peakprice
