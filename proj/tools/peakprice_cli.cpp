// peakprice: compare, reproduce, verify, sample, pi.
//
// Exit codes: 0 success (verify: holds), 1 verify: does not hold,
// 2 parse error or infeasible profile, 3 flagged instance, 4 infeasible
// epsilon, 70 internal error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "peakprice/experiments.hpp"

namespace fs = std::filesystem;
using namespace peakprice;

namespace {

enum Exit : int {
  kOk = 0,
  kDoesNotHold = 1,
  kParse = 2,
  kFlagged = 3,
  kInfeasibleEpsilon = 4,
  kInternal = 70,
};

struct Common {
  std::string scenario;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::string epsilon_schedule;
  std::string delta_grid;
  unsigned threads = 1;
  bool timing = false;
};

std::string default_out_dir() {
  const char* env = std::getenv("PEAKPRICE_OUT_DIR");
  return env && *env ? env : ".";
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << content;
}

void emit(const std::string& out, const std::string& fallback_name, const std::string& content) {
  if (!out.empty()) {
    write_file(out, content);
  } else if (std::getenv("PEAKPRICE_OUT_DIR")) {
    write_file(fs::path(default_out_dir()) / fallback_name, content);
  } else {
    std::cout << content;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ParseError(path + ": cannot open");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

RunOverrides overrides(const Common& c, const CLI::App& sub, Extrapolation extrapolation) {
  RunOverrides o;
  if (sub.count("--seed")) o.seed = c.seed;
  if (sub.count("--samples")) o.samples = c.samples;
  if (sub.count("--delta-grid")) o.delta_grid = parse_real_list(c.delta_grid);
  if (sub.count("--epsilon-schedule"))
    o.schedule = EpsilonSchedule(parse_real_list(c.epsilon_schedule), extrapolation);
  return o;
}

void add_run_flags(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Seed for every random stream");
  sub->add_option("--samples", c.samples, "Draws used to estimate peak probabilities");
  sub->add_option("--epsilon-schedule", c.epsilon_schedule,
                  "Comma-separated, strictly decreasing epsilons");
  sub->add_option("--delta-grid", c.delta_grid, "Comma-separated progressive exponents");
  sub->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--timing", c.timing, "Append a wall_time_s column");
}

int run(int argc, char** argv) {
  CLI::App app{"Peak-pricing equilibrium analysis"};
  app.require_subcommand(1);

  Common compare_args;
  auto* compare = app.add_subcommand("compare", "Equilibrium peak per mechanism and delta");
  compare->add_option("--scenario", compare_args.scenario, "Scenario file")->required();
  compare->add_option("--out", compare_args.out, "Output CSV (default: stdout or $PEAKPRICE_OUT_DIR)");
  add_run_flags(compare, compare_args);

  Common repro_args;
  std::string target;
  auto* repro = app.add_subcommand("reproduce", "Regenerate an example or figure dataset");
  repro->add_option("target", target, "example1 | example2 | figure2 | figure3")->required();
  repro->add_option("--out", repro_args.out, "Output directory (default: $PEAKPRICE_OUT_DIR or .)");
  add_run_flags(repro, repro_args);

  Common verify_args;
  std::string profile_path, mode = "exact", mechanism = "CP";
  double epsilon = 0.0;
  auto* verify = app.add_subcommand("verify", "Check a profile for the epsilon-Nash property");
  verify->add_option("--scenario", verify_args.scenario, "Scenario file")->required();
  verify->add_option("--profile", profile_path, "CSV, one row per player")->required();
  verify->add_option("--epsilon", epsilon, "Tolerance (default: final scheduled epsilon)");
  verify->add_option("--mode", mode, "exact | grid | monte-carlo");
  verify->add_option("--mechanism", mechanism, "AP | CP | PP");
  verify->add_option("--seed", verify_args.seed, "Seed for every random stream");
  verify->add_option("--samples", verify_args.samples, "Draws used to estimate peak probabilities");
  verify->add_option("--threads", verify_args.threads, "Worker threads")->check(CLI::PositiveNumber);

  Common sample_args;
  sample_args.samples = 10;
  auto* sample = app.add_subcommand("sample", "Dump baseline draws");
  sample->add_option("--scenario", sample_args.scenario, "Scenario file")->required();
  sample->add_option("--out", sample_args.out, "Output CSV");
  sample->add_option("--samples", sample_args.samples, "Number of draws");
  sample->add_option("--seed", sample_args.seed, "Seed");
  sample->add_option("--threads", sample_args.threads, "Worker threads")->check(CLI::PositiveNumber);

  Common pi_args;
  auto* pi = app.add_subcommand("pi", "Dump peak-period probabilities");
  pi->add_option("--scenario", pi_args.scenario, "Scenario file")->required();
  pi->add_option("--out", pi_args.out, "Output CSV");
  pi->add_option("--samples", pi_args.samples, "Monte Carlo draws");
  pi->add_option("--seed", pi_args.seed, "Seed");
  pi->add_option("--threads", pi_args.threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }

  try {
    if (*compare) {
      Scenario s = load_scenario(compare_args.scenario);
      s = apply_overrides(std::move(s), overrides(compare_args, *compare,
                                                  s.run.schedule.extrapolation()));
      const auto table = run_compare(s, compare_args.threads, compare_args.timing);
      emit(compare_args.out, s.name + ".csv", table.to_csv(compare_args.timing));
      return kOk;
    }
    if (*repro) {
      const auto result = reproduce(target, overrides(repro_args, *repro, Extrapolation::LastValue),
                                    repro_args.threads, repro_args.timing);
      const fs::path dir = repro_args.out.empty() ? fs::path(default_out_dir()) : fs::path(repro_args.out);
      for (const auto& file : result.files) write_file(dir / file.name, file.content);
      std::cout << result.table.to_csv(repro_args.timing);
      return kOk;
    }
    if (*verify) {
      Scenario s = load_scenario(verify_args.scenario);
      RunOverrides o;
      if (verify->count("--seed")) o.seed = verify_args.seed;
      if (verify->count("--samples")) o.samples = verify_args.samples;
      s = apply_overrides(std::move(s), o);
      const Mechanism m = parse_mechanism(mechanism);
      const VerifyMode vm = parse_verify_mode(mode);
      const double eps = verify->count("--epsilon") ? epsilon : s.run.schedule.final_value();
      const Matrix<double> consumption = parse_profile_csv(read_file(profile_path), profile_path);
      ActionProfile<double> profile = [&] {
        try {
          return ActionProfile<double>(consumption, s.market);
        } catch (const InvalidArgument& e) {
          throw Infeasible(profile_path + ": " + e.what());
        }
      }();
      const auto check = verify_epsilon_nash(profile, s.baseline, s.market, m, eps, vm,
                                             analysis_options(s.run, verify_args.threads));
      std::cout << "mechanism=" << to_string(m) << '\n'
                << "mode=" << to_string(vm) << '\n'
                << "epsilon=" << format_real(eps) << '\n'
                << "holds=" << (check.holds ? "true" : "false") << '\n'
                << "worst_gain=" << format_real(check.worst_gain) << '\n'
                << "deviating_player="
                << (check.deviating_player ? std::to_string(*check.deviating_player + 1) : "none")
                << '\n'
                << "certified=" << (check.certified ? "true" : "false") << '\n';
      return check.holds ? kOk : kDoesNotHold;
    }
    if (*sample) {
      const Scenario s = load_scenario(sample_args.scenario);
      const std::uint64_t seed = sample->count("--seed") ? sample_args.seed : s.run.seed;
      emit(sample_args.out, s.name + "_samples.csv",
           sample_csv(s.baseline, sample_args.samples, seed, sample_args.threads));
      return kOk;
    }
    if (*pi) {
      const Scenario s = load_scenario(pi_args.scenario);
      const std::uint64_t seed = pi->count("--seed") ? pi_args.seed : s.run.seed;
      const std::size_t n = pi->count("--samples") ? pi_args.samples : s.run.samples;
      emit(pi_args.out, s.name + "_pi.csv",
           peak_probabilities_csv(s.baseline, n, seed, pi_args.threads));
      return kOk;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kParse;
  } catch (const Infeasible& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kParse;
  } catch (const AssumptionViolated& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFlagged;
  } catch (const InfeasibleEpsilon& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInfeasibleEpsilon;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kParse;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
