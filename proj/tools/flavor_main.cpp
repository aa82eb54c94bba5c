#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "flavor/experiment.hpp"
#include "flavor/version.hpp"

namespace {

using flavor::ExperimentConfig;
using flavor::RunOutcome;

/// Flat key-value config loader shared by `run --config` and the two sides
/// of `compare`: one `key = value` pair per line, '#' starts a comment,
/// blank lines ignored.  Keys mirror the long flag names of `run`.
void apply_config_pair(ExperimentConfig& cfg, const std::string& key,
                       const std::string& value, const std::string& where) {
  const auto bad_number = [&](const std::string& what) {
    return flavor::Error(where + ": key '" + key + "' needs " + what + ", got '" +
                         value + "'");
  };
  const auto as_double = [&]() {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw bad_number("a number");
    }
  };
  const auto as_int = [&]() {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw bad_number("an integer");
    }
  };
  if (key == "benchmark") {
    cfg.benchmark = value;
  } else if (key == "stepper") {
    cfg.stepper = value;
  } else if (key == "tau") {
    cfg.tau = as_double();
  } else if (key == "delta") {
    cfg.delta = as_double();
  } else if (key == "gamma") {
    cfg.gamma = as_double();
  } else if (key == "horizon") {
    cfg.horizon = as_double();
  } else if (key == "ensemble") {
    cfg.ensemble = static_cast<int>(as_int());
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(as_int());
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "stride") {
    cfg.stride = as_int();
  } else if (key == "diagnostics") {
    cfg.diagnostics.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto begin = item.find_first_not_of(" \t");
      const auto end = item.find_last_not_of(" \t");
      if (begin != std::string::npos) {
        cfg.diagnostics.push_back(item.substr(begin, end - begin + 1));
      }
    }
  } else if (key == "kind") {
    cfg.scan_kind = value;
  } else if (key == "omega") {
    cfg.omega = as_double();
  } else {
    const std::vector<std::string> known = {
        "benchmark", "stepper",  "tau",  "delta",  "gamma",       "horizon",
        "ensemble",  "seed",     "out",  "stride", "diagnostics", "kind",
        "omega"};
    std::string best = known.front();
    int best_d = flavor::detail::edit_distance(key, best);
    for (const auto& cand : known) {
      const int d = flavor::detail::edit_distance(key, cand);
      if (d < best_d) {
        best_d = d;
        best = cand;
      }
    }
    throw flavor::UnknownName(where + ": unknown config key '" + key +
                                  "'; closest match is '" + best + "'",
                              best);
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw flavor::Error("cannot open config file '" + path + "'");
  }
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
      continue;
    }
    const auto end = line.find_last_not_of(" \t\r");
    const std::string body = line.substr(begin, end - begin + 1);
    const auto eq = body.find('=');
    const std::string where = path + ":" + std::to_string(line_no);
    if (eq == std::string::npos) {
      throw flavor::Error(where + ": expected 'key = value', got '" + body + "'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) {
      throw flavor::Error(where + ": empty key");
    }
    apply_config_pair(cfg, key, value, where);
  }
  return cfg;
}

int report_outcome(const RunOutcome& outcome) {
  for (const auto& file : outcome.files) {
    std::cout << file << "\n";
  }
  if (outcome.partial) {
    std::cerr << "warning: some trajectory stopped early on a non-finite state "
                 "(see manifest)\n";
  }
  if (!outcome.error.empty()) {
    std::cerr << "error: " << outcome.error << "\n";
  }
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flow-averaged integrators for stiff ODEs, SDEs, and Hamiltonian systems"};
  app.set_version_flag("--version", flavor::kVersion);
  app.require_subcommand(1);

  // run ---------------------------------------------------------------------
  ExperimentConfig run_cfg;
  std::string run_config_file;
  std::string run_benchmark;
  std::optional<double> run_tau, run_delta, run_gamma, run_horizon, run_omega;
  std::optional<int> run_ensemble;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::int64_t> run_stride;
  std::string run_stepper, run_out, run_kind;
  std::vector<std::string> run_diagnostics;

  CLI::App* run = app.add_subcommand("run", "run one experiment and write its data files");
  run->add_option("benchmark", run_benchmark,
                  "benchmark name (see `list`), or linear-stability-scan");
  run->add_option("--config,-c", run_config_file,
                  "flat key-value config file; explicit flags win");
  run->add_option("--stepper,-s", run_stepper, "stepper kind (see --help-steppers)");
  run->add_option("--tau", run_tau, "microstep (fine/gla: the fine step)");
  run->add_option("--delta", run_delta, "mesostep");
  run->add_option("--gamma", run_gamma,
                  "derive tau and delta by the rule of thumb (loses to --tau/--delta)");
  run->add_option("--horizon,-T", run_horizon, "integration horizon");
  run->add_option("--ensemble,-N", run_ensemble, "number of sample paths");
  run->add_option("--seed", run_seed, "base seed (64-bit)");
  run->add_option("--out,-o", run_out, "output directory (default: $FLAVOR_OUT_DIR or .)");
  run->add_option("--stride", run_stride, "mesosteps per kept sample (0 = automatic)");
  run->add_option("--diagnostics,-d", run_diagnostics,
                  "comma-separated diagnostics (default: all applicable)")
      ->delimiter(',');
  run->add_option("--kind", run_kind,
                  "linear-stability-scan only: nonintrusive or artificial");
  run->add_option("--omega", run_omega, "linear-stability-scan only: stiffness frequency");

  // list / describe ---------------------------------------------------------
  CLI::App* list = app.add_subcommand("list", "list the bundled benchmarks");
  std::string describe_name;
  CLI::App* describe =
      app.add_subcommand("describe", "print one benchmark's parameter sheet");
  describe->add_option("benchmark", describe_name, "benchmark name")->required();

  // compare -----------------------------------------------------------------
  std::string cmp_a, cmp_b, cmp_observable, cmp_out;
  double cmp_window = 1.0;
  CLI::App* compare = app.add_subcommand(
      "compare", "run two configs and tabulate their slow-observable errors");
  compare->add_option("--a", cmp_a, "config file for the first run")->required();
  compare->add_option("--b", cmp_b, "config file for the second run (the reference)")
      ->required();
  compare->add_option("--observable", cmp_observable,
                      "slow observable name (default: all shared)");
  compare->add_option("--window", cmp_window, "averaging window for the error metric");
  compare->add_option("--out,-o", cmp_out,
                      "output directory (default: $FLAVOR_OUT_DIR or .)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run)) {
      if (!run_config_file.empty()) {
        run_cfg = load_config_file(run_config_file);
      }
      if (!run_benchmark.empty()) run_cfg.benchmark = run_benchmark;
      if (!run_stepper.empty()) run_cfg.stepper = run_stepper;
      if (run_tau) run_cfg.tau = run_tau;
      if (run_delta) run_cfg.delta = run_delta;
      if (run_gamma) run_cfg.gamma = run_gamma;
      if (run_horizon) run_cfg.horizon = run_horizon;
      if (run_ensemble) run_cfg.ensemble = run_ensemble;
      if (run_seed) run_cfg.seed = *run_seed;
      if (!run_out.empty()) run_cfg.out_dir = run_out;
      if (run_stride) run_cfg.stride = *run_stride;
      if (!run_diagnostics.empty()) run_cfg.diagnostics = run_diagnostics;
      if (!run_kind.empty()) run_cfg.scan_kind = run_kind;
      if (run_omega) run_cfg.omega = run_omega;
      if (run_cfg.benchmark.empty()) {
        std::cerr << "error: no benchmark given (positional argument or config key)\n";
        return 1;
      }
      return report_outcome(flavor::run_experiment(run_cfg));
    }
    if (app.got_subcommand(list)) {
      std::cout << flavor::list_text();
      return 0;
    }
    if (app.got_subcommand(describe)) {
      std::cout << flavor::describe_text(describe_name);
      return 0;
    }
    if (app.got_subcommand(compare)) {
      const ExperimentConfig a = load_config_file(cmp_a);
      const ExperimentConfig b = load_config_file(cmp_b);
      return report_outcome(
          flavor::compare_experiments(a, b, cmp_observable, cmp_window, cmp_out));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
