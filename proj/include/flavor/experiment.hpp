#ifndef FLAVOR_EXPERIMENT_HPP
#define FLAVOR_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flavor/problems.hpp"

namespace flavor {

/// Batch-run request.  Optional fields fall back to the benchmark's
/// published defaults; `gamma` derives (tau, delta) by the rule of thumb and
/// loses to explicit tau/delta overrides.
struct ExperimentConfig {
  std::string benchmark;  // registry name, or "linear-stability-scan"
  std::string stepper;    // one of stepper_kinds(); empty = benchmark default
  std::optional<double> tau;
  std::optional<double> delta;
  std::optional<double> gamma;
  std::optional<double> horizon;
  std::optional<int> ensemble;
  std::uint64_t seed = 0;
  std::string out_dir;      // empty: $FLAVOR_OUT_DIR, else "."
  std::int64_t stride = 0;  // mesosteps per kept sample; 0 = automatic
  std::vector<std::string> diagnostics;  // empty = all applicable

  // linear-stability-scan only.
  std::string scan_kind = "nonintrusive";  // or "artificial"
  std::optional<double> omega;
};

/// What a run produced.  `files` lists every path written (manifest last);
/// `counters` sums work over the ensemble.  Validation and runtime problems
/// come back as exit_code != 0 with `error` set; a manifest recording the
/// failure is still written whenever the output directory is usable.
struct RunOutcome {
  int exit_code = 0;
  std::vector<std::string> files;
  std::string manifest_path;
  StepCounters counters;
  bool partial = false;  // some trajectory stopped on a non-finite state
  std::string error;
};

/// Stepper vocabulary accepted by ExperimentConfig::stepper:
///   fine, flavor, nonintrusive, reversible, artificial, artificial-exact,
///   impulse, sde, langevin, langevin-reversible, gla, nonautonomous, exact.
/// "fine" runs the benchmark's published reference scheme at reference_h
/// (or at --tau when given); "flavor" picks the flow-averaged composition
/// natural to the benchmark family; "exact" evaluates the benchmark's
/// closed-form flow on the mesostep grid (closed-form benchmarks only).
/// The rest name a composition explicitly and are rejected when the family
/// cannot support them.
std::vector<std::string> stepper_kinds();

/// Diagnostic vocabulary: trajectory, energy, spring-energy, moments.
/// An empty ExperimentConfig::diagnostics selects every diagnostic that
/// applies to the benchmark.
std::vector<std::string> diagnostic_names();

/// Validate, run, and write outputs (CSV tables plus a JSON manifest).
/// Output bytes depend only on (config, seed, library version); the manifest
/// additionally records wall time, which is exempt from that guarantee.
RunOutcome run_experiment(const ExperimentConfig& config);

/// Run both configs, then write one CSV comparing them: f_error over the
/// given window plus the sup slow error, per slow observable.  `observable`
/// selects one by name, or "" for all shared slow observables.
RunOutcome compare_experiments(const ExperimentConfig& a,
                               const ExperimentConfig& b,
                               const std::string& observable, double window,
                               const std::string& out_dir);

/// Registry listing, one benchmark per line with family and defaults.
std::string list_text();

/// Full parameter sheet for one benchmark; throws UnknownName (with a
/// nearest-name suggestion) for unknown names.
std::string describe_text(const std::string& benchmark);

}  // namespace flavor

#endif
