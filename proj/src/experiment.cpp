#include "flavor/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "flavor/analysis.hpp"
#include "flavor/legacy.hpp"
#include "flavor/version.hpp"
#include "json.hpp"

namespace flavor {

namespace {

using ordered_json = nlohmann::ordered_json;

/// Shortest-round-trip decimal form: parses back to the identical double.
std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// Compact form for human-facing listings only; never used in data files.
std::string fmt_short(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

/// RFC 4180 quoting: fields containing a comma, quote, or newline are wrapped
/// in double quotes with embedded quotes doubled.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out += c;
    }
  }
  out += "\"";
  return out;
}

std::string sanitize_token(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_';
    out += ok ? c : '_';
  }
  return out.empty() ? std::string("run") : out;
}

std::string family_name(Family f) {
  switch (f) {
    case Family::Hamiltonian: return "hamiltonian";
    case Family::Ode: return "ode";
    case Family::Sde: return "sde";
    case Family::Langevin: return "langevin";
    case Family::Forced: return "forced";
  }
  return "unknown";
}

std::string resolve_out_dir(const std::string& configured) {
  if (!configured.empty()) {
    return configured;
  }
  if (const char* env = std::getenv("FLAVOR_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return ".";
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

std::string closest_name(const std::string& name, const std::vector<std::string>& pool) {
  std::string best;
  int best_d = std::numeric_limits<int>::max();
  for (const auto& cand : pool) {
    const int d = detail::edit_distance(name, cand);
    if (d < best_d) {
      best_d = d;
      best = cand;
    }
  }
  return best;
}

template <class T>
std::shared_ptr<Stepper> wrap(T stepper) {
  return std::make_shared<T>(std::move(stepper));
}

/// Total energy callback when the benchmark carries a Hamiltonian, empty
/// otherwise (pure ODE / SDE benchmarks have no conserved energy to report).
std::function<double(const Vec&)> energy_of(const Benchmark& b) {
  if (b.ham) {
    const SeparatedHamiltonian ham = *b.ham;
    return [ham](const Vec& u) { return ham.energy(u); };
  }
  if (b.langevin) {
    const SeparatedHamiltonian ham = b.langevin->ham;
    return [ham](const Vec& u) { return ham.energy(u); };
  }
  if (b.forced) {
    const SeparatedHamiltonian ham = b.forced->ham;
    return [ham](const Vec& u) { return ham.energy(u); };
  }
  return {};
}

double stiffness_exponent(Family f) {
  switch (f) {
    case Family::Hamiltonian:
    case Family::Langevin:
    case Family::Forced:
      return 0.5;
    case Family::Ode:
    case Family::Sde:
      return 1.0;
  }
  return 1.0;
}

StepSchedule resolve_schedule(const Benchmark& b, const ExperimentConfig& c) {
  if (c.tau || c.delta) {
    return StepSchedule(c.tau.value_or(b.default_schedule.tau()),
                        c.delta.value_or(b.default_schedule.delta()));
  }
  if (c.gamma) {
    return make_schedule_rule_of_thumb(b.epsilon(), *c.gamma,
                                       stiffness_exponent(b.family));
  }
  return b.default_schedule;
}

struct BuiltStepper {
  std::shared_ptr<Stepper> stepper;
  double tau = 0.0;
  double delta = 0.0;
};

const SeparatedHamiltonian& require_ham(const Benchmark& b, const std::string& kind) {
  if (!b.ham) {
    throw Error("stepper '" + kind + "' needs a separated Hamiltonian but benchmark '" +
                b.name + "' has family '" + family_name(b.family) + "'");
  }
  return *b.ham;
}

const ParametricSystem& require_ode(const Benchmark& b, const std::string& kind) {
  if (!b.ode) {
    throw Error("stepper '" + kind + "' needs a parametric vector field but benchmark '" +
                b.name + "' has family '" + family_name(b.family) + "'");
  }
  return *b.ode;
}

const LangevinSystem& require_langevin(const Benchmark& b, const std::string& kind) {
  if (!b.langevin) {
    throw Error("stepper '" + kind + "' needs a Langevin system but benchmark '" +
                b.name + "' has family '" + family_name(b.family) + "'");
  }
  return *b.langevin;
}

const ForcedHamiltonian& require_forced(const Benchmark& b, const std::string& kind) {
  if (!b.forced) {
    throw Error("stepper '" + kind + "' needs a forced Hamiltonian but benchmark '" +
                b.name + "' has family '" + family_name(b.family) + "'");
  }
  return *b.forced;
}

BuiltStepper build_fine(const Benchmark& b, const ExperimentConfig& c) {
  const double h = c.tau.value_or(b.reference_h);
  if (!(h > 0.0)) {
    throw Error("fine step must be positive, got " + fmt_short(h));
  }
  const std::string& scheme = b.reference_scheme;
  BuiltStepper out;
  out.tau = h;
  out.delta = h;
  if (scheme == "symplectic-euler") {
    const auto& ham = require_ham(b, "fine");
    out.stepper = wrap(FineStepper(symplectic_euler(ham), h, ham.alpha_full()));
  } else if (scheme == "velocity-verlet") {
    const auto& ham = require_ham(b, "fine");
    out.stepper = wrap(FineStepper(velocity_verlet(ham), h, ham.alpha_full()));
  } else if (scheme == "forward-euler") {
    const auto& ode = require_ode(b, "fine");
    out.stepper = wrap(FineStepper(forward_euler(ode), h, 1.0 / ode.epsilon));
  } else if (scheme == "euler-maruyama") {
    const auto& ode = require_ode(b, "fine");
    out.stepper = wrap(FineStepper(euler_maruyama(ode), h, 1.0 / ode.epsilon));
  } else if (scheme == "gla") {
    const auto& lang = require_langevin(b, "fine");
    out.stepper = wrap(FineStepper(gla_step(lang), h, lang.ham.alpha_full()));
  } else if (scheme == "forced") {
    const auto& forced = require_forced(b, "fine");
    out.stepper = wrap(FineStepper(forced_euler(forced), h, 1.0));
  } else {
    throw Error("benchmark '" + b.name + "' names unknown reference scheme '" + scheme + "'");
  }
  return out;
}

BuiltStepper build_stepper(const Benchmark& b, const ExperimentConfig& c) {
  const std::string& kind = c.stepper;
  if (kind == "fine") {
    return build_fine(b, c);
  }

  const StepSchedule sched = resolve_schedule(b, c);
  BuiltStepper out;
  out.tau = sched.tau();
  out.delta = sched.delta();

  if (kind == "flavor") {
    switch (b.family) {
      case Family::Hamiltonian:
        out.stepper = wrap(flavor_step(symplectic_euler(*b.ham), sched, b.ham->epsilon));
        return out;
      case Family::Ode:
        out.stepper = wrap(flavor_step(forward_euler(*b.ode), sched, b.ode->epsilon));
        return out;
      case Family::Sde:
        out.stepper = wrap(flavor_sde_step(euler_maruyama(*b.ode), sched, b.ode->epsilon));
        return out;
      case Family::Langevin:
        out.stepper = wrap(flavor_langevin_step(*b.langevin, sched));
        return out;
      case Family::Forced:
        out.stepper = wrap(flavor_nonautonomous_step(*b.forced, sched));
        return out;
    }
    throw Error("benchmark '" + b.name + "' has an unknown family");
  }
  if (kind == "nonintrusive") {
    if (b.ham) {
      out.stepper = wrap(flavor_step(symplectic_euler(*b.ham), sched, b.ham->epsilon));
    } else if (b.ode && b.family == Family::Ode) {
      out.stepper = wrap(flavor_step(forward_euler(*b.ode), sched, b.ode->epsilon));
    } else {
      throw Error("stepper 'nonintrusive' supports Hamiltonian and deterministic ODE "
                  "benchmarks; '" + b.name + "' has family '" + family_name(b.family) + "'");
    }
    return out;
  }
  if (kind == "reversible") {
    const auto& ham = require_ham(b, kind);
    out.stepper = wrap(flavor_reversible_step(symplectic_euler(ham), sched, ham.epsilon));
    return out;
  }
  if (kind == "artificial" || kind == "artificial-exact") {
    const auto& ham = require_ham(b, kind);
    if (!b.constraint) {
      throw Error("benchmark '" + b.name + "' declares no fast-variable constraint, "
                  "which the artificial composition requires");
    }
    const FastSubstep fast = (kind == "artificial-exact") ? FastSubstep::Exact
                                                          : FastSubstep::DriftKick;
    out.stepper = wrap(artificial_flavor_step(ham, sched, *b.constraint, fast));
    return out;
  }
  if (kind == "impulse") {
    const auto& ham = require_ham(b, kind);
    const FastFlowKind solve = ham.stiff_flow ? FastFlowKind::Exact : FastFlowKind::Numeric;
    const double h = sched.delta();
    out.stepper = wrap(FineStepper(impulse_method(ham, solve), h, ham.alpha_full()));
    out.tau = h;
    out.delta = h;
    return out;
  }
  if (kind == "sde") {
    if (b.family != Family::Sde || !b.ode) {
      throw Error("stepper 'sde' needs an SDE benchmark; '" + b.name + "' has family '" +
                  family_name(b.family) + "'");
    }
    out.stepper = wrap(flavor_sde_step(euler_maruyama(*b.ode), sched, b.ode->epsilon));
    return out;
  }
  if (kind == "langevin") {
    const auto& lang = require_langevin(b, kind);
    out.stepper = wrap(flavor_langevin_step(lang, sched));
    return out;
  }
  if (kind == "langevin-reversible") {
    const auto& lang = require_langevin(b, kind);
    out.stepper = wrap(flavor_langevin_reversible_step(lang, sched));
    return out;
  }
  if (kind == "gla") {
    const auto& lang = require_langevin(b, kind);
    const double h = c.tau.value_or(b.reference_h);
    if (!(h > 0.0)) {
      throw Error("gla step must be positive, got " + fmt_short(h));
    }
    out.stepper = wrap(FineStepper(gla_step(lang), h, lang.ham.alpha_full()));
    out.tau = h;
    out.delta = h;
    return out;
  }
  if (kind == "nonautonomous") {
    const auto& forced = require_forced(b, kind);
    out.stepper = wrap(flavor_nonautonomous_step(forced, sched));
    return out;
  }
  const auto kinds = stepper_kinds();
  throw UnknownName("unknown stepper '" + kind + "'; closest match is '" +
                        closest_name(kind, kinds) + "'",
                    closest_name(kind, kinds));
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::vector<std::string> resolve_diagnostics(const ExperimentConfig& c, const Benchmark& b,
                                             int ensemble, bool has_energy) {
  const bool is_fpu = b.name.rfind("fpu", 0) == 0;
  const auto applicable = [&](const std::string& d) {
    if (d == "trajectory") return ensemble == 1;
    if (d == "energy") return ensemble == 1 && has_energy;
    if (d == "spring-energy") return ensemble == 1 && is_fpu;
    if (d == "moments") return ensemble > 1;
    return false;
  };
  std::vector<std::string> out;
  if (c.diagnostics.empty()) {
    for (const auto& d : diagnostic_names()) {
      if (applicable(d)) {
        out.push_back(d);
      }
    }
    return out;
  }
  const auto known = diagnostic_names();
  for (const auto& d : c.diagnostics) {
    if (!contains(known, d)) {
      const std::string best = closest_name(d, known);
      throw UnknownName("unknown diagnostic '" + d + "'; closest match is '" + best + "'",
                        best);
    }
    // An explicit trajectory request is honoured for any ensemble size (one
    // file per trajectory); the other diagnostics are rejected when the run
    // shape cannot produce them rather than silently dropped.
    if (d != "trajectory" && !applicable(d)) {
      std::string why;
      if (d == "energy") {
        why = has_energy ? "it needs a single-trajectory run"
                         : "the benchmark has no energy function";
      } else if (d == "spring-energy") {
        why = is_fpu ? "it needs a single-trajectory run"
                     : "it is defined only for the fpu benchmarks";
      } else {
        why = "it needs an ensemble of at least two trajectories";
      }
      throw Error("diagnostic '" + d + "' does not apply here: " + why);
    }
    if (!contains(out, d)) {
      out.push_back(d);
    }
  }
  return out;
}

/// Everything needed to run one configured experiment and interpret its
/// output.  compare_experiments reuses it to run both sides in memory.
struct Execution {
  Benchmark bench;
  std::string stepper_kind;
  double tau = 0.0;
  double delta = 0.0;
  double dt = 0.0;
  double horizon = 0.0;
  std::int64_t n_steps = 0;
  std::int64_t stride = 1;
  int ensemble = 1;
  bool stochastic = false;
  std::vector<std::string> diagnostics;
  std::function<double(const Vec&)> energy;
  std::vector<Trajectory> trajectories;
  bool partial = false;
  StepCounters counters;
};

/// Samples the closed-form flow on the mesostep grid, mimicking the sampling
/// policy of a real integration (initial state, every stride-th step, final).
Trajectory sample_exact_flow(const Benchmark& b, double dt, std::int64_t n_steps,
                             std::int64_t stride,
                             const std::function<double(const Vec&)>& energy) {
  Trajectory traj;
  traj.step = dt;
  const auto record = [&](std::int64_t k) {
    const double t = static_cast<double>(k) * dt;
    traj.times.push_back(t);
    traj.states.push_back(b.exact_flow(b.u0, t));
    traj.fast_clock.push_back(t);
    if (energy) {
      traj.energies.push_back(energy(traj.states.back()));
    }
  };
  record(0);
  for (std::int64_t k = 1; k <= n_steps; ++k) {
    if (k % stride == 0 || k == n_steps) {
      record(k);
    }
  }
  return traj;
}

Execution execute_config(const ExperimentConfig& c) {
  Execution ex;
  ex.bench = make_benchmark(c.benchmark);
  ex.stepper_kind = c.stepper;

  const bool exact = (c.stepper == "exact");
  std::shared_ptr<Stepper> stepper;
  if (exact) {
    if (!ex.bench.exact_flow) {
      throw Error("benchmark '" + ex.bench.name + "' has no closed-form flow; "
                  "'exact' applies only to closed-form benchmarks");
    }
    const StepSchedule sched = resolve_schedule(ex.bench, c);
    ex.tau = sched.tau();
    ex.delta = sched.delta();
    ex.dt = sched.delta();
    ex.stochastic = false;
  } else {
    BuiltStepper built = build_stepper(ex.bench, c);
    stepper = built.stepper;
    ex.tau = built.tau;
    ex.delta = built.delta;
    ex.dt = stepper->dt();
    ex.stochastic = stepper->stochastic();
  }

  const int ensemble = c.ensemble.value_or(ex.stochastic ? ex.bench.default_ensemble : 1);
  if (ensemble < 1) {
    throw Error("ensemble size must be at least 1, got " + std::to_string(ensemble));
  }
  if (!ex.stochastic && ensemble > 1) {
    throw Error("stepper '" + c.stepper + "' is deterministic on '" + ex.bench.name +
                "'; an ensemble of " + std::to_string(ensemble) +
                " identical trajectories is almost certainly a mistake");
  }
  ex.ensemble = ensemble;

  const double horizon = c.horizon.value_or(ex.bench.default_horizon);
  if (!(horizon > 0.0)) {
    throw Error("horizon must be positive, got " + fmt_short(horizon));
  }
  ex.horizon = horizon;
  ex.n_steps = static_cast<std::int64_t>(std::floor(horizon / ex.dt + 1e-9));
  if (ex.n_steps < 1) {
    throw Error("horizon " + fmt_short(horizon) + " is shorter than one step " +
                fmt_short(ex.dt));
  }

  if (c.stride < 0) {
    throw Error("stride must be nonnegative, got " + std::to_string(c.stride));
  }
  ex.stride =
      c.stride > 0 ? c.stride : std::max<std::int64_t>(1, (ex.n_steps + 99999) / 100000);

  ex.energy = energy_of(ex.bench);
  ex.diagnostics = resolve_diagnostics(c, ex.bench, ex.ensemble, bool(ex.energy));
  const bool want_energy = contains(ex.diagnostics, "energy");

  if (exact) {
    const auto energy_cb = want_energy ? ex.energy : std::function<double(const Vec&)>{};
    ex.trajectories.push_back(
        sample_exact_flow(ex.bench, ex.dt, ex.n_steps, ex.stride, energy_cb));
    return ex;
  }

  SamplerPolicy sampler;
  sampler.stride = ex.stride;
  if (want_energy) {
    sampler.energy = ex.energy;
  }
  ex.trajectories =
      run_ensemble(*stepper, ex.bench.u0, horizon, sampler, c.seed, ex.ensemble, 0);
  for (const auto& traj : ex.trajectories) {
    ex.counters.add(traj.counters);
    if (!traj.ok()) {
      ex.partial = true;
    }
  }
  return ex;
}

/// Column labels for one observable; vector-valued observables expand to
/// name[0], name[1], ...
std::vector<std::string> observable_columns(const SlowObservable& obs, const Vec& probe) {
  const Eigen::Index d = obs.map(probe).size();
  if (d == 1) {
    return {obs.name};
  }
  std::vector<std::string> cols;
  cols.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    cols.push_back(obs.name + "[" + std::to_string(i) + "]");
  }
  return cols;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw Error("cannot open '" + path + "' for writing");
  }
  return f;
}

void finish_csv(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) {
    throw Error("write to '" + path + "' failed");
  }
}

void write_trajectory_csv(const std::string& path, const Benchmark& b,
                          const Trajectory& traj) {
  auto f = open_csv(path);
  std::vector<const SlowObservable*> observables;
  for (const auto& obs : b.slow_observables) observables.push_back(&obs);
  for (const auto& obs : b.fast_observables) observables.push_back(&obs);

  f << "t,fast_t";
  for (Eigen::Index j = 0; j < b.u0.size(); ++j) {
    f << ",u" << j;
  }
  for (const auto* obs : observables) {
    for (const auto& col : observable_columns(*obs, b.u0)) {
      f << "," << csv_field(col);
    }
  }
  f << "\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    f << fmt(traj.times[i]) << "," << fmt(traj.fast_clock[i]);
    const Vec& u = traj.states[i];
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      f << "," << fmt(u[j]);
    }
    for (const auto* obs : observables) {
      const Vec value = obs->map(u);
      for (Eigen::Index j = 0; j < value.size(); ++j) {
        f << "," << fmt(value[j]);
      }
    }
    f << "\n";
  }
  finish_csv(f, path);
}

/// Returns the fitted linear drift slope of the energy series.
double write_energy_csv(const std::string& path, const Trajectory& traj,
                        const std::function<double(const Vec&)>& energy) {
  const EnergySeries series = energy_series(traj, energy);
  auto f = open_csv(path);
  f << "t,energy\n";
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    f << fmt(series.times[i]) << "," << fmt(series.values[i]) << "\n";
  }
  finish_csv(f, path);
  return series.drift_slope;
}

void write_springs_csv(const std::string& path, const Benchmark& b,
                       const Trajectory& traj) {
  const Mat energies = stiff_spring_energies(traj, b.omega);
  auto f = open_csv(path);
  f << "t";
  for (Eigen::Index j = 0; j + 1 < energies.cols(); ++j) {
    f << ",I" << j;
  }
  f << ",total\n";
  for (Eigen::Index i = 0; i < energies.rows(); ++i) {
    f << fmt(traj.times[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < energies.cols(); ++j) {
      f << "," << fmt(energies(i, j));
    }
    f << "\n";
  }
  finish_csv(f, path);
}

void write_moments_csv(const std::string& path, const Benchmark& b,
                       const std::vector<Trajectory>& ensemble) {
  std::vector<const SlowObservable*> observables;
  for (const auto& obs : b.slow_observables) observables.push_back(&obs);
  for (const auto& obs : b.fast_observables) observables.push_back(&obs);

  std::vector<EnsembleStats> stats;
  std::vector<std::vector<std::string>> columns;
  for (const auto* obs : observables) {
    stats.push_back(ensemble_stats(ensemble, *obs));
    columns.push_back(observable_columns(*obs, b.u0));
  }
  auto f = open_csv(path);
  f << "t";
  for (const auto& cols : columns) {
    for (const auto& name : cols) {
      for (const char* suffix : {"_mean", "_var", "_se", "_ac", "_ac_se"}) {
        f << "," << csv_field(name + suffix);
      }
    }
  }
  f << "\n";
  const auto& times = stats.front().times;
  for (std::size_t i = 0; i < times.size(); ++i) {
    f << fmt(times[i]);
    for (std::size_t s = 0; s < stats.size(); ++s) {
      const auto& st = stats[s];
      const Eigen::Index width = st.mean.cols();
      for (Eigen::Index j = 0; j < width; ++j) {
        const auto row = static_cast<Eigen::Index>(i);
        f << "," << fmt(st.mean(row, j)) << "," << fmt(st.var(row, j)) << ","
          << fmt(st.se(row, j)) << "," << fmt(st.autocorr(row, j)) << ","
          << fmt(st.autocorr_se(row, j));
      }
    }
    f << "\n";
  }
  finish_csv(f, path);
}

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json config_json(const ExperimentConfig& c) {
  ordered_json j;
  j["benchmark"] = c.benchmark;
  j["stepper"] = c.stepper;
  j["tau"] = optional_json(c.tau);
  j["delta"] = optional_json(c.delta);
  j["gamma"] = optional_json(c.gamma);
  j["horizon"] = optional_json(c.horizon);
  j["ensemble"] = c.ensemble ? ordered_json(*c.ensemble) : ordered_json(nullptr);
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["stride"] = c.stride;
  j["diagnostics"] = c.diagnostics;
  if (c.benchmark == "linear-stability-scan") {
    j["scan_kind"] = c.scan_kind;
    j["omega"] = optional_json(c.omega);
  }
  return j;
}

ordered_json counters_json(const StepCounters& counters) {
  ordered_json j;
  j["stiff_applies"] = counters.stiff_applies;
  j["soft_applies"] = counters.soft_applies;
  j["ou_applies"] = counters.ou_applies;
  j["gaussians"] = counters.gaussians;
  return j;
}

ordered_json resolved_json(const Execution& ex, std::uint64_t seed) {
  ordered_json j;
  j["benchmark"] = ex.bench.name;
  j["stepper"] = ex.stepper_kind;
  j["family"] = family_name(ex.bench.family);
  j["tau"] = ex.tau;
  j["delta"] = ex.delta;
  j["dt"] = ex.dt;
  j["horizon"] = ex.horizon;
  j["n_steps"] = ex.n_steps;
  j["ensemble"] = ex.ensemble;
  j["stride"] = ex.stride;
  j["seed"] = seed;
  j["stochastic"] = ex.stochastic;
  j["diagnostics"] = ex.diagnostics;
  return j;
}

ordered_json failures_json(const Execution& ex) {
  ordered_json arr = ordered_json::array();
  for (const auto& traj : ex.trajectories) {
    if (traj.ok()) {
      continue;
    }
    ordered_json f;
    f["trajectory"] = traj.traj_index;
    f["mesostep"] = traj.failure->mesostep;
    f["message"] = traj.failure->message;
    arr.push_back(f);
  }
  return arr;
}

/// Writes the manifest (always the last file of a run) and records it in the
/// outcome.  Failures to write the manifest itself downgrade to an error
/// message in the outcome since there is nowhere else to report them.
void write_manifest(const std::string& dir, const std::string& prefix, ordered_json& manifest,
                    RunOutcome& out, double wall_seconds) {
  manifest["counters"] = counters_json(out.counters);
  manifest["partial"] = out.partial;
  manifest["error"] = out.error.empty() ? ordered_json(nullptr) : ordered_json(out.error);
  const std::string path = join_path(dir, prefix + "-manifest.json");
  std::vector<std::string> files = out.files;
  files.push_back(path);
  manifest["files"] = files;
  manifest["wall_time_seconds"] = wall_seconds;
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    if (out.error.empty()) {
      out.error = "cannot write manifest '" + path + "'";
      out.exit_code = 1;
    }
    return;
  }
  f << manifest.dump(2) << "\n";
  f.flush();
  if (!f && out.error.empty()) {
    out.error = "write to manifest '" + path + "' failed";
    out.exit_code = 1;
    return;
  }
  out.files.push_back(path);
  out.manifest_path = path;
}

void run_scan(const ExperimentConfig& c, const std::string& dir, ordered_json& manifest,
              RunOutcome& out, std::string& prefix) {
  ScanKind kind;
  if (c.scan_kind == "nonintrusive") {
    kind = ScanKind::Nonintrusive;
  } else if (c.scan_kind == "artificial") {
    kind = ScanKind::Artificial;
  } else {
    const std::vector<std::string> kinds = {"nonintrusive", "artificial"};
    const std::string best = closest_name(c.scan_kind, kinds);
    throw UnknownName("unknown scan kind '" + c.scan_kind + "'; closest match is '" +
                          best + "'",
                      best);
  }
  const double omega = c.omega.value_or(1000.0);
  prefix = "linear-stability-scan-" + c.scan_kind;

  std::vector<double> deltas;
  for (int i = 1; i <= 30; ++i) {
    deltas.push_back(0.1 * i);
  }
  // The two compositions live in different microstep regimes: the
  // nonintrusive one needs tau well below eps (its boundary is the
  // hyperbola delta * tau/eps ~ 2 capped by delta < 2), while the
  // artificial one is limited only by the stiff substep, tau/eps up to
  // sqrt(2) * omega, with the delta cap at 2 sqrt(2).
  std::vector<double> ratios;
  if (kind == ScanKind::Nonintrusive) {
    ratios = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1,
              0.2,   0.5,   1.0,   2.0,  5.0,  10.0, 20.0};
  } else {
    for (int i = 1; i <= 15; ++i) {
      ratios.push_back(100.0 * i);
    }
  }
  const ScanGrid grid = stability_domain_scan(kind, omega, deltas, ratios);

  const double eps = 1.0 / (omega * omega);
  const std::string path = join_path(dir, prefix + "-grid.csv");
  auto f = open_csv(path);
  f << "delta,tau,ratio,verdict,radius\n";
  for (std::size_t i = 0; i < grid.deltas.size(); ++i) {
    for (std::size_t j = 0; j < grid.ratios.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto col = static_cast<Eigen::Index>(j);
      f << fmt(grid.deltas[i]) << "," << fmt(grid.ratios[j] * eps) << ","
        << fmt(grid.ratios[j]) << "," << grid.verdict(r, col) << ","
        << fmt(grid.radius(r, col)) << "\n";
    }
  }
  finish_csv(f, path);
  out.files.push_back(path);

  ordered_json resolved;
  resolved["scan_kind"] = c.scan_kind;
  resolved["omega"] = omega;
  resolved["epsilon"] = eps;
  resolved["deltas"] = grid.deltas;
  resolved["ratios"] = grid.ratios;
  manifest["resolved"] = resolved;
}

void run_one(const ExperimentConfig& c, const std::string& dir, ordered_json& manifest,
             RunOutcome& out, std::string& prefix) {
  Execution ex = execute_config(c);
  prefix = ex.bench.name + "-" + sanitize_token(ex.stepper_kind);
  out.counters = ex.counters;
  out.partial = ex.partial;
  manifest["resolved"] = resolved_json(ex, c.seed);
  manifest["failures"] = failures_json(ex);

  std::vector<std::string> skipped;
  for (const auto& diag : ex.diagnostics) {
    if (diag == "trajectory") {
      for (std::size_t i = 0; i < ex.trajectories.size(); ++i) {
        const std::string path =
            join_path(dir, prefix + "-traj-" + std::to_string(i) + ".csv");
        write_trajectory_csv(path, ex.bench, ex.trajectories[i]);
        out.files.push_back(path);
      }
    } else if (diag == "energy") {
      const std::string path = join_path(dir, prefix + "-energy.csv");
      const double slope = write_energy_csv(path, ex.trajectories.front(), ex.energy);
      manifest["energy_drift_slope"] = slope;
      out.files.push_back(path);
    } else if (diag == "spring-energy") {
      const std::string path = join_path(dir, prefix + "-springs.csv");
      write_springs_csv(path, ex.bench, ex.trajectories.front());
      out.files.push_back(path);
    } else if (diag == "moments") {
      if (ex.partial) {
        // Trajectories of unequal length cannot share a moment grid.
        skipped.push_back(diag);
        continue;
      }
      const std::string path = join_path(dir, prefix + "-moments.csv");
      write_moments_csv(path, ex.bench, ex.trajectories);
      out.files.push_back(path);
    }
  }
  if (!skipped.empty()) {
    manifest["skipped_diagnostics"] = skipped;
  }
}

}  // namespace

std::vector<std::string> stepper_kinds() {
  return {"fine",          "flavor",     "nonintrusive",
          "reversible",    "artificial", "artificial-exact",
          "impulse",       "sde",        "langevin",
          "langevin-reversible", "gla",  "nonautonomous",
          "exact"};
}

std::vector<std::string> diagnostic_names() {
  return {"trajectory", "energy", "spring-energy", "moments"};
}

RunOutcome run_experiment(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome out;
  const std::string dir = resolve_out_dir(config.out_dir);

  ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = "run";
  manifest["config"] = config_json(config);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    out.exit_code = 1;
    out.error = "cannot create output directory '" + dir + "': " + ec.message();
    return out;
  }

  std::string prefix;
  try {
    if (config.benchmark == "linear-stability-scan") {
      run_scan(config, dir, manifest, out, prefix);
    } else {
      run_one(config, dir, manifest, out, prefix);
    }
  } catch (const std::exception& e) {
    out.exit_code = 1;
    out.error = e.what();
  }
  if (prefix.empty()) {
    prefix = sanitize_token(config.benchmark) + "-" + sanitize_token(config.stepper);
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, prefix, manifest, out, wall);
  return out;
}

RunOutcome compare_experiments(const ExperimentConfig& config_a,
                               const ExperimentConfig& config_b,
                               const std::string& observable, double window,
                               const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome out;
  const std::string dir = resolve_out_dir(out_dir);

  ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = "compare";
  manifest["config_a"] = config_json(config_a);
  manifest["config_b"] = config_json(config_b);
  manifest["observable"] = observable.empty() ? ordered_json(nullptr)
                                              : ordered_json(observable);
  manifest["window"] = window;

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    out.exit_code = 1;
    out.error = "cannot create output directory '" + dir + "': " + ec.message();
    return out;
  }

  std::string prefix = "compare-" + sanitize_token(config_a.benchmark) + "-" +
                       sanitize_token(config_a.stepper) + "-vs-" +
                       sanitize_token(config_b.stepper);
  try {
    if (config_a.benchmark != config_b.benchmark) {
      throw Error("compare needs both runs on the same benchmark, got '" +
                  config_a.benchmark + "' and '" + config_b.benchmark + "'");
    }
    if (config_a.benchmark == "linear-stability-scan") {
      throw Error("compare does not apply to the stability scan");
    }
    Execution ea = execute_config(config_a);
    Execution eb = execute_config(config_b);
    out.counters = ea.counters;
    out.counters.add(eb.counters);
    out.partial = ea.partial || eb.partial;
    manifest["resolved_a"] = resolved_json(ea, config_a.seed);
    manifest["resolved_b"] = resolved_json(eb, config_b.seed);
    manifest["failures_a"] = failures_json(ea);
    manifest["failures_b"] = failures_json(eb);
    if (out.partial) {
      throw Error("comparison aborted: at least one run stopped early on a "
                  "non-finite state");
    }

    std::vector<const SlowObservable*> selected;
    const auto find_in = [](const std::vector<SlowObservable>& pool,
                            const std::string& name) -> const SlowObservable* {
      for (const auto& obs : pool) {
        if (obs.name == name) {
          return &obs;
        }
      }
      return nullptr;
    };
    if (!observable.empty()) {
      const SlowObservable* a = find_in(ea.bench.slow_observables, observable);
      const SlowObservable* b = find_in(eb.bench.slow_observables, observable);
      if (a == nullptr || b == nullptr) {
        std::vector<std::string> names;
        for (const auto& obs : ea.bench.slow_observables) names.push_back(obs.name);
        const std::string best = names.empty() ? "" : closest_name(observable, names);
        throw UnknownName("observable '" + observable + "' is not a slow observable of '" +
                              ea.bench.name + "'; closest match is '" + best + "'",
                          best);
      }
      selected.push_back(a);
    } else {
      for (const auto& obs : ea.bench.slow_observables) {
        if (find_in(eb.bench.slow_observables, obs.name) != nullptr) {
          selected.push_back(&obs);
        }
      }
      if (selected.empty()) {
        throw Error("the two runs share no slow observable to compare");
      }
    }

    const Trajectory& ta = ea.trajectories.front();
    const Trajectory& tb = eb.trajectories.front();
    const std::string path = join_path(dir, prefix + ".csv");
    auto f = open_csv(path);
    f << "observable,f_error,slow_error,window\n";
    ordered_json results = ordered_json::array();
    for (const auto* obs : selected) {
      const double fe = f_error(ta, tb, *obs, window);
      const double se = slow_error(ta, tb, *obs);
      f << csv_field(obs->name) << "," << fmt(fe) << "," << fmt(se) << ","
        << fmt(window) << "\n";
      ordered_json row;
      row["observable"] = obs->name;
      row["f_error"] = fe;
      row["slow_error"] = se;
      results.push_back(row);
    }
    finish_csv(f, path);
    out.files.push_back(path);
    manifest["results"] = results;
  } catch (const std::exception& e) {
    out.exit_code = 1;
    out.error = e.what();
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, prefix, manifest, out, wall);
  return out;
}

std::string list_text() {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-18s %-12s %-10s %-10s %-10s %-10s %s\n", "name",
                "family", "epsilon", "tau", "delta", "horizon", "ensemble");
  os << line;
  for (const auto& name : benchmark_names()) {
    const Benchmark b = make_benchmark(name);
    std::snprintf(line, sizeof(line), "%-18s %-12s %-10.3g %-10.3g %-10.3g %-10.3g %d\n",
                  b.name.c_str(), family_name(b.family).c_str(), b.epsilon(),
                  b.default_schedule.tau(), b.default_schedule.delta(), b.default_horizon,
                  b.default_ensemble);
    os << line;
  }
  return os.str();
}

std::string describe_text(const std::string& benchmark) {
  const Benchmark b = make_benchmark(benchmark);
  std::ostringstream os;
  os << b.name << "\n  " << b.description << "\n\n";
  const auto field = [&os](const std::string& key, const std::string& value) {
    os << "  " << key;
    for (std::size_t i = key.size(); i < 20; ++i) {
      os << ' ';
    }
    os << value << "\n";
  };
  field("family:", family_name(b.family));
  field("epsilon:", fmt_short(b.epsilon()));
  field("omega:", fmt_short(b.omega));
  field("default tau:", fmt_short(b.default_schedule.tau()));
  field("default delta:", fmt_short(b.default_schedule.delta()));
  field("default horizon:", fmt_short(b.default_horizon));
  field("default ensemble:", std::to_string(b.default_ensemble));
  field("reference:", b.reference_scheme + " at h = " + fmt_short(b.reference_h));
  field("state dimension:", std::to_string(b.u0.size()));
  std::string u0 = "[";
  for (Eigen::Index i = 0; i < b.u0.size(); ++i) {
    if (i > 0) {
      u0 += ", ";
    }
    u0 += fmt_short(b.u0[i]);
  }
  u0 += "]";
  field("initial state:", u0);
  const auto names = [](const std::vector<SlowObservable>& pool) {
    std::string joined;
    for (const auto& obs : pool) {
      if (!joined.empty()) {
        joined += ", ";
      }
      joined += obs.name;
    }
    return joined.empty() ? std::string("(none)") : joined;
  };
  field("slow observables:", names(b.slow_observables));
  field("fast observables:", names(b.fast_observables));
  std::string extras;
  const auto add_extra = [&extras](const char* what) {
    if (!extras.empty()) {
      extras += ", ";
    }
    extras += what;
  };
  if (b.ham && b.ham->stiff_flow) {
    add_extra("closed-form stiff flow");
  }
  if (b.exact_flow) {
    add_extra("closed-form full flow");
  }
  if (b.constraint) {
    add_extra("fast-variable constraint");
  }
  if (b.symmetry) {
    add_extra("discrete symmetry");
  }
  if (b.alt_form) {
    add_extra("alternate coordinate form");
  }
  field("extras:", extras.empty() ? "(none)" : extras);
  return os.str();
}

}  // namespace flavor
