#ifndef FLAVOR_PROBLEMS_HPP
#define FLAVOR_PROBLEMS_HPP

#include <optional>
#include <string>
#include <vector>

#include "flavor/compose.hpp"
#include "flavor/types.hpp"

namespace flavor {

enum class Family { Hamiltonian, Ode, Sde, Langevin, Forced };

/// A ready-to-run experiment: dynamics, initial state, published step sizes
/// and horizon, observables, and whatever reference machinery (fine step
/// size, closed-form flow) the original study used.
struct Benchmark {
  std::string name;
  std::string description;
  Family family = Family::Hamiltonian;

  double default_horizon = 1.0;
  StepSchedule default_schedule{1e-3, 1e-2};
  double reference_h = 0.0;  // fine step of the comparison integrator
  // Published comparison integrator: one of symplectic-euler,
  // velocity-verlet, forward-euler, euler-maruyama, gla, forced.
  std::string reference_scheme = "symplectic-euler";
  int default_ensemble = 1;  // sample paths for stochastic benchmarks
  double omega = 0.0;        // stiffness frequency when the problem has one
  // Composition used when an experiment names no stepper; "flavor" picks the
  // family's generic switched composition.
  std::string default_stepper = "flavor";

  Vec u0;
  std::vector<SlowObservable> slow_observables;
  std::vector<SlowObservable> fast_observables;

  std::optional<SeparatedHamiltonian> ham;     // Hamiltonian & Forced
  std::optional<ParametricSystem> ode;         // Ode & Sde (primary form)
  std::optional<LangevinSystem> langevin;      // Langevin
  std::optional<ForcedHamiltonian> forced;     // Forced

  /// Same dynamics in other coordinates (polar Van der Pol, separated SDE),
  /// with its own initial state and observables matching slow_observables
  /// one-for-one for cross-checks.
  std::optional<ParametricSystem> alt_form;
  Vec alt_u0;
  std::vector<SlowObservable> alt_slow_observables;

  std::optional<ConstraintSpec> constraint;  // artificial composition
  std::function<Vec(const Vec&, double)> exact_flow;  // u(t), when closed form
  std::function<Vec(const Vec&)> symmetry;  // dynamics-preserving state map

  double epsilon() const;
};

/// Two-degree-of-freedom stiff/soft oscillator chain
/// H = p_x^2/2 + p_y^2/2 + x^2/2 + (omega^2/2)(y - x)^2; the stability and
/// error-analysis testbed.  omega = 0 degenerates to the soft oscillator.
Benchmark linear_stability_problem(double omega = 1000.0);

/// Three coupled oscillators with quartic soft potential and two stiff
/// springs: V = x^4, U = (1.1/2)(y-x)^2 + (0.97/2)(z-y)^2.  The registry
/// entry uses eps = 1e-6; other stiffnesses serve the error-vs-omega study.
Benchmark triple_chain_problem(double epsilon = 1e-6);

/// Nonlinear stiff + nonlinear soft two-body problem:
/// V = (x - y)^4, U = y^6, eps = 1e-6.
Benchmark nonlinear_stiff_soft_problem();

/// Fermi-Pasta-Ulam alternating stiff/soft chain, short-horizon setup
/// (m = 3 stiff pairs, omega = 1000, T = 2 omega).
Benchmark fpu_short_problem();
/// Long-horizon FPU setup (omega = 200, T = omega^2/4).
Benchmark fpu_long_problem();
/// FPU with quadratic soft springs; fully linear, admits a closed-form
/// solution and a normal-mode beat period for the energy exchange.
Benchmark fpu_harmonic_problem();

/// Van der Pol oscillator in relaxation form, eps = 1e-3.  Primary form is
/// Cartesian (x' = -eps y, y' = alpha (x + y - y^3/3)); the alternate form
/// is the polar coordinates in which slow and fast variables are hidden.
Benchmark van_der_pol_problem();

/// Planar particle tethered to the unit circle by a stiff radial spring,
/// with soft angular potential x^2/(x^2+y^2); omega = 500.
Benchmark primitive_md_problem();

/// Exaggerated united-atom propane: stiff harmonic bonds, soft harmonic
/// angle, masses (15, 14, 15).
Benchmark propane_problem();

/// Inverted pendulum with vertically vibrated pivot (Kapitza), driven by
/// the fast forcing omega^2 sin(2 pi omega t) sin(theta).
Benchmark kapitza_problem();

/// Nonautonomous SDE with hidden slow/fast variables: the separated pair
///   dx = -y^2/2 dt + 5 sin(2 pi t) dW,  dy = (1/eps)(x - y) dt
///        + sqrt(2/eps) dW
/// seen through u = (x-c)^{1/3} - y, v = (x-c)^{1/3} + y (c = 10).  Primary
/// form is (u, v); the separated form is the alternate.  Both equations of
/// each form share one Brownian increment per step.
Benchmark hidden_sde_problem();

/// Langevin dynamics with slow noise and friction on both momenta:
/// V = (y - x)^4, U = y^4/4, eps = 1e-8, c = 0.1, sigma = 0.5.
Benchmark langevin_slow_problem();

/// Langevin dynamics with fast noise and friction on the light momentum
/// only: V = e^y (x - y)^2, U = (omega^2/4) y^4, eps = 1/omega^2,
/// omega = 100, c = diag(0.1, 0), sigma = 1.
Benchmark langevin_fast_problem();

/// Registry names, in listing order.
std::vector<std::string> benchmark_names();

/// Lookup by registry name; throws UnknownName with the edit-distance
/// closest name as suggestion.
Benchmark make_benchmark(const std::string& name);

namespace detail {
/// Levenshtein distance, used to suggest the nearest known name.
int edit_distance(const std::string& a, const std::string& b);
}  // namespace detail

}  // namespace flavor

#endif
