#ifndef FLAVOR_COMPOSE_HPP
#define FLAVOR_COMPOSE_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "flavor/legacy.hpp"
#include "flavor/trajectory.hpp"
#include "flavor/types.hpp"

namespace flavor {

enum class Kind {
  Fine,  // single-scale legacy run
  Nonintrusive,
  Reversible,
  Artificial,
  Nonautonomous,
  Sde,
  LangevinSlow,
  LangevinFast,
  LangevinReversibleSlow,
  LangevinReversibleFast,
};

const char* kind_name(Kind k);

/// Per-mesostep context owned by the integrate() call frame; steppers are
/// immutable recipes, so trajectories can run concurrently.
struct StepContext {
  std::int64_t mesostep = 0;
  double slow_time = 0.0;               // mesostep * dt at the step start
  rng::GaussianSource* gauss = nullptr; // null for deterministic steppers
  StepCounters* counters = nullptr;     // optional
};

/// One stage of a composition recipe.  `det_dt` is the slow-clock time the
/// stage advances; deterministic stages of a mesostep sum to delta exactly
/// (OU stages overlap the Hamiltonian substeps and carry det_dt = 0).
struct Stage {
  enum class Op {
    Map,              // legacy one-step map
    MapAdjoint,       // adjoint of the legacy map
    Stochastic,       // stochastic one-step map
    Ou,               // exact OU flow on momenta
    SoftKick,         // p -= h grad V(q)
    FastDriftKick,    // drift tau, stiff kick at the new position
    ConstrainedDrift, // free flight with constraint-projected momenta
  };

  Op op = Op::Map;
  double h = 0.0;
  double alpha = 0.0;
  double det_dt = 0.0;
  double time_offset = 0.0;   // evaluation time relative to slow_time
  bool use_fast_clock = false;
  std::function<void(Vec&, const StepContext&, double t)> run;
};

/// Anything integrate() can drive one mesostep at a time.
class Stepper {
 public:
  virtual ~Stepper() = default;
  virtual void advance(Vec& u, const StepContext& ctx) const = 0;
  virtual double dt() const = 0;            // mesostep size
  virtual double fast_dt() const = 0;       // fast-clock advance per mesostep
  virtual bool stochastic() const = 0;
  virtual Kind kind() const = 0;
};

/// Flow-averaged stepper: an ordered list of stages executed left to right.
class FlavorStepper final : public Stepper {
 public:
  FlavorStepper(Kind kind, StepSchedule sched, std::vector<Stage> stages,
                bool stochastic, double fast_dt);

  void advance(Vec& u, const StepContext& ctx) const override;
  double dt() const override { return sched_.delta(); }
  double fast_dt() const override { return fast_dt_; }
  bool stochastic() const override { return stochastic_; }
  Kind kind() const override { return kind_; }

  const StepSchedule& schedule() const { return sched_; }
  const std::vector<Stage>& stages() const { return stages_; }

 private:
  Kind kind_;
  StepSchedule sched_;
  std::vector<Stage> stages_;
  bool stochastic_;
  double fast_dt_;
};

/// Single-scale runner: one legacy application per step at fixed alpha.
class FineStepper final : public Stepper {
 public:
  FineStepper(OneStepMap map, double h, double alpha);
  FineStepper(StochasticOneStepMap map, double h, double alpha);

  void advance(Vec& u, const StepContext& ctx) const override;
  double dt() const override { return h_; }
  double fast_dt() const override { return h_; }
  bool stochastic() const override { return stoch_.apply != nullptr; }
  Kind kind() const override { return Kind::Fine; }

 private:
  OneStepMap det_;
  StochasticOneStepMap stoch_;
  double h_;
  double alpha_;
};

/// Constraint used by the artificial composition's free-flight stage: the
/// momentum is projected so the frozen directions do not drift.
class ConstraintSpec {
 public:
  /// Freeze the linear combinations A q (rows of A are the frozen
  /// directions).  The projector I - M^-1 A^T (A M^-1 A^T)^-1 A is built
  /// once; throws ConstraintRankDeficient if A M^-1 A^T is singular.
  static ConstraintSpec linear_freeze(Mat a);
  /// State-dependent momentum projector P(q).  The constrained drift built
  /// on a state-dependent projector is generally not symplectic (no
  /// SHAKE/RATTLE correction is applied); constant projectors from
  /// linear_freeze are.
  static ConstraintSpec custom(std::function<Mat(const Vec&)> projector);

  /// True when the projector never depends on q (linear_freeze).
  bool state_independent() const { return linear_; }

  Mat projector(const Vec& q, const MassMatrix& mass) const;

 private:
  ConstraintSpec() = default;
  bool linear_ = false;
  Mat a_;
  mutable Mat cached_p_;
  mutable bool cached_ = false;
  std::function<Mat(const Vec&)> custom_;
};

/// Nonintrusive composition Phi^0_{delta-tau} o Phi^{1/eps}_tau.
FlavorStepper flavor_step(OneStepMap legacy, StepSchedule sched,
                          double epsilon);

/// Palindromic composition
///   Phi^{1/eps,*}_{tau/2} o Phi^{0,*}_{(delta-tau)/2}
///     o Phi^0_{(delta-tau)/2} o Phi^{1/eps}_{tau/2};
/// throws AdjointMissing unless the legacy map carries its adjoint.
FlavorStepper flavor_reversible_step(OneStepMap legacy, StepSchedule sched,
                                     double epsilon);

/// Which map the artificial composition uses for the fast substep.
enum class FastSubstep {
  DriftKick,  // q += tau M^-1 p, then stiff kick at the new position
  Exact,      // registered closed-form fast flow
};

/// Artificial composition: soft kick over delta, fast substep over tau,
/// constrained free flight over delta - tau.
FlavorStepper artificial_flavor_step(SeparatedHamiltonian ham,
                                     StepSchedule sched,
                                     ConstraintSpec constraint,
                                     FastSubstep fast = FastSubstep::DriftKick);

/// Stochastic nonintrusive composition; the two substeps of a mesostep draw
/// disjoint Gaussian blocks from the per-(trajectory, mesostep) substream,
/// tau block first.
FlavorStepper flavor_sde_step(StochasticOneStepMap legacy, StepSchedule sched,
                              double epsilon);

/// Langevin compositions (placement read from the system):
///   Slow:  OU(tau) -> stiff substep(tau) -> OU(delta-tau) -> soft substep
///   Fast:  OU at rate alpha c over tau -> stiff substep(tau) -> soft substep
/// The Hamiltonian substeps are symplectic Euler.
FlavorStepper flavor_langevin_step(LangevinSystem sys, StepSchedule sched);

/// Reversible Langevin compositions: the deterministic palindrome of
/// flavor_reversible_step with OU halves at the two ends (duration delta/2
/// each for Slow placement, tau/2 at rate alpha c for Fast).
FlavorStepper flavor_langevin_reversible_step(LangevinSystem sys,
                                              StepSchedule sched);

/// Hamiltonian system driven by a fast time-periodic force on the momenta.
/// The forcing enters only the fast substep, evaluated on the fast clock
/// (mesostep index times tau), so the averaged run samples the forcing at
/// the slowed-down rate.
struct ForcedHamiltonian {
  SeparatedHamiltonian ham;
  std::function<Vec(const Vec& q, double t)> fast_force;
};

/// Nonautonomous composition (position-first substeps):
///   fast: q += tau M^-1 p; p += tau (soft force + forcing at fast clock)
///   slow: q += (delta-tau) M^-1 p; p += (delta-tau) soft force.
FlavorStepper flavor_nonautonomous_step(ForcedHamiltonian sys,
                                        StepSchedule sched);

/// Single-scale forced map, position first with the soft force and the
/// forcing both evaluated at the updated position and the step's start
/// time.  alpha == 0 drops the forcing entirely, which is the unforced
/// control scheme; any other alpha applies the forcing as given.
OneStepMap forced_euler(ForcedHamiltonian sys);

/// Drives a stepper for floor(t_end / dt) mesosteps, recording per the
/// sampler.  The state is checked for non-finite entries after every
/// mesostep; on failure the partial trajectory is returned with `failure`
/// set.  Stochastic steppers draw from substream (seed, traj_index, k) at
/// mesostep k.
Trajectory integrate(const Stepper& stepper, const Vec& u0, double t_end,
                     const SamplerPolicy& sampler = {},
                     std::uint64_t seed = 0, std::uint64_t traj_index = 0);

/// Independent trajectories i = 0..n-1 seeded by (base_seed, i).  `threads`
/// <= 0 picks the hardware concurrency.  Results are ordered by index, so
/// the output is byte-stable regardless of scheduling.
std::vector<Trajectory> run_ensemble(const Stepper& stepper, const Vec& u0,
                                     double t_end,
                                     const SamplerPolicy& sampler,
                                     std::uint64_t base_seed, int n_traj,
                                     int threads = 0);

}  // namespace flavor

#endif
