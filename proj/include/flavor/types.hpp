#ifndef FLAVOR_TYPES_HPP
#define FLAVOR_TYPES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace flavor {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Step sizes violate 0 < tau <= delta, or the rule of thumb cannot
/// produce such a pair for the requested stiffness.
class ScheduleInfeasible : public Error {
 public:
  using Error::Error;
};

/// A state with NaN or Inf entries was produced.  `mesostep` is the index of
/// the offending step when known (-1 otherwise).
class NonFiniteState : public Error {
 public:
  NonFiniteState(const std::string& what, std::int64_t step = -1)
      : Error(what), mesostep(step) {}
  std::int64_t mesostep;
};

/// The reversible composition needs an adjoint the legacy map does not carry.
class AdjointMissing : public Error {
 public:
  using Error::Error;
};

/// No closed-form stiff flow is registered for this Hamiltonian.
class NoStiffFlow : public Error {
 public:
  using Error::Error;
};

/// Constraint rows are linearly dependent (A M^-1 A^T singular).
class ConstraintRankDeficient : public Error {
 public:
  using Error::Error;
};

/// A matrix expected to be symmetric positive definite is not.
class NotSpd : public Error {
 public:
  using Error::Error;
};

/// transfer_matrix probing detected a nonlinear stepper.
class NotLinear : public Error {
 public:
  using Error::Error;
};

/// A time-average window holds fewer samples than the estimator needs.
class WindowTooSmall : public Error {
 public:
  using Error::Error;
};

/// Trajectories passed to a comparison do not share a usable time grid.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// A name lookup failed; `suggestion` holds the closest known name, if any.
class UnknownName : public Error {
 public:
  UnknownName(const std::string& what, std::string close = "")
      : Error(what), suggestion(std::move(close)) {}
  std::string suggestion;
};

/// SPD mass matrix with identity/diagonal fast paths.  The identity path
/// applies no floating point operations, so maps built on it preserve states
/// bitwise where the update formula does.
class MassMatrix {
 public:
  static MassMatrix identity(Eigen::Index n);
  static MassMatrix diagonal(Vec d);  // throws NotSpd unless all entries > 0
  static MassMatrix dense(Mat m);     // throws NotSpd unless symmetric PD

  Eigen::Index size() const { return n_; }
  bool is_identity() const { return kind_ == Kind::Identity; }

  /// M^-1 v (returns v unchanged on the identity path).
  Vec apply_inverse(const Vec& v) const;
  /// M v.
  Vec apply(const Vec& v) const;
  /// Kinetic energy p^T M^-1 p / 2.
  double kinetic(const Vec& p) const;
  /// Materialized M^-1 (used when building constraint projectors).
  Mat inverse_matrix() const;

 private:
  enum class Kind { Identity, Diagonal, Dense };
  Kind kind_ = Kind::Identity;
  Eigen::Index n_ = 0;
  Vec diag_;         // Diagonal
  Mat dense_, inv_;  // Dense
};

/// ODE with an explicit stiff/soft split: u' = G(u) + (1/epsilon) F(u).
/// Integrators receive the stiff coefficient as a parameter alpha so it can
/// be switched between 0 and 1/epsilon.
struct StiffSplitSystem {
  Eigen::Index dim = 0;
  double epsilon = 1.0;
  std::function<Vec(const Vec&)> soft_drift;   // G
  std::function<Vec(const Vec&)> stiff_drift;  // F
};

/// Dynamics given as a single drift (and optional diffusion) parametrized by
/// the stiff coefficient alpha.  Covers systems whose stiff part cannot be
/// written as an additive term, and nonautonomous SDEs.  `diffusion` returns
/// a noise matrix with dim rows and one column per independent Brownian
/// component; a null diffusion means the system is deterministic.  Shared
/// noise is expressed by placing several nonzero entries in one column, and
/// the Euler-Maruyama map draws exactly one Gaussian per column.
struct ParametricSystem {
  Eigen::Index dim = 0;
  double epsilon = 1.0;
  bool time_dependent = false;
  std::function<Vec(const Vec&, double alpha, double eps, double t)> drift;
  std::function<Mat(const Vec&, double alpha, double eps, double t)> diffusion;
};

/// SDE with additive stiff/soft split in both drift and diffusion:
///   du = (G + alpha F) dt + (H + sqrt(alpha) K) dW.
/// Null H/K entries mean "identically zero"; with both null the
/// Euler-Maruyama map adds no noise term at all and is bitwise deterministic.
struct SdeSplitSystem {
  Eigen::Index dim = 0;
  double epsilon = 1.0;
  std::function<Vec(const Vec&)> soft_drift;       // G
  std::function<Vec(const Vec&)> stiff_drift;      // F
  std::function<Mat(const Vec&)> soft_diffusion;   // H, may be null
  std::function<Mat(const Vec&)> stiff_diffusion;  // K, may be null
};

/// Hamiltonian H(q,p) = p^T M^-1 p / 2 + V(q) + U(q)/epsilon with state
/// u = [q; p] of length 2 n_dof.  `stiff_flow`, when present, advances (q,p)
/// under the fast Hamiltonian p^T M^-1 p / 2 + U(q)/epsilon exactly.
struct SeparatedHamiltonian {
  Eigen::Index n_dof = 0;
  MassMatrix mass;
  double epsilon = 1.0;
  std::function<double(const Vec&)> soft_potential;   // V
  std::function<double(const Vec&)> stiff_potential;  // U
  std::function<Vec(const Vec&)> soft_gradient;       // grad V
  std::function<Vec(const Vec&)> stiff_gradient;      // grad U
  std::function<void(Vec& q, Vec& p, double h)> stiff_flow;  // optional

  double energy(const Vec& u) const;
  double alpha_full() const { return 1.0 / epsilon; }
};

/// Where friction and noise live relative to the stiff scale.
enum class NoisePlacement { Slow, Fast };

/// Langevin dynamics: Hamiltonian part plus Ornstein-Uhlenbeck friction and
/// noise on the momenta.  `friction` is diagonal (entries >= 0; zero entries
/// carry no friction and no noise).  `beta` is the inverse temperature: the
/// OU stationary momentum variance is 1/beta in every direction with
/// friction.  With Fast placement the friction matrix is scaled by alpha
/// (i.e. by 1/epsilon in the full dynamics) while 1/beta is unchanged.
struct LangevinSystem {
  SeparatedHamiltonian ham;
  Vec friction;  // diagonal entries, length n_dof
  double beta = 1.0;
  NoisePlacement placement = NoisePlacement::Slow;
};

/// Named map from state to a (possibly vector-valued) slow quantity.
struct SlowObservable {
  std::string name;
  std::function<Vec(const Vec&)> map;
};

/// Microstep tau and mesostep delta, tied by 0 < tau <= delta.
class StepSchedule {
 public:
  StepSchedule(double tau, double delta);

  double tau() const { return tau_; }
  double delta() const { return delta_; }

  /// Strict-inequality check of the accuracy window
  ///   (tau/eps^s)^2 < delta < tau/eps^s
  /// where s is the stiffness exponent (1 for ODE/SDE drift, 1/2 for
  /// Hamiltonian stiffness).  A query, not an enforcement.
  bool regime_ok(double epsilon, double stiffness_exponent = 1.0) const;

 private:
  double tau_;
  double delta_;
};

/// tau = gamma * eps^s and delta = gamma^2 (= gamma * tau / eps^s).
/// Throws ScheduleInfeasible when eps^s >= gamma, since then tau >= delta.
StepSchedule make_schedule_rule_of_thumb(double epsilon, double gamma = 0.1,
                                         double stiffness_exponent = 1.0);

/// Central finite-difference validation of both gradients at q.
/// Per-component relative error uses denominator max(1, |analytic|).
struct GradientCheck {
  double soft_max_rel_err = 0.0;
  double stiff_max_rel_err = 0.0;
  double max_rel_err() const {
    return soft_max_rel_err > stiff_max_rel_err ? soft_max_rel_err
                                                : stiff_max_rel_err;
  }
};

GradientCheck check_gradient(const SeparatedHamiltonian& ham, const Vec& q,
                             double fd_step = 1e-5);

}  // namespace flavor

#endif
