#ifndef FLAVOR_LEGACY_HPP
#define FLAVOR_LEGACY_HPP

#include <memory>

#include "flavor/rng.hpp"
#include "flavor/types.hpp"

namespace flavor {

/// One-step map u -> Phi^alpha_h(u) with a controllable stiff coefficient.
/// Contract: apply(u, 0, alpha, t) leaves u bitwise unchanged, and the t
/// argument is ignored by autonomous maps.
struct OneStepMap {
  std::function<void(Vec& u, double h, double alpha, double t)> apply;
  bool adjoint_available = false;
  std::shared_ptr<OneStepMap> adjoint;  // set iff adjoint_available
};

/// Stochastic one-step map; same contract, with Gaussian input drawn from
/// the supplied source in a fixed documented order.  The draw count per
/// application is fixed by the map (never by the state), and h == 0 draws
/// nothing at all.
struct StochasticOneStepMap {
  std::function<void(Vec& u, double h, double alpha, double t,
                     rng::GaussianSource& g)>
      apply;
};

/// Forward Euler u' = u + h (G(u) + alpha F(u)).
OneStepMap forward_euler(StiffSplitSystem sys);
/// Forward Euler u' = u + h drift(u, alpha, eps, t).
OneStepMap forward_euler(ParametricSystem sys);

/// Symplectic Euler, momentum first:
///   p' = p - h (grad V(q) + alpha grad U(q)),  q' = q + h M^-1 p'.
/// Carries its adjoint (position first, forces at the updated position).
OneStepMap symplectic_euler(SeparatedHamiltonian ham);
/// The adjoint map on its own.
OneStepMap symplectic_euler_adjoint(SeparatedHamiltonian ham);

/// Velocity Verlet (half kick, drift, half kick); self-adjoint.
OneStepMap velocity_verlet(SeparatedHamiltonian ham);

/// Euler-Maruyama u' = u + h (G + alpha F) + sqrt(h) (H + sqrt(alpha) K) xi,
/// drawing dim Gaussians per application.  With both diffusion fields null
/// no noise term is added (and no Gaussians are drawn), making the map
/// bitwise identical to forward Euler.
StochasticOneStepMap euler_maruyama(SdeSplitSystem sys);
/// Euler-Maruyama on a parametric system; diffusion must be non-null.
/// Draws one Gaussian per diffusion column, so correlated equations that
/// share a Brownian component consume a single draw.
StochasticOneStepMap euler_maruyama(ParametricSystem sys);

/// Exact Ornstein-Uhlenbeck flow on the momentum half of u = [q; p]:
///   p' = exp(-alpha c h) p + N(0, v_stat (1 - exp(-2 alpha c h)))
/// componentwise for diagonal friction c (entries >= 0; zero entries pass
/// through untouched and draw no noise... every application draws one
/// Gaussian per strictly positive friction entry).
StochasticOneStepMap ou_exact_flow(Vec friction_diag, double stationary_var);
/// Dense symmetric PSD friction; the eigendecomposition is cached once.
StochasticOneStepMap ou_exact_flow(Mat friction_sym, double stationary_var);

/// Geometric Langevin step: exact OU flow over h, then symplectic Euler
/// over h with the Hamiltonian forces at coefficient alpha.  With Slow
/// placement the OU rate is the friction itself; with Fast placement it is
/// scaled by alpha.
StochasticOneStepMap gla_step(LangevinSystem sys);

/// How the impulse method and the artificial composition advance the fast
/// Hamiltonian p^T M^-1 p / 2 + U/eps.
enum class FastFlowKind {
  Exact,    // requires ham.stiff_flow; throws NoStiffFlow otherwise
  Numeric,  // velocity Verlet substeps
};

/// Impulse method: soft half kick, fast flow at coefficient alpha over h,
/// soft half kick.  The registered exact flow covers alpha = 1/eps (and
/// alpha = 0, which is free drift); other coefficients need Numeric, which
/// runs velocity Verlet substeps of the fast Hamiltonian.
OneStepMap impulse_method(SeparatedHamiltonian ham,
                          FastFlowKind fast_flow = FastFlowKind::Exact,
                          int numeric_substeps = 64);

}  // namespace flavor

#endif
