#ifndef FLAVOR_ANALYSIS_HPP
#define FLAVOR_ANALYSIS_HPP

#include <vector>

#include "flavor/compose.hpp"
#include "flavor/trajectory.hpp"
#include "flavor/types.hpp"

namespace flavor {

/// One-mesostep matrix of a linear deterministic stepper, built by applying
/// the stepper to the unit basis vectors.  Probes random states to verify
/// linearity (relative defect <= probe_tol); throws NotLinear otherwise.
Mat transfer_matrix(const Stepper& stepper, Eigen::Index dim,
                    double probe_tol = 1e-10);

/// Monic characteristic polynomial coefficients of a square matrix,
/// descending powers: c[0] lambda^n + ... + c[n] with c[0] = 1.
/// (Faddeev-LeVerrier recursion, exact up to roundoff.)
Vec char_poly(const Mat& m);

struct StabilityVerdict {
  double spectral_radius = 0.0;
  bool stable = false;  // spectral_radius <= 1 + tol
  Eigen::VectorXcd eigenvalues;
};

/// Eigenvalue-based verdict; radius within tol of 1 counts stable, so unit
/// circle spectra with defective Jordan blocks pass.
StabilityVerdict stability_verdict(const Mat& transfer, double tol = 1e-8);

enum class ScanKind { Nonintrusive, Artificial };

/// Stability grid over (delta, tau/eps) for the two-degree-of-freedom
/// stiff/soft oscillator chain at frequency omega (eps = 1/omega^2).
/// verdict(i,j): 1 stable, 0 unstable, -1 infeasible (tau > delta);
/// radius(i,j) holds the spectral radius (NaN when infeasible).
struct ScanGrid {
  std::vector<double> deltas;
  std::vector<double> ratios;  // tau / eps
  Eigen::MatrixXi verdict;     // deltas.size() x ratios.size()
  Mat radius;
};

ScanGrid stability_domain_scan(ScanKind kind, double omega,
                               std::vector<double> deltas,
                               std::vector<double> ratios,
                               double marginal_tol = 1e-6);

/// Sup over aligned windows of the distance between windowed time-averages
/// of phi along the two trajectories (piecewise-constant quadrature, the
/// natural reading of a flow-averaged trajectory).  Windows tile [0, T]
/// where T is the shorter horizon; throws WindowTooSmall if any window
/// holds fewer than 10 samples of either trajectory.
double f_error(const Trajectory& a, const Trajectory& b,
               const SlowObservable& phi, double window);

/// Sup over a's sample times of |phi(a) - phi(ref)|, with ref linearly
/// interpolated onto a's times.  Throws GridMismatch if ref does not cover
/// a's time range.
double slow_error(const Trajectory& a, const Trajectory& ref,
                  const SlowObservable& phi);

struct EnergySeries {
  std::vector<double> times;
  std::vector<double> values;
  double drift_slope = 0.0;  // least-squares slope of values vs times
};

EnergySeries energy_series(const Trajectory& traj,
                           const std::function<double(const Vec&)>& energy);

/// Per-spring stiff-mode energies of an alternating stiff/soft chain state
/// (2m coordinates):
///   I_j = ((p_{2j+1} - p_{2j}) / sqrt(2))^2 / 2
///         + (omega^2 / 4) (q_{2j+1} - q_{2j})^2,   j = 0..m-1
/// Rows are samples, columns springs; the last column is the total.
Mat stiff_spring_energies(const Trajectory& traj, double omega);

/// Pointwise ensemble statistics of a (possibly vector-valued) observable.
/// autocorr is the lag-from-zero product mean E[phi(t) phi(0)] without mean
/// subtraction.  Requires a shared time grid across trajectories.
struct EnsembleStats {
  std::vector<double> times;
  Mat mean, var, se;            // samples x observable-dim
  Mat autocorr, autocorr_se;
};

EnsembleStats ensemble_stats(const std::vector<Trajectory>& ensemble,
                             const SlowObservable& phi);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least-squares fit of log(y) vs log(x); inputs must be positive.
LogLogFit fit_loglog(const std::vector<double>& x,
                     const std::vector<double>& y);

}  // namespace flavor

#endif
