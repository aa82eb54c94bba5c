#include "flavor/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flavor/rng.hpp"

namespace flavor {

Mat transfer_matrix(const Stepper& stepper, Eigen::Index dim,
                    double probe_tol) {
  if (stepper.stochastic()) {
    throw NotLinear("stochastic steppers have no transfer matrix");
  }
  StepContext ctx;  // autonomous probe: mesostep 0, no noise, no counters

  Vec origin = Vec::Zero(dim);
  stepper.advance(origin, ctx);
  if (origin.norm() > probe_tol) {
    throw NotLinear("stepper does not fix the origin (affine or nonlinear)");
  }

  Mat m(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    Vec u = Vec::Zero(dim);
    u[j] = 1.0;
    stepper.advance(u, ctx);
    m.col(j) = u;
  }

  rng::StreamGauss gauss(rng::Stream(0x51ab1e5eedULL));
  for (int probe = 0; probe < 3; ++probe) {
    Vec x(dim);
    gauss.fill(x);
    Vec y = x;
    stepper.advance(y, ctx);
    const Vec predicted = m * x;
    const double scale = std::max(1.0, predicted.norm());
    if ((y - predicted).norm() > probe_tol * scale) {
      throw NotLinear(
          "stepper output on random states deviates from its unit-basis "
          "matrix");
    }
  }
  return m;
}

Vec char_poly(const Mat& a) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) {
    throw Error("char_poly needs a square matrix");
  }
  // Faddeev-LeVerrier recursion.
  Vec c(n + 1);
  c[0] = 1.0;
  Mat m = Mat::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + c[k - 1] * Mat::Identity(n, n);
    c[k] = -(a * m).trace() / static_cast<double>(k);
  }
  return c;
}

StabilityVerdict stability_verdict(const Mat& transfer, double tol) {
  Eigen::EigenSolver<Mat> eig(transfer);
  StabilityVerdict v;
  v.eigenvalues = eig.eigenvalues();
  v.spectral_radius = v.eigenvalues.cwiseAbs().maxCoeff();
  v.stable = v.spectral_radius <= 1.0 + tol;
  return v;
}

namespace {

// Two coupled unit masses, soft potential x^2/2 on the first, stiff spring
// omega^2 (y - x)^2 / 2 between them; eps = 1/omega^2 so the stiff energy is
// U(q)/eps with U = (y - x)^2 / 2.  omega == 0 degenerates to the free soft
// oscillator (U identically zero, eps = 1).
SeparatedHamiltonian chain_hamiltonian(double omega) {
  SeparatedHamiltonian ham;
  ham.n_dof = 2;
  ham.mass = MassMatrix::identity(2);
  ham.epsilon = omega > 0.0 ? 1.0 / (omega * omega) : 1.0;
  ham.soft_potential = [](const Vec& q) { return 0.5 * q[0] * q[0]; };
  ham.soft_gradient = [](const Vec& q) {
    Vec g(2);
    g << q[0], 0.0;
    return g;
  };
  if (omega > 0.0) {
    ham.stiff_potential = [](const Vec& q) {
      const double d = q[1] - q[0];
      return 0.5 * d * d;
    };
    ham.stiff_gradient = [](const Vec& q) {
      const double d = q[1] - q[0];
      Vec g(2);
      g << -d, d;
      return g;
    };
  } else {
    ham.stiff_potential = [](const Vec&) { return 0.0; };
    ham.stiff_gradient = [](const Vec& q) { return Vec(Vec::Zero(q.size())); };
  }
  return ham;
}

}  // namespace

ScanGrid stability_domain_scan(ScanKind kind, double omega,
                               std::vector<double> deltas,
                               std::vector<double> ratios,
                               double marginal_tol) {
  if (omega < 0.0) {
    throw Error("stability scan needs omega >= 0");
  }
  ScanGrid grid;
  grid.deltas = std::move(deltas);
  grid.ratios = std::move(ratios);
  const auto nd = static_cast<Eigen::Index>(grid.deltas.size());
  const auto nr = static_cast<Eigen::Index>(grid.ratios.size());
  grid.verdict = Eigen::MatrixXi::Constant(nd, nr, -1);
  grid.radius =
      Mat::Constant(nd, nr, std::numeric_limits<double>::quiet_NaN());

  const SeparatedHamiltonian ham = chain_hamiltonian(omega);
  const double eps = ham.epsilon;
  Mat freeze(1, 2);
  freeze << -1.0, 1.0;

  for (Eigen::Index i = 0; i < nd; ++i) {
    for (Eigen::Index j = 0; j < nr; ++j) {
      const double delta = grid.deltas[static_cast<std::size_t>(i)];
      const double tau = grid.ratios[static_cast<std::size_t>(j)] * eps;
      if (!(tau > 0.0) || tau > delta) {
        continue;  // infeasible cell
      }
      const StepSchedule sched(tau, delta);
      Mat transfer;
      if (kind == ScanKind::Nonintrusive) {
        transfer =
            transfer_matrix(flavor_step(symplectic_euler(ham), sched, eps), 4);
      } else {
        transfer = transfer_matrix(
            artificial_flavor_step(ham, sched,
                                   ConstraintSpec::linear_freeze(freeze)),
            4);
      }
      const StabilityVerdict v = stability_verdict(transfer, marginal_tol);
      grid.verdict(i, j) = v.stable ? 1 : 0;
      grid.radius(i, j) = v.spectral_radius;
    }
  }
  return grid;
}

namespace {

// Piecewise-constant mean of phi over [w0, w1); throws WindowTooSmall when
// the window holds fewer than 10 of the trajectory's sample times.
Vec window_mean(const Trajectory& tr, const SlowObservable& phi, double w0,
                double w1) {
  Vec acc;
  double covered = 0.0;
  int inside = 0;
  for (std::size_t i = 0; i + 1 < tr.times.size(); ++i) {
    const double t0 = tr.times[i];
    const double t1 = tr.times[i + 1];
    if (t0 >= w0 && t0 < w1) {
      ++inside;
    }
    const double lo = std::max(t0, w0);
    const double hi = std::min(t1, w1);
    if (hi <= lo) {
      continue;
    }
    const Vec v = phi.map(tr.states[i]);
    if (acc.size() == 0) {
      acc = Vec::Zero(v.size());
    }
    acc += (hi - lo) * v;
    covered += hi - lo;
  }
  if (!tr.times.empty()) {
    const double t_last = tr.times.back();
    if (t_last >= w0 && t_last < w1) {
      ++inside;
    }
  }
  if (inside < 10) {
    throw WindowTooSmall("time-average window holds fewer than 10 samples");
  }
  return acc / covered;
}

}  // namespace

double f_error(const Trajectory& a, const Trajectory& b,
               const SlowObservable& phi, double window) {
  if (!(window > 0.0)) {
    throw WindowTooSmall("window length must be positive");
  }
  if (a.times.size() < 2 || b.times.size() < 2) {
    throw WindowTooSmall("trajectories too short to average");
  }
  const double t_end = std::min(a.times.back(), b.times.back());
  const auto n_win =
      static_cast<std::int64_t>(std::floor(t_end / window + 1e-9));
  if (n_win < 1) {
    throw WindowTooSmall("horizon holds no complete window");
  }
  double worst = 0.0;
  for (std::int64_t k = 0; k < n_win; ++k) {
    const double w0 = static_cast<double>(k) * window;
    const double w1 = w0 + window;
    const Vec ma = window_mean(a, phi, w0, w1);
    const Vec mb = window_mean(b, phi, w0, w1);
    worst = std::max(worst, (ma - mb).norm());
  }
  return worst;
}

double slow_error(const Trajectory& a, const Trajectory& ref,
                  const SlowObservable& phi) {
  if (a.times.empty() || ref.times.size() < 2) {
    throw GridMismatch("need a sampled trajectory and a two-point reference");
  }
  if (a.times.front() < ref.times.front() - 1e-9 ||
      a.times.back() > ref.times.back() + 1e-9) {
    throw GridMismatch("reference does not cover the comparison time range");
  }
  double worst = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    const double t = a.times[i];
    while (j + 2 < ref.times.size() && ref.times[j + 1] < t) {
      ++j;
    }
    const double t0 = ref.times[j];
    const double t1 = ref.times[j + 1];
    double w = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
    w = std::clamp(w, 0.0, 1.0);
    const Vec interp = (1.0 - w) * ref.states[j] + w * ref.states[j + 1];
    worst = std::max(worst, (phi.map(a.states[i]) - phi.map(interp)).norm());
  }
  return worst;
}

EnergySeries energy_series(const Trajectory& traj,
                           const std::function<double(const Vec&)>& energy) {
  EnergySeries s;
  s.times = traj.times;
  if (energy) {
    s.values.reserve(traj.states.size());
    for (const auto& u : traj.states) {
      s.values.push_back(energy(u));
    }
  } else if (traj.energies.size() == traj.states.size() &&
             !traj.energies.empty()) {
    s.values = traj.energies;
  } else {
    throw Error("energy_series needs an energy function or recorded energies");
  }
  // Least-squares drift slope of the series.
  const auto n = s.values.size();
  if (n >= 2) {
    double mt = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mt += s.times[i];
      mv += s.values[i];
    }
    mt /= static_cast<double>(n);
    mv /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += (s.times[i] - mt) * (s.values[i] - mv);
      den += (s.times[i] - mt) * (s.times[i] - mt);
    }
    s.drift_slope = den > 0.0 ? num / den : 0.0;
  }
  return s;
}

Mat stiff_spring_energies(const Trajectory& traj, double omega) {
  if (traj.states.empty()) {
    throw Error("stiff_spring_energies needs a sampled trajectory");
  }
  const Eigen::Index n_dof = traj.states.front().size() / 2;
  if (n_dof < 2 || n_dof % 2 != 0) {
    throw Error("stiff spring energies need an even number of coordinates");
  }
  const Eigen::Index m = n_dof / 2;
  Mat out(static_cast<Eigen::Index>(traj.states.size()), m + 1);
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    const Vec& u = traj.states[s];
    double total = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double dq = u[2 * j + 1] - u[2 * j];
      const double dp = (u[n_dof + 2 * j + 1] - u[n_dof + 2 * j]) / std::sqrt(2.0);
      const double e = 0.5 * dp * dp + 0.25 * omega * omega * dq * dq;
      out(static_cast<Eigen::Index>(s), j) = e;
      total += e;
    }
    out(static_cast<Eigen::Index>(s), m) = total;
  }
  return out;
}

EnsembleStats ensemble_stats(const std::vector<Trajectory>& ensemble,
                             const SlowObservable& phi) {
  if (ensemble.empty()) {
    throw Error("ensemble_stats needs at least one trajectory");
  }
  const auto& base = ensemble.front().times;
  for (const auto& tr : ensemble) {
    if (tr.times.size() != base.size()) {
      throw GridMismatch("ensemble trajectories sample different grids");
    }
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (std::abs(tr.times[i] - base[i]) > 1e-12) {
        throw GridMismatch("ensemble trajectories sample different grids");
      }
    }
  }
  const auto n_s = static_cast<Eigen::Index>(base.size());
  const auto n_traj = static_cast<Eigen::Index>(ensemble.size());
  const Eigen::Index dim = phi.map(ensemble.front().states.front()).size();

  EnsembleStats st;
  st.times = base;
  st.mean = Mat::Zero(n_s, dim);
  st.var = Mat::Zero(n_s, dim);
  st.se = Mat::Zero(n_s, dim);
  st.autocorr = Mat::Zero(n_s, dim);
  st.autocorr_se = Mat::Zero(n_s, dim);

  std::vector<Vec> phi0;
  phi0.reserve(ensemble.size());
  for (const auto& tr : ensemble) {
    phi0.push_back(phi.map(tr.states.front()));
  }

  for (Eigen::Index s = 0; s < n_s; ++s) {
    Vec sum = Vec::Zero(dim), sumsq = Vec::Zero(dim);
    Vec csum = Vec::Zero(dim), csumsq = Vec::Zero(dim);
    for (Eigen::Index r = 0; r < n_traj; ++r) {
      const Vec v = phi.map(ensemble[static_cast<std::size_t>(r)]
                                .states[static_cast<std::size_t>(s)]);
      const Vec c = v.cwiseProduct(phi0[static_cast<std::size_t>(r)]);
      sum += v;
      sumsq += v.cwiseProduct(v);
      csum += c;
      csumsq += c.cwiseProduct(c);
    }
    const double n = static_cast<double>(n_traj);
    for (Eigen::Index d = 0; d < dim; ++d) {
      const double mean = sum[d] / n;
      st.mean(s, d) = mean;
      const double var =
          n > 1.0 ? std::max(0.0, (sumsq[d] - n * mean * mean) / (n - 1.0))
                  : 0.0;
      st.var(s, d) = var;
      st.se(s, d) = std::sqrt(var / n);
      const double cmean = csum[d] / n;
      st.autocorr(s, d) = cmean;
      const double cvar =
          n > 1.0 ? std::max(0.0, (csumsq[d] - n * cmean * cmean) / (n - 1.0))
                  : 0.0;
      st.autocorr_se(s, d) = std::sqrt(cvar / n);
    }
  }
  return st;
}

LogLogFit fit_loglog(const std::vector<double>& x,
                     const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error("fit_loglog needs matching samples, at least two");
  }
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw Error("fit_loglog needs strictly positive data");
    }
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = fit.intercept + fit.slope * lx[i];
    ss_res += (ly[i] - pred) * (ly[i] - pred);
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

}  // namespace flavor
