#include "flavor/problems.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace flavor {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec vec1(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

Mat materialize(const MassMatrix& mass) {
  const Eigen::Index n = mass.size();
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec e = Vec::Zero(n);
    e[i] = 1.0;
    m.col(i) = mass.apply(e);
  }
  return m;
}

/// Exact flow of the quadratic Hamiltonian p^T M^-1 p / 2 + q^T K q / 2,
/// via the generalized eigenproblem K v = lambda M v (modes are decoupled
/// oscillators; near-zero eigenvalues become free drifts).
std::function<void(Vec&, Vec&, double)> quadratic_flow(const MassMatrix& mass,
                                                       const Mat& k) {
  const Mat m = materialize(mass);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(k, m);
  if (ges.info() != Eigen::Success) {
    throw Error("quadratic flow: eigensolver failed");
  }
  const Mat v = ges.eigenvectors();  // V^T M V = I
  const Vec lam = ges.eigenvalues();
  const Mat to_modes = v.transpose() * m;  // a = V^T M q, b = V^T p
  const Mat from_momenta = m * v;          // p = M V b
  const double floor = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  return [v, lam, to_modes, from_momenta, floor](Vec& q, Vec& p, double t) {
    Vec a = to_modes * q;
    Vec b = v.transpose() * p;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (lam[i] > floor) {
        const double w = std::sqrt(lam[i]);
        const double c = std::cos(w * t);
        const double s = std::sin(w * t);
        const double ai = a[i];
        const double bi = b[i];
        a[i] = c * ai + (s / w) * bi;
        b[i] = -w * s * ai + c * bi;
      } else {
        a[i] += t * b[i];
      }
    }
    q = v * a;
    p = from_momenta * b;
  };
}

/// Alternating stiff/soft chain with m stiff pairs: stiff potential
/// U = (1/4) sum (q_{2j+1} - q_{2j})^2, soft potential coupling across
/// pairs, quartic by default and quadratic for the solvable variant.
Benchmark make_fpu(std::string name, std::string description, double omega,
                   Vec q0, double horizon, StepSchedule sched,
                   double reference_h, std::string reference_scheme,
                   bool harmonic) {
  const Eigen::Index n = q0.size();
  const Eigen::Index m = n / 2;
  const double eps = 1.0 / (omega * omega);

  Benchmark b;
  b.name = std::move(name);
  b.description = std::move(description);
  b.family = Family::Hamiltonian;
  b.omega = omega;
  b.default_horizon = horizon;
  b.default_schedule = sched;
  b.reference_h = reference_h;
  b.reference_scheme = std::move(reference_scheme);

  SeparatedHamiltonian ham;
  ham.n_dof = n;
  ham.mass = MassMatrix::identity(n);
  ham.epsilon = eps;
  ham.stiff_potential = [n, m](const Vec& q) {
    double u = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = q[2 * j + 1] - q[2 * j];
      u += 0.25 * d * d;
    }
    return u;
  };
  ham.stiff_gradient = [n, m](const Vec& q) {
    Vec g = Vec::Zero(n);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = q[2 * j + 1] - q[2 * j];
      g[2 * j] = -0.5 * d;
      g[2 * j + 1] = 0.5 * d;
    }
    return g;
  };
  if (harmonic) {
    ham.soft_potential = [n, m](const Vec& q) {
      double v = q[0] * q[0];
      for (Eigen::Index j = 1; j < m; ++j) {
        const double e = q[2 * j] - q[2 * j - 1];
        v += e * e;
      }
      v += q[n - 1] * q[n - 1];
      return v;
    };
    ham.soft_gradient = [n, m](const Vec& q) {
      Vec g = Vec::Zero(n);
      g[0] += 2.0 * q[0];
      for (Eigen::Index j = 1; j < m; ++j) {
        const double e = q[2 * j] - q[2 * j - 1];
        g[2 * j] += 2.0 * e;
        g[2 * j - 1] -= 2.0 * e;
      }
      g[n - 1] += 2.0 * q[n - 1];
      return g;
    };
  } else {
    ham.soft_potential = [n, m](const Vec& q) {
      double v = std::pow(q[0], 4);
      for (Eigen::Index j = 1; j < m; ++j) {
        const double e = q[2 * j] - q[2 * j - 1];
        v += std::pow(e, 4);
      }
      v += std::pow(q[n - 1], 4);
      return v;
    };
    ham.soft_gradient = [n, m](const Vec& q) {
      Vec g = Vec::Zero(n);
      g[0] += 4.0 * std::pow(q[0], 3);
      for (Eigen::Index j = 1; j < m; ++j) {
        const double e = q[2 * j] - q[2 * j - 1];
        const double f = 4.0 * std::pow(e, 3);
        g[2 * j] += f;
        g[2 * j - 1] -= f;
      }
      g[n - 1] += 4.0 * std::pow(q[n - 1], 3);
      return g;
    };
  }
  Mat k_stiff = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index i = 2 * j;
    k_stiff(i, i) += 0.5;
    k_stiff(i + 1, i + 1) += 0.5;
    k_stiff(i, i + 1) -= 0.5;
    k_stiff(i + 1, i) -= 0.5;
  }
  ham.stiff_flow = quadratic_flow(ham.mass, Mat(k_stiff / eps));

  b.u0 = Vec::Zero(2 * n);
  b.u0.head(n) = q0;

  if (harmonic) {
    Mat k_soft = Mat::Zero(n, n);
    k_soft(0, 0) += 2.0;
    for (Eigen::Index j = 1; j < m; ++j) {
      const Eigen::Index i = 2 * j;
      k_soft(i, i) += 2.0;
      k_soft(i - 1, i - 1) += 2.0;
      k_soft(i, i - 1) -= 2.0;
      k_soft(i - 1, i) -= 2.0;
    }
    k_soft(n - 1, n - 1) += 2.0;
    auto flow = quadratic_flow(ham.mass, Mat(k_soft + k_stiff / eps));
    b.exact_flow = [flow, n](const Vec& u, double t) {
      Vec q = u.head(n);
      Vec p = u.tail(n);
      flow(q, p, t);
      Vec out(2 * n);
      out << q, p;
      return out;
    };
  }
  b.ham = std::move(ham);

  b.slow_observables = {{"(q0+q1)/sqrt2", [](const Vec& u) {
                           return vec1((u[0] + u[1]) / std::sqrt(2.0));
                         }}};
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index i = 2 * j;
    b.fast_observables.push_back(
        {"q" + std::to_string(i + 1) + "-q" + std::to_string(i),
         [i](const Vec& u) { return vec1(u[i + 1] - u[i]); }});
  }

  Mat a = Mat::Zero(m, n);
  for (Eigen::Index j = 0; j < m; ++j) {
    a(j, 2 * j) = -1.0;
    a(j, 2 * j + 1) = 1.0;
  }
  b.constraint = ConstraintSpec::linear_freeze(a);

  // Reversing and negating the chain preserves both potentials.
  b.symmetry = [n](const Vec& u) {
    Vec out(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      out[i] = -u[n - 1 - i];
      out[n + i] = -u[2 * n - 1 - i];
    }
    return out;
  };
  return b;
}

}  // namespace

namespace detail {

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1);
  std::vector<int> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) {
    prev[j] = static_cast<int>(j);
  }
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

double Benchmark::epsilon() const {
  if (ham) {
    return ham->epsilon;
  }
  if (ode) {
    return ode->epsilon;
  }
  if (langevin) {
    return langevin->ham.epsilon;
  }
  if (forced) {
    return forced->ham.epsilon;
  }
  throw Error("benchmark '" + name + "' carries no system");
}

Benchmark linear_stability_problem(double omega) {
  if (omega < 0.0) {
    throw Error("linear-stability omega must be >= 0");
  }
  const bool stiff = omega > 0.0;
  const double eps = stiff ? 1.0 / (omega * omega) : 1.0;

  Benchmark b;
  b.name = "linear-stability";
  b.description =
      "Soft unit-frequency oscillator coupled to a stiff spring: the linear "
      "testbed behind the stability domains, transfer matrices, and "
      "step-size independence studies.";
  b.family = Family::Hamiltonian;
  b.omega = omega;

  SeparatedHamiltonian ham;
  ham.n_dof = 2;
  ham.mass = MassMatrix::identity(2);
  ham.epsilon = eps;
  ham.soft_potential = [](const Vec& q) { return 0.5 * q[0] * q[0]; };
  ham.soft_gradient = [](const Vec& q) {
    Vec g(2);
    g << q[0], 0.0;
    return g;
  };
  if (stiff) {
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
    ham.stiff_gradient = [](const Vec&) { return Vec(Vec::Zero(2)); };
  }
  Mat k_stiff = Mat::Zero(2, 2);
  if (stiff) {
    k_stiff << 1.0, -1.0, -1.0, 1.0;
    k_stiff /= eps;
  }
  ham.stiff_flow = quadratic_flow(ham.mass, k_stiff);

  Mat k_full = k_stiff;
  k_full(0, 0) += 1.0;
  auto flow = quadratic_flow(ham.mass, k_full);
  b.exact_flow = [flow](const Vec& u, double t) {
    Vec q = u.head(2);
    Vec p = u.tail(2);
    flow(q, p, t);
    Vec out(4);
    out << q, p;
    return out;
  };
  b.ham = std::move(ham);

  b.u0 = Vec(4);
  b.u0 << 0.8, 0.8 + (stiff ? 1.1 / omega : 1.1), 0.0, 0.0;
  b.default_horizon = 10.0;
  b.default_schedule =
      StepSchedule(std::min(0.1 * std::sqrt(eps), 0.01), 0.01);
  b.reference_h = stiff ? 0.05 / omega : 0.01;
  b.reference_scheme = "symplectic-euler";

  b.slow_observables = {
      {"(x+y)/2", [](const Vec& u) { return vec1(0.5 * (u[0] + u[1])); }}};
  b.fast_observables = {
      {"y-x", [](const Vec& u) { return vec1(u[1] - u[0]); }}};

  Mat a(1, 2);
  a << -1.0, 1.0;
  b.constraint = ConstraintSpec::linear_freeze(a);
  return b;
}

Benchmark triple_chain_problem(double epsilon) {
  const double eps = epsilon;
  const double k1 = 1.1;
  const double k2 = 0.97;

  Benchmark b;
  b.name = "triple-chain";
  b.description =
      "Three masses joined by two stiff harmonic springs, anchored by a "
      "quartic soft potential on the first; the convergence-rate testbed "
      "with slow variable (x+y+z)/3.";
  b.family = Family::Hamiltonian;
  b.omega = 1.0 / std::sqrt(eps);

  SeparatedHamiltonian ham;
  ham.n_dof = 3;
  ham.mass = MassMatrix::identity(3);
  ham.epsilon = eps;
  ham.soft_potential = [](const Vec& q) { return std::pow(q[0], 4); };
  ham.soft_gradient = [](const Vec& q) {
    Vec g(3);
    g << 4.0 * std::pow(q[0], 3), 0.0, 0.0;
    return g;
  };
  ham.stiff_potential = [k1, k2](const Vec& q) {
    const double d1 = q[1] - q[0];
    const double d2 = q[2] - q[1];
    return 0.5 * k1 * d1 * d1 + 0.5 * k2 * d2 * d2;
  };
  ham.stiff_gradient = [k1, k2](const Vec& q) {
    const double d1 = q[1] - q[0];
    const double d2 = q[2] - q[1];
    Vec g(3);
    g << -k1 * d1, k1 * d1 - k2 * d2, k2 * d2;
    return g;
  };
  Mat k(3, 3);
  k << k1, -k1, 0.0, -k1, k1 + k2, -k2, 0.0, -k2, k2;
  ham.stiff_flow = quadratic_flow(ham.mass, Mat(k / eps));
  b.ham = std::move(ham);

  b.u0 = Vec(6);
  b.u0 << 0.8, 0.811, 0.721, 0.0, 0.0, 0.0;
  b.default_horizon = 50.0;
  b.default_schedule = StepSchedule(5e-4, 0.01);
  b.reference_h = 5e-4;
  b.reference_scheme = "symplectic-euler";
  // The bundled schedule violates the switched composition's stability
  // hyperbola tau*delta*omega_max^2 <= 4 (omega_max^2 ~ 3.1/eps here), but is
  // fine for the constrained variational composition, whose stability window
  // does not depend on the stiffness. That is the scheme this system's
  // published runs use, so it is the default.
  b.default_stepper = "artificial";

  b.slow_observables = {{"(x+y+z)/3", [](const Vec& u) {
                           return vec1((u[0] + u[1] + u[2]) / 3.0);
                         }}};
  b.fast_observables = {
      {"y-x", [](const Vec& u) { return vec1(u[1] - u[0]); }},
      {"z-y", [](const Vec& u) { return vec1(u[2] - u[1]); }}};

  Mat a(2, 3);
  a << -1.0, 1.0, 0.0, 0.0, -1.0, 1.0;
  b.constraint = ConstraintSpec::linear_freeze(a);
  return b;
}

Benchmark nonlinear_stiff_soft_problem() {
  const double eps = 1e-6;

  Benchmark b;
  b.name = "stiff-soft";
  b.description =
      "Two degrees of freedom with a nonlinear stiff potential y^6 and a "
      "nonlinear soft coupling (x-y)^4; slow variable x. At y = 0 the stiff "
      "force vanishes but the soft coupling does not, so y stays put only "
      "for the trivial orbit.";
  b.family = Family::Hamiltonian;
  b.omega = 1.0 / std::sqrt(eps);

  SeparatedHamiltonian ham;
  ham.n_dof = 2;
  ham.mass = MassMatrix::identity(2);
  ham.epsilon = eps;
  ham.soft_potential = [](const Vec& q) {
    return std::pow(q[0] - q[1], 4);
  };
  ham.soft_gradient = [](const Vec& q) {
    const double f = 4.0 * std::pow(q[0] - q[1], 3);
    Vec g(2);
    g << f, -f;
    return g;
  };
  ham.stiff_potential = [](const Vec& q) { return std::pow(q[1], 6); };
  ham.stiff_gradient = [](const Vec& q) {
    Vec g(2);
    g << 0.0, 6.0 * std::pow(q[1], 5);
    return g;
  };
  b.ham = std::move(ham);

  b.u0 = Vec(4);
  b.u0 << 2.2, 1.1, 0.0, 0.0;
  b.default_horizon = 2.0;
  b.default_schedule = StepSchedule(1e-5, 1e-3);
  b.reference_h = 1e-5;
  b.reference_scheme = "symplectic-euler";

  b.slow_observables = {{"x", [](const Vec& u) { return vec1(u[0]); }}};
  b.fast_observables = {{"y", [](const Vec& u) { return vec1(u[1]); }}};

  Mat a(1, 2);
  a << 0.0, 1.0;
  b.constraint = ConstraintSpec::linear_freeze(a);
  return b;
}

Benchmark fpu_short_problem() {
  Vec q0(6);
  q0 << 0.4642, -0.4202, 0.0344, 0.1371, 0.0626, 0.0810;
  return make_fpu(
      "fpu-short",
      "Fermi-Pasta-Ulam chain of three stiff pairs with quartic soft "
      "springs, short horizon: the slow pair coordinate oscillates while "
      "total stiff energy stays flat.",
      1000.0, q0, 2000.0, StepSchedule(1e-4, 0.002), 5e-5, "symplectic-euler",
      false);
}

Benchmark fpu_long_problem() {
  const double omega = 200.0;
  Vec q0(6);
  q0 << 1.0, 0.0, 0.0, 1.0 / omega, 0.0, 0.0;
  return make_fpu(
      "fpu-long",
      "Fermi-Pasta-Ulam chain over the energy-exchange horizon T = "
      "omega^2/4: stiff springs trade energy through the quartic coupling.",
      omega, q0, omega * omega / 4.0, StepSchedule(5e-4, 0.002), 1e-5,
      "velocity-verlet", false);
}

Benchmark fpu_harmonic_problem() {
  Vec q0(6);
  q0 << 0.4642, -0.4202, 0.0344, 0.1371, 0.0626, 0.0810;
  return make_fpu(
      "fpu-harmonic",
      "Fully harmonic variant of the alternating chain (quadratic soft "
      "springs in the same topology): analytically solvable, with a "
      "closed-form normal-mode beat period for the stiff energy exchange.",
      50.0, q0, 2000.0, StepSchedule(0.002, 0.01), 1e-4, "symplectic-euler",
      true);
}

Benchmark van_der_pol_problem() {
  const double eps = 1e-3;

  Benchmark b;
  b.name = "van-der-pol";
  b.description =
      "Van der Pol relaxation oscillator in stiff form, x' = -eps y, "
      "y' = (1/eps)(x + y - y^3/3); the alternate form is the same dynamics "
      "in polar coordinates where slow and fast variables are entangled. "
      "The Cartesian origin is a stationary point (r = 0 has no phase).";
  b.family = Family::Ode;
  b.omega = 1.0 / eps;

  ParametricSystem sys;
  sys.dim = 2;
  sys.epsilon = eps;
  sys.time_dependent = false;
  sys.drift = [](const Vec& u, double alpha, double eps_, double) {
    Vec d(2);
    d << -eps_ * u[1], alpha * (u[0] + u[1] - std::pow(u[1], 3) / 3.0);
    return d;
  };
  b.ode = std::move(sys);

  b.u0 = Vec(2);
  b.u0 << 1.0, 1.0;
  b.default_horizon = 5.0 / eps;
  b.default_schedule = StepSchedule(5e-5, 0.01);
  b.reference_h = 5e-5;
  b.reference_scheme = "forward-euler";

  b.slow_observables = {{"x", [](const Vec& u) { return vec1(u[0]); }}};
  b.fast_observables = {{"y", [](const Vec& u) { return vec1(u[1]); }}};

  // Polar form of the same vector field under x = r sin(theta),
  // y = r cos(theta); state (r, theta).
  ParametricSystem polar;
  polar.dim = 2;
  polar.epsilon = eps;
  polar.time_dependent = false;
  polar.drift = [](const Vec& u, double alpha, double eps_, double) {
    const double r = u[0];
    const double c = std::cos(u[1]);
    const double s = std::sin(u[1]);
    Vec d(2);
    d[0] = alpha * (r * c + r * s - std::pow(r, 3) * std::pow(c, 3) / 3.0) *
               c -
           eps_ * r * c * s;
    d[1] = -eps_ * c * c -
           alpha * (c + s - r * r * std::pow(c, 3) / 3.0) * s;
    return d;
  };
  b.alt_form = std::move(polar);
  b.alt_u0 = Vec(2);
  b.alt_u0 << std::sqrt(2.0), kPi / 4.0;
  b.alt_slow_observables = {
      {"x", [](const Vec& u) { return vec1(u[0] * std::sin(u[1])); }}};
  return b;
}

Benchmark primitive_md_problem() {
  const double omega = 500.0;
  const double eps = 1.0 / (omega * omega);

  Benchmark b;
  b.name = "primitive-md";
  b.description =
      "Planar particle tethered to a fixed hinge by a stiff radial spring "
      "(rest length 1) under the soft angular potential x^2/r^2; the slow "
      "variable is the polar angle. The hinge itself (x = y = 0) is a "
      "singular state and every potential callback rejects it.";
  b.family = Family::Hamiltonian;
  b.omega = omega;

  auto check = [](double r2) {
    if (!(r2 > 0.0)) {
      throw Error("primitive-md potential is singular at the hinge x = y = 0");
    }
  };

  SeparatedHamiltonian ham;
  ham.n_dof = 2;
  ham.mass = MassMatrix::identity(2);
  ham.epsilon = eps;
  ham.soft_potential = [check](const Vec& q) {
    const double r2 = q.squaredNorm();
    check(r2);
    return q[0] * q[0] / r2;
  };
  ham.soft_gradient = [check](const Vec& q) {
    const double r2 = q.squaredNorm();
    check(r2);
    const double r4 = r2 * r2;
    Vec g(2);
    g << 2.0 * q[0] * q[1] * q[1] / r4, -2.0 * q[0] * q[0] * q[1] / r4;
    return g;
  };
  ham.stiff_potential = [check](const Vec& q) {
    const double r2 = q.squaredNorm();
    check(r2);
    const double d = std::sqrt(r2) - 1.0;
    return 0.5 * d * d;
  };
  ham.stiff_gradient = [check](const Vec& q) {
    const double r2 = q.squaredNorm();
    check(r2);
    const double r = std::sqrt(r2);
    return Vec(((r - 1.0) / r) * q);
  };
  b.ham = std::move(ham);

  b.u0 = Vec(4);
  b.u0 << 1.1, 0.8, 0.0, 0.0;
  b.default_horizon = 100.0;
  b.default_schedule = StepSchedule(2e-4, 0.01);
  b.reference_h = 2e-4;
  b.reference_scheme = "symplectic-euler";

  b.slow_observables = {
      {"angle", [](const Vec& u) { return vec1(std::atan2(u[1], u[0])); }}};
  b.fast_observables = {
      {"r", [](const Vec& u) { return vec1(u.head(2).norm()); }}};

  // Freeze the radial direction: P = I - a a^T with a the unit radial
  // vector (unit masses).
  b.constraint = ConstraintSpec::custom([](const Vec& q) {
    const double r2 = q.squaredNorm();
    if (!(r2 > 0.0)) {
      throw ConstraintRankDeficient(
          "primitive-md radial direction is undefined at the hinge");
    }
    const Vec a = q / std::sqrt(r2);
    return Mat(Mat::Identity(2, 2) - a * a.transpose());
  });
  return b;
}

Benchmark propane_problem() {
  const double k_bond = 8370.0;
  const double k_angle = 4.31;
  const double r0 = 1.53;
  const double cos0 = std::cos(109.5 * kPi / 180.0);
  const double eps = 1.0 / k_bond;

  Benchmark b;
  b.name = "propane";
  b.description =
      "United-atom propane in the plane: two stiff harmonic bonds "
      "(constant 8370, rest length 1.53) and a soft harmonic bending "
      "potential in cos(theta) around 109.5 degrees, masses 15/14/15. "
      "Coordinates interleave as (x1, y1, x2, y2, x3, y3).";
  b.family = Family::Hamiltonian;
  b.omega = std::sqrt(k_bond);

  auto geometry = [](const Vec& q, Eigen::Vector2d& b1, Eigen::Vector2d& b2,
                     double& r1, double& r2) {
    b1 << q[0] - q[2], q[1] - q[3];
    b2 << q[4] - q[2], q[5] - q[3];
    r1 = b1.norm();
    r2 = b2.norm();
    if (!(r1 > 0.0) || !(r2 > 0.0)) {
      throw Error("propane angle is undefined when atoms coincide");
    }
  };

  SeparatedHamiltonian ham;
  ham.n_dof = 6;
  Vec masses(6);
  masses << 15.0, 15.0, 14.0, 14.0, 15.0, 15.0;
  ham.mass = MassMatrix::diagonal(masses);
  ham.epsilon = eps;
  ham.soft_potential = [geometry, k_angle, cos0](const Vec& q) {
    Eigen::Vector2d b1;
    Eigen::Vector2d b2;
    double r1 = 0.0;
    double r2 = 0.0;
    geometry(q, b1, b2, r1, r2);
    const double ct = b1.dot(b2) / (r1 * r2);
    return 0.5 * k_angle * (ct - cos0) * (ct - cos0);
  };
  ham.soft_gradient = [geometry, k_angle, cos0](const Vec& q) {
    Eigen::Vector2d b1;
    Eigen::Vector2d b2;
    double r1 = 0.0;
    double r2 = 0.0;
    geometry(q, b1, b2, r1, r2);
    const double ct = b1.dot(b2) / (r1 * r2);
    const Eigen::Vector2d d1 = b2 / (r1 * r2) - (ct / (r1 * r1)) * b1;
    const Eigen::Vector2d d3 = b1 / (r1 * r2) - (ct / (r2 * r2)) * b2;
    const double s = k_angle * (ct - cos0);
    Vec g(6);
    g << s * d1[0], s * d1[1], -s * (d1[0] + d3[0]), -s * (d1[1] + d3[1]),
        s * d3[0], s * d3[1];
    return g;
  };
  ham.stiff_potential = [geometry, r0](const Vec& q) {
    Eigen::Vector2d b1;
    Eigen::Vector2d b2;
    double r1 = 0.0;
    double r2 = 0.0;
    geometry(q, b1, b2, r1, r2);
    return 0.5 * ((r1 - r0) * (r1 - r0) + (r2 - r0) * (r2 - r0));
  };
  ham.stiff_gradient = [geometry, r0](const Vec& q) {
    Eigen::Vector2d b1;
    Eigen::Vector2d b2;
    double r1 = 0.0;
    double r2 = 0.0;
    geometry(q, b1, b2, r1, r2);
    const Eigen::Vector2d d1 = ((r1 - r0) / r1) * b1;
    const Eigen::Vector2d d3 = ((r2 - r0) / r2) * b2;
    Vec g(6);
    g << d1[0], d1[1], -(d1[0] + d3[0]), -(d1[1] + d3[1]), d3[0], d3[1];
    return g;
  };
  b.ham = ham;

  b.u0 = Vec(12);
  b.u0 << 0.0, 0.0, 1.533, 0.0, 2.6136, 1.0826, -0.4326, -1.6656, 0.1253,
      0.2877, -1.1465, 1.1909;
  b.default_horizon = 100.0;
  b.default_schedule = StepSchedule(0.01, 0.1);
  b.reference_h = 0.01;
  b.reference_scheme = "symplectic-euler";

  b.slow_observables = {{"angle", [geometry](const Vec& u) {
                           Eigen::Vector2d b1;
                           Eigen::Vector2d b2;
                           double r1 = 0.0;
                           double r2 = 0.0;
                           geometry(u.head(6), b1, b2, r1, r2);
                           const double ct = std::clamp(
                               b1.dot(b2) / (r1 * r2), -1.0, 1.0);
                           return vec1(std::acos(ct));
                         }}};
  b.fast_observables = {
      {"r1",
       [geometry](const Vec& u) {
         Eigen::Vector2d b1;
         Eigen::Vector2d b2;
         double r1 = 0.0;
         double r2 = 0.0;
         geometry(u.head(6), b1, b2, r1, r2);
         return vec1(r1);
       }},
      {"r2", [geometry](const Vec& u) {
         Eigen::Vector2d b1;
         Eigen::Vector2d b2;
         double r1 = 0.0;
         double r2 = 0.0;
         geometry(u.head(6), b1, b2, r1, r2);
         return vec1(r2);
       }}};

  // Freeze the two bond lengths: rows of A are the gradients of r1, r2.
  Vec minv = masses.cwiseInverse();
  b.constraint = ConstraintSpec::custom([geometry, minv](const Vec& q) {
    Eigen::Vector2d b1;
    Eigen::Vector2d b2;
    double r1 = 0.0;
    double r2 = 0.0;
    geometry(q, b1, b2, r1, r2);
    Mat a = Mat::Zero(2, 6);
    a.row(0) << b1[0] / r1, b1[1] / r1, -b1[0] / r1, -b1[1] / r1, 0.0, 0.0;
    a.row(1) << 0.0, 0.0, -b2[0] / r2, -b2[1] / r2, b2[0] / r2, b2[1] / r2;
    const Mat gram = a * minv.asDiagonal() * a.transpose();
    Eigen::FullPivLU<Mat> lu(gram);
    if (!lu.isInvertible()) {
      throw ConstraintRankDeficient("propane bond directions are degenerate");
    }
    return Mat(Mat::Identity(6, 6) -
               minv.asDiagonal() * a.transpose() * lu.inverse() * a);
  });
  return b;
}

Benchmark kapitza_problem() {
  const double g = 9.8;
  const double l = 9.0;
  const double omega = 1000.0;

  Benchmark b;
  b.name = "kapitza";
  b.description =
      "Inverted pendulum whose pivot vibrates vertically at frequency "
      "omega: l theta'' = [g + omega^2 sin(2 pi omega t)] sin(theta). The "
      "fast forcing stabilizes the upright equilibrium; with the forcing "
      "amplitude set to zero the upright state is unstable.";
  b.family = Family::Forced;
  b.omega = omega;

  ForcedHamiltonian fh;
  fh.ham.n_dof = 1;
  fh.ham.mass = MassMatrix::diagonal(vec1(l));
  fh.ham.epsilon = 1.0 / (omega * omega);
  fh.ham.soft_potential = [g](const Vec& q) { return g * std::cos(q[0]); };
  fh.ham.soft_gradient = [g](const Vec& q) {
    return vec1(-g * std::sin(q[0]));
  };
  fh.ham.stiff_potential = [](const Vec&) { return 0.0; };
  fh.ham.stiff_gradient = [](const Vec&) { return Vec(Vec::Zero(1)); };
  fh.fast_force = [g, omega](const Vec& q, double t) {
    return vec1(omega * omega * std::sin(2.0 * kPi * omega * t) *
                std::sin(q[0]));
  };
  b.ham = fh.ham;
  b.forced = std::move(fh);

  b.u0 = Vec(2);
  b.u0 << 0.2, 0.0;
  b.default_horizon = 10.0;
  b.default_schedule = StepSchedule(0.2 / (omega * std::sqrt(l)), 0.002);
  b.reference_h = 0.2 / (omega * std::sqrt(l));
  b.reference_scheme = "forced";

  b.slow_observables = {{"theta", [](const Vec& u) { return vec1(u[0]); }}};
  b.fast_observables = {{"p", [](const Vec& u) { return vec1(u[1]); }}};
  return b;
}

Benchmark hidden_sde_problem() {
  const double eps = 1e-4;
  const double c = 10.0;

  Benchmark b;
  b.name = "hidden-sde";
  b.description =
      "Nonautonomous SDE pair (u, v) hiding a slow variable x = "
      "((u+v)/2)^3 + c and a fast variable y = (v-u)/2 behind a cube-root "
      "change of coordinates; both equations share one Brownian increment "
      "per step. The alternate form is the separated (x, y) system.";
  b.family = Family::Sde;
  b.omega = 1.0 / std::sqrt(eps);

  ParametricSystem sys;
  sys.dim = 2;
  sys.epsilon = eps;
  sys.time_dependent = true;
  sys.drift = [c](const Vec& u, double alpha, double, double t) {
    const double sum = u[0] + u[1];
    const double w = 0.5 * sum;
    const double y = 0.5 * (u[1] - u[0]);
    const double slow = (4.0 / (3.0 * sum * sum)) *
                        (-0.5 * y * y + 5.0 * std::sin(2.0 * kPi * t));
    const double stiff = alpha * (w * w * w + c - y);
    Vec d(2);
    d << slow - stiff, slow + stiff;
    return d;
  };
  sys.diffusion = [](const Vec&, double alpha, double, double) {
    const double a = std::sqrt(2.0 * alpha);
    Mat s(2, 1);
    s << -a, a;
    return s;
  };
  b.ode = std::move(sys);

  const double w0 = std::cbrt(1.0 + eps - c);
  b.u0 = Vec(2);
  b.u0 << w0 - 1.0, w0 + 1.0;
  b.default_horizon = 2.0;
  // Matching tau to the reference step keeps both integrators sampling the
  // same discrete fast-relaxation law at alpha*h = 1; a smaller tau changes
  // the fast stationary variance the slow drift feels.
  b.default_schedule = StepSchedule(1e-4, 0.01);
  b.reference_h = 1e-4;
  b.reference_scheme = "euler-maruyama";
  b.default_ensemble = 100;

  b.slow_observables = {{"x", [c](const Vec& u) {
                           const double w = 0.5 * (u[0] + u[1]);
                           return vec1(w * w * w + c);
                         }}};
  b.fast_observables = {
      {"y", [](const Vec& u) { return vec1(0.5 * (u[1] - u[0])); }}};

  ParametricSystem sep;
  sep.dim = 2;
  sep.epsilon = eps;
  sep.time_dependent = true;
  sep.drift = [](const Vec& u, double alpha, double, double) {
    Vec d(2);
    d << -0.5 * u[1] * u[1], alpha * (u[0] - u[1]);
    return d;
  };
  sep.diffusion = [](const Vec&, double alpha, double, double t) {
    Mat s(2, 1);
    s << 5.0 * std::sin(2.0 * kPi * t), std::sqrt(2.0 * alpha);
    return s;
  };
  b.alt_form = std::move(sep);
  b.alt_u0 = Vec(2);
  b.alt_u0 << 1.0 + eps, 1.0;
  b.alt_slow_observables = {
      {"x", [](const Vec& u) { return vec1(u[0]); }}};
  return b;
}

Benchmark langevin_slow_problem() {
  const double eps = 1e-8;
  const double c = 0.1;
  const double sigma = 0.5;

  Benchmark b;
  b.name = "langevin-slow";
  b.description =
      "Two quartic springs (one stiff, one soft) with friction and noise on "
      "both momenta at order one; state (y, x, p_y, p_x) with slow variable "
      "x - y.";
  b.family = Family::Langevin;
  b.omega = 1.0 / std::sqrt(eps);

  SeparatedHamiltonian ham;
  ham.n_dof = 2;
  ham.mass = MassMatrix::identity(2);
  ham.epsilon = eps;
  ham.soft_potential = [](const Vec& q) {
    return std::pow(q[0] - q[1], 4);
  };
  ham.soft_gradient = [](const Vec& q) {
    const double f = 4.0 * std::pow(q[0] - q[1], 3);
    Vec g(2);
    g << f, -f;
    return g;
  };
  ham.stiff_potential = [](const Vec& q) {
    return 0.25 * std::pow(q[0], 4);
  };
  ham.stiff_gradient = [](const Vec& q) {
    Vec g(2);
    g << std::pow(q[0], 3), 0.0;
    return g;
  };

  LangevinSystem ls;
  ls.ham = std::move(ham);
  ls.friction = Vec(2);
  ls.friction << c, c;
  ls.beta = 2.0 * c / (sigma * sigma);
  ls.placement = NoisePlacement::Slow;
  b.langevin = std::move(ls);

  const double y0 = 2.1 * std::sqrt(eps);
  b.u0 = Vec(4);
  b.u0 << y0, y0 + 1.8, 0.0, 0.0;
  b.default_horizon = 30.0;
  // At tau = 1e-3 the thermalized fast momentum kicks y past the separatrix
  // of the quartic stiff well within a few hundred mesosteps and most sample
  // paths diverge; tau = 1e-4 keeps the whole default ensemble finite while
  // preserving the published friction, noise, horizon, and mesostep.
  b.default_schedule = StepSchedule(1e-4, 0.01);
  b.reference_h = 1e-3;
  b.reference_scheme = "gla";
  b.default_ensemble = 100;

  b.slow_observables = {
      {"x-y", [](const Vec& u) { return vec1(u[1] - u[0]); }}};
  b.fast_observables = {{"y", [](const Vec& u) { return vec1(u[0]); }}};
  return b;
}

Benchmark langevin_fast_problem() {
  const double omega = 100.0;
  const double eps = 1.0 / (omega * omega);
  const double c = 0.1;
  const double sigma = 1.0;

  Benchmark b;
  b.name = "langevin-fast";
  b.description =
      "Stiff quartic spring whose soft partner oscillates at a frequency "
      "set by e^y, with friction and noise of order omega^2 on the light "
      "momentum only; state (y, x, p_y, p_x) with slow variable x - y.";
  b.family = Family::Langevin;
  b.omega = omega;

  SeparatedHamiltonian ham;
  ham.n_dof = 2;
  ham.mass = MassMatrix::identity(2);
  ham.epsilon = eps;
  ham.soft_potential = [](const Vec& q) {
    const double d = q[1] - q[0];
    return std::exp(q[0]) * d * d;
  };
  ham.soft_gradient = [](const Vec& q) {
    const double d = q[1] - q[0];
    const double e = std::exp(q[0]);
    Vec g(2);
    g << e * d * (d - 2.0), 2.0 * e * d;
    return g;
  };
  ham.stiff_potential = [omega](const Vec& q) {
    return 0.25 * omega * omega * std::pow(q[0], 4);
  };
  ham.stiff_gradient = [omega](const Vec& q) {
    Vec g(2);
    g << omega * omega * std::pow(q[0], 3), 0.0;
    return g;
  };

  LangevinSystem ls;
  ls.ham = std::move(ham);
  ls.friction = Vec(2);
  ls.friction << c, 0.0;
  ls.beta = 2.0 * c / (sigma * sigma);
  ls.placement = NoisePlacement::Fast;
  b.langevin = std::move(ls);

  const double y0 = 1.1 / omega;
  b.u0 = Vec(4);
  b.u0 << y0, y0 + 1.8, 0.0, 0.0;
  b.default_horizon = 10.0;
  // With delta = 1e-2 the soft drift between stiff bursts carries y far
  // enough out of the quartic well that roughly a third of the sample paths
  // diverge; delta = 2e-3 keeps the whole default ensemble finite while
  // preserving the published friction, noise, horizon, and microstep.
  b.default_schedule = StepSchedule(1e-4, 2e-3);
  b.reference_h = 1e-4;
  b.reference_scheme = "gla";
  b.default_ensemble = 50;

  b.slow_observables = {
      {"x-y", [](const Vec& u) { return vec1(u[1] - u[0]); }}};
  b.fast_observables = {{"y", [](const Vec& u) { return vec1(u[0]); }}};
  return b;
}

std::vector<std::string> benchmark_names() {
  return {"linear-stability", "triple-chain", "stiff-soft",
          "fpu-short",        "fpu-long",     "fpu-harmonic",
          "van-der-pol",      "primitive-md", "propane",
          "kapitza",          "hidden-sde",   "langevin-slow",
          "langevin-fast"};
}

Benchmark make_benchmark(const std::string& name) {
  static const std::vector<std::pair<std::string, Benchmark (*)()>> registry =
      {{"linear-stability", [] { return linear_stability_problem(1000.0); }},
       {"triple-chain", [] { return triple_chain_problem(1e-6); }},
       {"stiff-soft", nonlinear_stiff_soft_problem},
       {"fpu-short", fpu_short_problem},
       {"fpu-long", fpu_long_problem},
       {"fpu-harmonic", fpu_harmonic_problem},
       {"van-der-pol", van_der_pol_problem},
       {"primitive-md", primitive_md_problem},
       {"propane", propane_problem},
       {"kapitza", kapitza_problem},
       {"hidden-sde", hidden_sde_problem},
       {"langevin-slow", langevin_slow_problem},
       {"langevin-fast", langevin_fast_problem}};
  for (const auto& [key, make] : registry) {
    if (key == name) {
      return make();
    }
  }
  std::string best;
  int best_distance = std::numeric_limits<int>::max();
  for (const auto& [key, make] : registry) {
    const int d = detail::edit_distance(name, key);
    if (d < best_distance) {
      best_distance = d;
      best = key;
    }
  }
  throw UnknownName(
      "unknown benchmark '" + name + "'; closest match is '" + best + "'",
      best);
}

}  // namespace flavor
