#include "flavor/legacy.hpp"

#include <cmath>
#include <utility>

namespace flavor {

namespace {

// Soft force plus alpha-scaled stiff force at q.  The alpha == 0 branch must
// not touch the stiff gradient at all: switched-off substeps have to be
// bitwise equal to a soft-only integrator, and work counters rely on the
// stiff part never being evaluated there.
Vec hamiltonian_force(const SeparatedHamiltonian& ham, const Vec& q,
                      double alpha) {
  Vec f = ham.soft_gradient(q);
  if (alpha != 0.0) {
    f += alpha * ham.stiff_gradient(q);
  }
  return f;
}

}  // namespace

OneStepMap forward_euler(StiffSplitSystem sys) {
  OneStepMap m;
  m.apply = [sys = std::move(sys)](Vec& u, double h, double alpha, double) {
    if (h == 0.0) {
      return;
    }
    Vec drift = sys.soft_drift(u);
    if (alpha != 0.0) {
      drift += alpha * sys.stiff_drift(u);
    }
    u += h * drift;
  };
  return m;
}

OneStepMap forward_euler(ParametricSystem sys) {
  OneStepMap m;
  m.apply = [sys = std::move(sys)](Vec& u, double h, double alpha, double t) {
    if (h == 0.0) {
      return;
    }
    u += h * sys.drift(u, alpha, sys.epsilon, t);
  };
  return m;
}

OneStepMap symplectic_euler_adjoint(SeparatedHamiltonian ham) {
  OneStepMap m;
  m.apply = [ham = std::move(ham)](Vec& u, double h, double alpha, double) {
    if (h == 0.0) {
      return;
    }
    const auto n = ham.n_dof;
    Vec q = u.head(n);
    Vec p = u.tail(n);
    q += h * ham.mass.apply_inverse(p);
    p -= h * hamiltonian_force(ham, q, alpha);
    u.head(n) = q;
    u.tail(n) = p;
  };
  return m;
}

OneStepMap symplectic_euler(SeparatedHamiltonian ham) {
  OneStepMap m;
  m.adjoint = std::make_shared<OneStepMap>(symplectic_euler_adjoint(ham));
  m.adjoint_available = true;
  m.apply = [ham = std::move(ham)](Vec& u, double h, double alpha, double) {
    if (h == 0.0) {
      return;
    }
    const auto n = ham.n_dof;
    Vec q = u.head(n);
    Vec p = u.tail(n);
    p -= h * hamiltonian_force(ham, q, alpha);
    q += h * ham.mass.apply_inverse(p);
    u.head(n) = q;
    u.tail(n) = p;
  };
  return m;
}

OneStepMap velocity_verlet(SeparatedHamiltonian ham) {
  OneStepMap m;
  m.apply = [ham](Vec& u, double h, double alpha, double) {
    if (h == 0.0) {
      return;
    }
    const auto n = ham.n_dof;
    Vec q = u.head(n);
    Vec p = u.tail(n);
    p -= 0.5 * h * hamiltonian_force(ham, q, alpha);
    q += h * ham.mass.apply_inverse(p);
    p -= 0.5 * h * hamiltonian_force(ham, q, alpha);
    u.head(n) = q;
    u.tail(n) = p;
  };
  m.adjoint = std::make_shared<OneStepMap>();
  m.adjoint->apply = m.apply;  // self-adjoint
  m.adjoint_available = true;
  return m;
}

StochasticOneStepMap euler_maruyama(SdeSplitSystem sys) {
  const bool has_noise = sys.soft_diffusion != nullptr ||
                         sys.stiff_diffusion != nullptr;
  StochasticOneStepMap m;
  m.apply = [sys = std::move(sys), has_noise](Vec& u, double h, double alpha,
                                              double, rng::GaussianSource& g) {
    if (h == 0.0) {
      return;
    }
    Vec drift = sys.soft_drift(u);
    if (alpha != 0.0) {
      drift += alpha * sys.stiff_drift(u);
    }
    if (!has_noise) {
      u += h * drift;
      return;
    }
    Vec xi(u.size());
    g.fill(xi);
    Vec noise = Vec::Zero(u.size());
    if (sys.soft_diffusion) {
      noise += sys.soft_diffusion(u) * xi;
    }
    if (sys.stiff_diffusion && alpha != 0.0) {
      noise += std::sqrt(alpha) * (sys.stiff_diffusion(u) * xi);
    }
    u += h * drift + std::sqrt(h) * noise;
  };
  return m;
}

StochasticOneStepMap euler_maruyama(ParametricSystem sys) {
  if (!sys.diffusion) {
    throw Error("euler_maruyama(ParametricSystem) needs a diffusion field");
  }
  StochasticOneStepMap m;
  m.apply = [sys = std::move(sys)](Vec& u, double h, double alpha, double t,
                                   rng::GaussianSource& g) {
    if (h == 0.0) {
      return;
    }
    const Mat noise = sys.diffusion(u, alpha, sys.epsilon, t);
    Vec xi(noise.cols());
    g.fill(xi);
    u += h * sys.drift(u, alpha, sys.epsilon, t) + std::sqrt(h) * (noise * xi);
  };
  return m;
}

StochasticOneStepMap ou_exact_flow(Vec friction_diag, double stationary_var) {
  if ((friction_diag.array() < 0.0).any()) {
    throw Error("ou_exact_flow friction entries must be >= 0");
  }
  if (stationary_var < 0.0) {
    throw Error("ou_exact_flow stationary variance must be >= 0");
  }
  StochasticOneStepMap m;
  m.apply = [c = std::move(friction_diag), v = stationary_var](
                Vec& u, double h, double alpha, double,
                rng::GaussianSource& g) {
    if (h == 0.0) {
      return;
    }
    Eigen::Index n_pos = 0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      n_pos += c[i] > 0.0 ? 1 : 0;
    }
    Vec xi(n_pos);
    if (n_pos > 0) {
      g.fill(xi);
    }
    if (alpha == 0.0) {
      return;  // rate alpha*c vanishes: identity flow (draws already taken)
    }
    const Eigen::Index n = u.size() / 2;
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (c[i] <= 0.0) {
        continue;
      }
      const double decay = std::exp(-alpha * c[i] * h);
      u[n + i] = decay * u[n + i] +
                 std::sqrt(v * (1.0 - decay * decay)) * xi[k++];
    }
  };
  return m;
}

StochasticOneStepMap ou_exact_flow(Mat friction_sym, double stationary_var) {
  if (friction_sym.rows() != friction_sym.cols() ||
      !friction_sym.isApprox(friction_sym.transpose(), 1e-12)) {
    throw Error("ou_exact_flow friction matrix must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(friction_sym);
  if ((eig.eigenvalues().array() < -1e-12).any()) {
    throw Error("ou_exact_flow friction matrix must be positive semidefinite");
  }
  if (stationary_var < 0.0) {
    throw Error("ou_exact_flow stationary variance must be >= 0");
  }
  StochasticOneStepMap m;
  m.apply = [q_rot = Mat(eig.eigenvectors()), lam = Vec(eig.eigenvalues()),
             v = stationary_var](Vec& u, double h, double alpha, double,
                                 rng::GaussianSource& g) {
    if (h == 0.0) {
      return;
    }
    Eigen::Index n_pos = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      n_pos += lam[i] > 0.0 ? 1 : 0;
    }
    Vec xi(n_pos);
    if (n_pos > 0) {
      g.fill(xi);
    }
    if (alpha == 0.0) {
      return;
    }
    const Eigen::Index n = u.size() / 2;
    Vec p_modes = q_rot.transpose() * u.tail(n);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      if (lam[i] <= 0.0) {
        continue;
      }
      const double decay = std::exp(-alpha * lam[i] * h);
      p_modes[i] = decay * p_modes[i] +
                   std::sqrt(v * (1.0 - decay * decay)) * xi[k++];
    }
    u.tail(n) = q_rot * p_modes;
  };
  return m;
}

StochasticOneStepMap gla_step(LangevinSystem sys) {
  if (!(sys.beta > 0.0)) {
    throw Error("gla_step needs beta > 0");
  }
  StochasticOneStepMap m;
  m.apply = [ou = ou_exact_flow(sys.friction, 1.0 / sys.beta),
             se = symplectic_euler(sys.ham), slow = sys.placement ==
                                                    NoisePlacement::Slow](
                Vec& u, double h, double alpha, double t,
                rng::GaussianSource& g) {
    if (h == 0.0) {
      return;
    }
    ou.apply(u, h, slow ? 1.0 : alpha, t, g);
    se.apply(u, h, alpha, t);
  };
  return m;
}

OneStepMap impulse_method(SeparatedHamiltonian ham, FastFlowKind fast_flow,
                          int numeric_substeps) {
  if (fast_flow == FastFlowKind::Exact && !ham.stiff_flow) {
    throw NoStiffFlow("impulse method asked for the exact fast flow, but the "
                      "Hamiltonian registers none");
  }
  if (numeric_substeps < 1) {
    throw Error("impulse method needs at least one numeric substep");
  }
  OneStepMap m;
  m.apply = [ham = std::move(ham), fast_flow, numeric_substeps](
                Vec& u, double h, double alpha, double) {
    if (h == 0.0) {
      return;
    }
    const auto n = ham.n_dof;
    Vec q = u.head(n);
    Vec p = u.tail(n);
    p -= 0.5 * h * ham.soft_gradient(q);
    if (alpha == 0.0) {
      q += h * ham.mass.apply_inverse(p);
    } else if (fast_flow == FastFlowKind::Exact) {
      if (alpha != 1.0 / ham.epsilon) {
        throw NoStiffFlow(
            "registered fast flow only covers the full stiff coefficient");
      }
      ham.stiff_flow(q, p, h);
    } else {
      const double sub = h / numeric_substeps;
      for (int i = 0; i < numeric_substeps; ++i) {
        p -= 0.5 * sub * alpha * ham.stiff_gradient(q);
        q += sub * ham.mass.apply_inverse(p);
        p -= 0.5 * sub * alpha * ham.stiff_gradient(q);
      }
    }
    p -= 0.5 * h * ham.soft_gradient(q);
    u.head(n) = q;
    u.tail(n) = p;
  };
  return m;
}

}  // namespace flavor
