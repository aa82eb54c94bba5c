#include "flavor/types.hpp"

#include <cmath>

namespace flavor {

MassMatrix MassMatrix::identity(Eigen::Index n) {
  MassMatrix m;
  m.kind_ = Kind::Identity;
  m.n_ = n;
  return m;
}

MassMatrix MassMatrix::diagonal(Vec d) {
  if ((d.array() <= 0.0).any()) {
    throw NotSpd("mass matrix diagonal must be strictly positive");
  }
  MassMatrix m;
  m.kind_ = Kind::Diagonal;
  m.n_ = d.size();
  m.diag_ = std::move(d);
  return m;
}

MassMatrix MassMatrix::dense(Mat mat) {
  if (mat.rows() != mat.cols() || !mat.isApprox(mat.transpose(), 1e-12)) {
    throw NotSpd("mass matrix must be symmetric");
  }
  Eigen::LLT<Mat> llt(mat);
  if (llt.info() != Eigen::Success) {
    throw NotSpd("mass matrix must be positive definite");
  }
  MassMatrix m;
  m.kind_ = Kind::Dense;
  m.n_ = mat.rows();
  m.inv_ = llt.solve(Mat::Identity(mat.rows(), mat.cols()));
  m.dense_ = std::move(mat);
  return m;
}

Vec MassMatrix::apply_inverse(const Vec& v) const {
  switch (kind_) {
    case Kind::Identity:
      return v;
    case Kind::Diagonal:
      return v.cwiseQuotient(diag_);
    case Kind::Dense:
      return inv_ * v;
  }
  return v;
}

Vec MassMatrix::apply(const Vec& v) const {
  switch (kind_) {
    case Kind::Identity:
      return v;
    case Kind::Diagonal:
      return v.cwiseProduct(diag_);
    case Kind::Dense:
      return dense_ * v;
  }
  return v;
}

double MassMatrix::kinetic(const Vec& p) const {
  switch (kind_) {
    case Kind::Identity:
      return 0.5 * p.squaredNorm();
    case Kind::Diagonal:
      return 0.5 * p.cwiseQuotient(diag_).dot(p);
    case Kind::Dense:
      return 0.5 * p.dot(inv_ * p);
  }
  return 0.0;
}

Mat MassMatrix::inverse_matrix() const {
  switch (kind_) {
    case Kind::Identity:
      return Mat::Identity(n_, n_);
    case Kind::Diagonal:
      return diag_.cwiseInverse().asDiagonal();
    case Kind::Dense:
      return inv_;
  }
  return Mat::Identity(n_, n_);
}

double SeparatedHamiltonian::energy(const Vec& u) const {
  const Vec q = u.head(n_dof);
  const Vec p = u.tail(n_dof);
  return mass.kinetic(p) + soft_potential(q) + stiff_potential(q) / epsilon;
}

StepSchedule::StepSchedule(double tau, double delta) : tau_(tau), delta_(delta) {
  if (!(tau > 0.0) || !(delta > 0.0) || tau > delta) {
    throw ScheduleInfeasible("step schedule requires 0 < tau <= delta");
  }
}

bool StepSchedule::regime_ok(double epsilon, double stiffness_exponent) const {
  const double scaled = tau_ / std::pow(epsilon, stiffness_exponent);
  return scaled * scaled < delta_ && delta_ < scaled;
}

StepSchedule make_schedule_rule_of_thumb(double epsilon, double gamma,
                                         double stiffness_exponent) {
  if (!(epsilon > 0.0) || !(gamma > 0.0) || gamma >= 1.0) {
    throw ScheduleInfeasible("rule of thumb needs epsilon > 0 and gamma in (0, 1)");
  }
  const double scale = std::pow(epsilon, stiffness_exponent);
  if (scale >= gamma) {
    throw ScheduleInfeasible(
        "rule of thumb infeasible: eps^s >= gamma leaves no room between "
        "microstep and mesostep");
  }
  return StepSchedule(gamma * scale, gamma * gamma);
}

GradientCheck check_gradient(const SeparatedHamiltonian& ham, const Vec& q,
                             double fd_step) {
  auto probe = [&](const std::function<double(const Vec&)>& f,
                   const std::function<Vec(const Vec&)>& g) {
    const Vec analytic = g(q);
    double worst = 0.0;
    Vec x = q;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + fd_step;
      const double fp = f(x);
      x[i] = saved - fd_step;
      const double fm = f(x);
      x[i] = saved;
      const double fd = (fp - fm) / (2.0 * fd_step);
      const double denom = std::max(1.0, std::abs(analytic[i]));
      worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
    }
    return worst;
  };
  GradientCheck out;
  out.soft_max_rel_err = probe(ham.soft_potential, ham.soft_gradient);
  out.stiff_max_rel_err = probe(ham.stiff_potential, ham.stiff_gradient);
  return out;
}

}  // namespace flavor
