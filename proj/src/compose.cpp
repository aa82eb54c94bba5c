#include "flavor/compose.hpp"

#include <atomic>
#include <cmath>
#include <memory>
#include <thread>
#include <utility>

namespace flavor {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Fine:
      return "fine";
    case Kind::Nonintrusive:
      return "nonintrusive";
    case Kind::Reversible:
      return "reversible";
    case Kind::Artificial:
      return "artificial";
    case Kind::Nonautonomous:
      return "nonautonomous";
    case Kind::Sde:
      return "sde";
    case Kind::LangevinSlow:
      return "langevin-slow";
    case Kind::LangevinFast:
      return "langevin-fast";
    case Kind::LangevinReversibleSlow:
      return "langevin-reversible-slow";
    case Kind::LangevinReversibleFast:
      return "langevin-reversible-fast";
  }
  return "unknown";
}

namespace {

void count_stage(const Stage& st, StepCounters& c) {
  switch (st.op) {
    case Stage::Op::Map:
    case Stage::Op::MapAdjoint:
    case Stage::Op::Stochastic:
      (st.alpha != 0.0 ? c.stiff_applies : c.soft_applies) += 1;
      break;
    case Stage::Op::Ou:
      c.ou_applies += 1;
      break;
    case Stage::Op::SoftKick:
    case Stage::Op::ConstrainedDrift:
      c.soft_applies += 1;
      break;
    case Stage::Op::FastDriftKick:
      c.stiff_applies += 1;
      break;
  }
}

// Stamps each slow-clock stage with the deterministic time accumulated
// before it.  Fast-clock stages keep their offset of zero.
void finalize_offsets(std::vector<Stage>& stages) {
  double acc = 0.0;
  for (auto& st : stages) {
    if (!st.use_fast_clock) {
      st.time_offset = acc;
    }
    acc += st.det_dt;
  }
}

class CountingSource final : public rng::GaussianSource {
 public:
  CountingSource(rng::GaussianSource& inner, StepCounters& c)
      : inner_(inner), c_(c) {}
  void fill(double* out, Eigen::Index n) override {
    inner_.fill(out, n);
    c_.gaussians += n;
  }

 private:
  rng::GaussianSource& inner_;
  StepCounters& c_;
};

}  // namespace

FlavorStepper::FlavorStepper(Kind kind, StepSchedule sched,
                             std::vector<Stage> stages, bool stochastic,
                             double fast_dt)
    : kind_(kind),
      sched_(sched),
      stages_(std::move(stages)),
      stochastic_(stochastic),
      fast_dt_(fast_dt) {}

void FlavorStepper::advance(Vec& u, const StepContext& ctx) const {
  for (const auto& st : stages_) {
    if (st.h == 0.0) {
      continue;  // identity by the one-step contract: no work, no counters
    }
    const double base =
        st.use_fast_clock ? static_cast<double>(ctx.mesostep) * fast_dt_
                          : ctx.slow_time;
    st.run(u, ctx, base + st.time_offset);
    if (ctx.counters != nullptr) {
      count_stage(st, *ctx.counters);
    }
  }
}

FineStepper::FineStepper(OneStepMap map, double h, double alpha)
    : det_(std::move(map)), h_(h), alpha_(alpha) {
  if (!(h > 0.0)) {
    throw Error("fine step size must be positive");
  }
}

FineStepper::FineStepper(StochasticOneStepMap map, double h, double alpha)
    : stoch_(std::move(map)), h_(h), alpha_(alpha) {
  if (!(h > 0.0)) {
    throw Error("fine step size must be positive");
  }
}

void FineStepper::advance(Vec& u, const StepContext& ctx) const {
  if (stoch_.apply) {
    stoch_.apply(u, h_, alpha_, ctx.slow_time, *ctx.gauss);
  } else {
    det_.apply(u, h_, alpha_, ctx.slow_time);
  }
  if (ctx.counters != nullptr) {
    (alpha_ != 0.0 ? ctx.counters->stiff_applies
                   : ctx.counters->soft_applies) += 1;
  }
}

ConstraintSpec ConstraintSpec::linear_freeze(Mat a) {
  ConstraintSpec c;
  c.linear_ = true;
  c.a_ = std::move(a);
  return c;
}

ConstraintSpec ConstraintSpec::custom(std::function<Mat(const Vec&)> projector) {
  ConstraintSpec c;
  c.custom_ = std::move(projector);
  return c;
}

Mat ConstraintSpec::projector(const Vec& q, const MassMatrix& mass) const {
  if (!linear_) {
    return custom_(q);
  }
  if (!cached_) {
    const Mat minv = mass.inverse_matrix();
    const Mat gram = a_ * minv * a_.transpose();
    Eigen::FullPivLU<Mat> lu(gram);
    if (!lu.isInvertible()) {
      throw ConstraintRankDeficient(
          "frozen directions are linearly dependent (A M^-1 A^T is singular)");
    }
    cached_p_ = Mat::Identity(a_.cols(), a_.cols()) -
                minv * a_.transpose() * lu.inverse() * a_;
    cached_ = true;
  }
  return cached_p_;
}

FlavorStepper flavor_step(OneStepMap legacy, StepSchedule sched,
                          double epsilon) {
  if (!(epsilon > 0.0)) {
    throw Error("epsilon must be positive");
  }
  const double tau = sched.tau();
  const double delta = sched.delta();
  const double alpha = 1.0 / epsilon;
  auto map = std::make_shared<OneStepMap>(std::move(legacy));

  std::vector<Stage> stages(2);
  stages[0].op = Stage::Op::Map;
  stages[0].h = tau;
  stages[0].alpha = alpha;
  stages[0].det_dt = tau;
  stages[0].run = [map, tau, alpha](Vec& u, const StepContext&, double t) {
    map->apply(u, tau, alpha, t);
  };
  stages[1].op = Stage::Op::Map;
  stages[1].h = delta - tau;
  stages[1].alpha = 0.0;
  stages[1].det_dt = delta - tau;
  stages[1].run = [map, h = delta - tau](Vec& u, const StepContext&,
                                         double t) {
    map->apply(u, h, 0.0, t);
  };
  finalize_offsets(stages);
  return FlavorStepper(Kind::Nonintrusive, sched, std::move(stages), false,
                       tau);
}

FlavorStepper flavor_reversible_step(OneStepMap legacy, StepSchedule sched,
                                     double epsilon) {
  if (!(epsilon > 0.0)) {
    throw Error("epsilon must be positive");
  }
  if (!legacy.adjoint_available || !legacy.adjoint) {
    throw AdjointMissing(
        "the reversible composition needs a legacy map carrying its adjoint");
  }
  const double tau = sched.tau();
  const double delta = sched.delta();
  const double alpha = 1.0 / epsilon;
  auto adj = legacy.adjoint;
  auto fwd = std::make_shared<OneStepMap>(std::move(legacy));

  auto make_stage = [](Stage::Op op, std::shared_ptr<OneStepMap> map, double h,
                       double a) {
    Stage st;
    st.op = op;
    st.h = h;
    st.alpha = a;
    st.det_dt = h;
    st.run = [map = std::move(map), h, a](Vec& u, const StepContext&,
                                          double t) {
      map->apply(u, h, a, t);
    };
    return st;
  };

  std::vector<Stage> stages;
  stages.push_back(make_stage(Stage::Op::Map, fwd, tau / 2.0, alpha));
  stages.push_back(make_stage(Stage::Op::Map, fwd, (delta - tau) / 2.0, 0.0));
  stages.push_back(
      make_stage(Stage::Op::MapAdjoint, adj, (delta - tau) / 2.0, 0.0));
  stages.push_back(make_stage(Stage::Op::MapAdjoint, adj, tau / 2.0, alpha));
  finalize_offsets(stages);
  return FlavorStepper(Kind::Reversible, sched, std::move(stages), false, tau);
}

FlavorStepper artificial_flavor_step(SeparatedHamiltonian ham,
                                     StepSchedule sched,
                                     ConstraintSpec constraint,
                                     FastSubstep fast) {
  if (fast == FastSubstep::Exact && !ham.stiff_flow) {
    throw NoStiffFlow(
        "artificial composition asked for the exact fast flow, but the "
        "Hamiltonian registers none");
  }
  const double tau = sched.tau();
  const double delta = sched.delta();
  auto hm = std::make_shared<SeparatedHamiltonian>(std::move(ham));
  auto cons = std::make_shared<ConstraintSpec>(std::move(constraint));
  // Builds (and validates) the projector eagerly for state-independent
  // constraints so rank problems surface at composition time.  Custom
  // projectors may be singular at states never visited (e.g. q = 0), so
  // they are only evaluated during the drift itself.
  if (cons->state_independent()) {
    cons->projector(Vec::Zero(hm->n_dof), hm->mass);
  }

  std::vector<Stage> stages(3);
  stages[0].op = Stage::Op::SoftKick;
  stages[0].h = delta;
  stages[0].alpha = 0.0;
  stages[0].det_dt = 0.0;
  stages[0].run = [hm, delta](Vec& u, const StepContext&, double) {
    const auto n = hm->n_dof;
    const Vec q = u.head(n);
    u.tail(n) -= delta * hm->soft_gradient(q);
  };

  stages[1].op = Stage::Op::FastDriftKick;
  stages[1].h = tau;
  stages[1].alpha = hm->alpha_full();
  stages[1].det_dt = tau;
  if (fast == FastSubstep::Exact) {
    stages[1].run = [hm, tau](Vec& u, const StepContext&, double) {
      const auto n = hm->n_dof;
      Vec q = u.head(n);
      Vec p = u.tail(n);
      hm->stiff_flow(q, p, tau);
      u.head(n) = q;
      u.tail(n) = p;
    };
  } else {
    stages[1].run = [hm, tau](Vec& u, const StepContext&, double) {
      const auto n = hm->n_dof;
      Vec q = u.head(n);
      Vec p = u.tail(n);
      q += tau * hm->mass.apply_inverse(p);
      p -= (tau * hm->alpha_full()) * hm->stiff_gradient(q);
      u.head(n) = q;
      u.tail(n) = p;
    };
  }

  stages[2].op = Stage::Op::ConstrainedDrift;
  stages[2].h = delta - tau;
  stages[2].alpha = 0.0;
  stages[2].det_dt = delta - tau;
  stages[2].run = [hm, cons, h = delta - tau](Vec& u, const StepContext&,
                                              double) {
    const auto n = hm->n_dof;
    const Vec q = u.head(n);
    const Vec p = u.tail(n);
    const Mat proj = cons->projector(q, hm->mass);
    u.head(n) = q + h * hm->mass.apply_inverse(proj * p);
    // The momentum keeps its fast component for the next mesostep.
  };
  finalize_offsets(stages);
  return FlavorStepper(Kind::Artificial, sched, std::move(stages), false, tau);
}

FlavorStepper flavor_sde_step(StochasticOneStepMap legacy, StepSchedule sched,
                              double epsilon) {
  if (!(epsilon > 0.0)) {
    throw Error("epsilon must be positive");
  }
  const double tau = sched.tau();
  const double delta = sched.delta();
  const double alpha = 1.0 / epsilon;
  auto map = std::make_shared<StochasticOneStepMap>(std::move(legacy));

  auto make_stage = [map](double h, double a) {
    Stage st;
    st.op = Stage::Op::Stochastic;
    st.h = h;
    st.alpha = a;
    st.det_dt = h;
    st.run = [map, h, a](Vec& u, const StepContext& ctx, double t) {
      map->apply(u, h, a, t, *ctx.gauss);
    };
    return st;
  };

  std::vector<Stage> stages;
  stages.push_back(make_stage(tau, alpha));
  stages.push_back(make_stage(delta - tau, 0.0));
  finalize_offsets(stages);
  return FlavorStepper(Kind::Sde, sched, std::move(stages), true, tau);
}

namespace {

Stage ou_stage(std::shared_ptr<StochasticOneStepMap> ou, double h, double a) {
  Stage st;
  st.op = Stage::Op::Ou;
  st.h = h;
  st.alpha = a;
  st.det_dt = 0.0;  // overlaps the Hamiltonian substeps
  st.run = [ou = std::move(ou), h, a](Vec& u, const StepContext& ctx,
                                      double t) {
    ou->apply(u, h, a, t, *ctx.gauss);
  };
  return st;
}

Stage map_stage(Stage::Op op, std::shared_ptr<OneStepMap> map, double h,
                double a) {
  Stage st;
  st.op = op;
  st.h = h;
  st.alpha = a;
  st.det_dt = h;
  st.run = [map = std::move(map), h, a](Vec& u, const StepContext&, double t) {
    map->apply(u, h, a, t);
  };
  return st;
}

}  // namespace

FlavorStepper flavor_langevin_step(LangevinSystem sys, StepSchedule sched) {
  if (!(sys.beta > 0.0)) {
    throw Error("Langevin composition needs beta > 0");
  }
  const double tau = sched.tau();
  const double delta = sched.delta();
  const double alpha = sys.ham.alpha_full();
  const bool slow = sys.placement == NoisePlacement::Slow;
  auto ou = std::make_shared<StochasticOneStepMap>(
      ou_exact_flow(sys.friction, 1.0 / sys.beta));
  auto se = std::make_shared<OneStepMap>(symplectic_euler(sys.ham));

  std::vector<Stage> stages;
  if (slow) {
    stages.push_back(ou_stage(ou, tau, 1.0));
    stages.push_back(map_stage(Stage::Op::Map, se, tau, alpha));
    stages.push_back(ou_stage(ou, delta - tau, 1.0));
    stages.push_back(map_stage(Stage::Op::Map, se, delta - tau, 0.0));
  } else {
    stages.push_back(ou_stage(ou, tau, alpha));
    stages.push_back(map_stage(Stage::Op::Map, se, tau, alpha));
    stages.push_back(map_stage(Stage::Op::Map, se, delta - tau, 0.0));
  }
  finalize_offsets(stages);
  return FlavorStepper(slow ? Kind::LangevinSlow : Kind::LangevinFast, sched,
                       std::move(stages), true, tau);
}

FlavorStepper flavor_langevin_reversible_step(LangevinSystem sys,
                                              StepSchedule sched) {
  if (!(sys.beta > 0.0)) {
    throw Error("Langevin composition needs beta > 0");
  }
  const double tau = sched.tau();
  const double delta = sched.delta();
  const double alpha = sys.ham.alpha_full();
  const bool slow = sys.placement == NoisePlacement::Slow;
  auto ou = std::make_shared<StochasticOneStepMap>(
      ou_exact_flow(sys.friction, 1.0 / sys.beta));
  OneStepMap se_map = symplectic_euler(sys.ham);
  auto adj = se_map.adjoint;
  auto se = std::make_shared<OneStepMap>(std::move(se_map));

  const double ou_h = slow ? delta / 2.0 : tau / 2.0;
  const double ou_a = slow ? 1.0 : alpha;

  std::vector<Stage> stages;
  stages.push_back(ou_stage(ou, ou_h, ou_a));
  stages.push_back(map_stage(Stage::Op::Map, se, tau / 2.0, alpha));
  stages.push_back(map_stage(Stage::Op::Map, se, (delta - tau) / 2.0, 0.0));
  stages.push_back(
      map_stage(Stage::Op::MapAdjoint, adj, (delta - tau) / 2.0, 0.0));
  stages.push_back(map_stage(Stage::Op::MapAdjoint, adj, tau / 2.0, alpha));
  stages.push_back(ou_stage(ou, ou_h, ou_a));
  finalize_offsets(stages);
  return FlavorStepper(
      slow ? Kind::LangevinReversibleSlow : Kind::LangevinReversibleFast,
      sched, std::move(stages), true, tau);
}

FlavorStepper flavor_nonautonomous_step(ForcedHamiltonian sys,
                                        StepSchedule sched) {
  const double tau = sched.tau();
  const double delta = sched.delta();
  auto fh = std::make_shared<ForcedHamiltonian>(std::move(sys));

  std::vector<Stage> stages(2);
  stages[0].op = Stage::Op::FastDriftKick;
  stages[0].h = tau;
  stages[0].alpha = 1.0;
  stages[0].det_dt = tau;
  stages[0].use_fast_clock = true;
  stages[0].run = [fh, tau](Vec& u, const StepContext&, double t) {
    const auto n = fh->ham.n_dof;
    Vec q = u.head(n);
    Vec p = u.tail(n);
    q += tau * fh->ham.mass.apply_inverse(p);
    p += tau * (fh->fast_force(q, t) - fh->ham.soft_gradient(q));
    u.head(n) = q;
    u.tail(n) = p;
  };
  stages[1].op = Stage::Op::Map;
  stages[1].h = delta - tau;
  stages[1].alpha = 0.0;
  stages[1].det_dt = delta - tau;
  stages[1].run = [fh, h = delta - tau](Vec& u, const StepContext&, double) {
    const auto n = fh->ham.n_dof;
    Vec q = u.head(n);
    Vec p = u.tail(n);
    q += h * fh->ham.mass.apply_inverse(p);
    p -= h * fh->ham.soft_gradient(q);
    u.head(n) = q;
    u.tail(n) = p;
  };
  finalize_offsets(stages);
  return FlavorStepper(Kind::Nonautonomous, sched, std::move(stages), false,
                       tau);
}

OneStepMap forced_euler(ForcedHamiltonian sys) {
  OneStepMap m;
  // Drift-kick with the force at the updated position, mirroring the
  // composed nonautonomous stepper so the tau = delta degeneration is
  // bitwise.  alpha = 0 drops the fast forcing (control runs).
  m.apply = [fh = std::move(sys)](Vec& u, double h, double alpha, double t) {
    if (h == 0.0) {
      return;
    }
    const auto n = fh.ham.n_dof;
    Vec q = u.head(n);
    Vec p = u.tail(n);
    q += h * fh.ham.mass.apply_inverse(p);
    if (alpha != 0.0) {
      p += h * (fh.fast_force(q, t) - fh.ham.soft_gradient(q));
    } else {
      p -= h * fh.ham.soft_gradient(q);
    }
    u.head(n) = q;
    u.tail(n) = p;
  };
  return m;
}

Trajectory integrate(const Stepper& stepper, const Vec& u0, double t_end,
                     const SamplerPolicy& sampler, std::uint64_t seed,
                     std::uint64_t traj_index) {
  const double dt = stepper.dt();
  if (!(dt > 0.0)) {
    throw Error("stepper must advance positive time per mesostep");
  }
  if (!(t_end > 0.0)) {
    throw Error("horizon must be positive");
  }
  Trajectory out;
  out.step = dt;
  out.seed = seed;
  out.traj_index = traj_index;
  const auto n_steps =
      static_cast<std::int64_t>(std::floor(t_end / dt + 1e-9));
  const std::int64_t stride = sampler.stride > 0 ? sampler.stride : 1;
  const double fdt = stepper.fast_dt();
  const bool stoch = stepper.stochastic();

  Vec u = u0;
  auto record = [&](std::int64_t k) {
    out.times.push_back(static_cast<double>(k) * dt);
    out.fast_clock.push_back(static_cast<double>(k) * fdt);
    out.states.push_back(u);
    if (sampler.energy) {
      out.energies.push_back(sampler.energy(u));
    }
  };
  record(0);

  for (std::int64_t k = 0; k < n_steps; ++k) {
    StepContext ctx;
    ctx.mesostep = k;
    ctx.slow_time = static_cast<double>(k) * dt;
    ctx.counters = &out.counters;
    if (stoch) {
      rng::StreamGauss gauss(rng::Stream::substream(
          seed, traj_index, static_cast<std::uint64_t>(k)));
      CountingSource counting(gauss, out.counters);
      ctx.gauss = &counting;
      stepper.advance(u, ctx);
    } else {
      stepper.advance(u, ctx);
    }
    if (!u.allFinite()) {
      out.failure = FailureInfo{
          k, "non-finite state after mesostep " + std::to_string(k)};
      break;
    }
    const std::int64_t done = k + 1;
    if (done % stride == 0 || done == n_steps) {
      record(done);
    }
  }
  return out;
}

std::vector<Trajectory> run_ensemble(const Stepper& stepper, const Vec& u0,
                                     double t_end,
                                     const SamplerPolicy& sampler,
                                     std::uint64_t base_seed, int n_traj,
                                     int threads) {
  if (n_traj < 1) {
    throw Error("ensemble size must be >= 1");
  }
  if (!(stepper.dt() > 0.0) || !(t_end > 0.0)) {
    throw Error("ensemble needs a positive mesostep and horizon");
  }
  std::vector<Trajectory> out(static_cast<std::size_t>(n_traj));
  int n_threads =
      threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) {
    n_threads = 1;
  }
  n_threads = std::min(n_threads, n_traj);
  if (n_threads == 1) {
    for (int i = 0; i < n_traj; ++i) {
      out[static_cast<std::size_t>(i)] = integrate(
          stepper, u0, t_end, sampler, base_seed, static_cast<std::uint64_t>(i));
    }
    return out;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_traj) {
        return;
      }
      out[static_cast<std::size_t>(i)] = integrate(
          stepper, u0, t_end, sampler, base_seed, static_cast<std::uint64_t>(i));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back(worker);
  }
  for (auto& th : pool) {
    th.join();
  }
  return out;
}

}  // namespace flavor
