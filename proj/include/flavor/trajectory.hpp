#ifndef FLAVOR_TRAJECTORY_HPP
#define FLAVOR_TRAJECTORY_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flavor/types.hpp"

namespace flavor {

/// Work counters split by stiff coefficient.  "Stiff" applications evaluate
/// the full system (alpha != 0), "soft" ones only the slow part, so the
/// speedup of a flow-averaged run over a fine run is the ratio of stiff
/// counts.
struct StepCounters {
  std::int64_t stiff_applies = 0;
  std::int64_t soft_applies = 0;
  std::int64_t ou_applies = 0;
  std::int64_t gaussians = 0;

  void add(const StepCounters& o) {
    stiff_applies += o.stiff_applies;
    soft_applies += o.soft_applies;
    ou_applies += o.ou_applies;
    gaussians += o.gaussians;
  }
};

struct FailureInfo {
  std::int64_t mesostep = -1;
  std::string message;
};

/// Sampled trajectory.  `fast_clock[i]` is the accumulated fast time
/// (mesostep count times tau) at sample i; for single-scale steppers it
/// equals the physical time.  On a non-finite state the integration stops
/// and `failure` records the offending mesostep; the samples collected so
/// far are kept.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<double> fast_clock;
  std::vector<double> energies;  // filled only when the sampler asks for it
  StepCounters counters;
  std::optional<FailureInfo> failure;
  double step = 0.0;  // mesostep size used by the stepper
  std::uint64_t seed = 0;
  std::uint64_t traj_index = 0;

  bool ok() const { return !failure.has_value(); }
};

/// What integrate() records.  States are kept every `stride` mesosteps (the
/// initial state and the final state are always kept).  When `energy` is
/// set its value is recorded alongside each kept state.
struct SamplerPolicy {
  std::int64_t stride = 1;
  std::function<double(const Vec&)> energy;
};

}  // namespace flavor

#endif
