#ifndef FLAVOR_RNG_HPP
#define FLAVOR_RNG_HPP

#include <cstdint>
#include <vector>

#include "flavor/types.hpp"

// Self-contained random number generation so that trajectories and output
// files are reproducible bit-for-bit for a given seed, independently of the
// standard library implementation.  The generator is xoshiro256++ seeded
// through splitmix64; Gaussians come from the Marsaglia polar method.  These
// choices are fixed per release: golden output files depend on them.

namespace flavor::rng {

/// One splitmix64 step: advances `state` and returns the next value.
std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256++ stream.
class Stream {
 public:
  explicit Stream(std::uint64_t seed);

  /// Deterministic substream for (base_seed, trajectory, mesostep).
  /// Distinct index triples give statistically independent streams, so
  /// ensemble members and mesosteps can be generated in any order.
  static Stream substream(std::uint64_t base_seed, std::uint64_t trajectory,
                          std::uint64_t mesostep);

  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit();

 private:
  std::uint64_t s_[4];
};

/// Source of standard Gaussian blocks.  `fill` draws exactly n variates in a
/// fixed order; the polar method generates them in pairs and a trailing
/// unpaired slot discards its partner, so consecutive blocks do not share
/// generator state beyond the stream position.
class GaussianSource {
 public:
  virtual ~GaussianSource() = default;
  virtual void fill(double* out, Eigen::Index n) = 0;
  void fill(Vec& out) { fill(out.data(), out.size()); }
};

/// Draws from a Stream via the Marsaglia polar method.
class StreamGauss final : public GaussianSource {
 public:
  explicit StreamGauss(Stream s) : s_(s) {}
  using GaussianSource::fill;
  void fill(double* out, Eigen::Index n) override;

 private:
  Stream s_;
};

/// Replays a recorded block sequence; throws Error when exhausted.
/// Used to freeze noise while probing stochastic maps (e.g. finite
/// difference Jacobians of a fixed realization).
class ReplaySource final : public GaussianSource {
 public:
  explicit ReplaySource(std::vector<double> values)
      : values_(std::move(values)) {}
  using GaussianSource::fill;
  void fill(double* out, Eigen::Index n) override;
  void rewind() { pos_ = 0; }

 private:
  std::vector<double> values_;
  std::size_t pos_ = 0;
};

/// Copies every drawn value into `log` while forwarding to `inner`.
class RecordingSource final : public GaussianSource {
 public:
  RecordingSource(GaussianSource& inner, std::vector<double>& log)
      : inner_(inner), log_(log) {}
  using GaussianSource::fill;
  void fill(double* out, Eigen::Index n) override;

 private:
  GaussianSource& inner_;
  std::vector<double>& log_;
};

}  // namespace flavor::rng

#endif
