#include "flavor/rng.hpp"

#include <cmath>

namespace flavor::rng {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Stream::Stream(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) {
    word = splitmix64(sm);
  }
}

Stream Stream::substream(std::uint64_t base_seed, std::uint64_t trajectory,
                         std::uint64_t mesostep) {
  // Hash the triple through one splitmix pass per component so nearby
  // (trajectory, mesostep) pairs land on unrelated stream states.
  std::uint64_t sm = base_seed;
  std::uint64_t mixed = splitmix64(sm);
  sm = mixed ^ (trajectory + 0x9e3779b97f4a7c15ULL);
  mixed = splitmix64(sm);
  sm = mixed ^ (mesostep + 0x517cc1b727220a95ULL);
  mixed = splitmix64(sm);
  return Stream(mixed);
}

std::uint64_t Stream::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Stream::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

void StreamGauss::fill(double* out, Eigen::Index n) {
  Eigen::Index i = 0;
  while (i < n) {
    double u, v, s;
    do {
      u = 2.0 * s_.next_unit() - 1.0;
      v = 2.0 * s_.next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    out[i++] = u * scale;
    if (i < n) {
      out[i++] = v * scale;
    }
  }
}

void ReplaySource::fill(double* out, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pos_ >= values_.size()) {
      throw Error("replay source exhausted");
    }
    out[i] = values_[pos_++];
  }
}

void RecordingSource::fill(double* out, Eigen::Index n) {
  inner_.fill(out, n);
  log_.insert(log_.end(), out, out + n);
}

}  // namespace flavor::rng
