#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hyperv2x {

/// SplitMix64-based random stream. Hand-rolled so that sampled values are
/// reproducible byte-for-byte across standard library implementations, the
/// stream state is trivially serializable into checkpoints, and independent
/// sub-streams can be split off for concurrent sampling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit && span != 0);
    return lo + static_cast<std::int64_t>(r % span);
  }

  /// Standard normal via Box-Muller (polar-free form, cached spare).
  double normal();
  double normal(double mean, double std) { return mean + std * normal(); }

  /// Derives an independent deterministic sub-stream.
  Rng split(std::uint64_t stream) const {
    Rng mixer(state_ ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL));
    return Rng(mixer.next_u64());
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& s);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hyperv2x
