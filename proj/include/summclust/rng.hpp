#pragma once

#include <cmath>
#include <cstdint>

namespace summclust {

// 64-bit finalizer used for key derivation and as the splitmix64 output mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream generator (splitmix64). Streams are derived purely
// from (seed, stream, substream) keys, so draws are deterministic no matter
// how work is scheduled across threads.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ kGolden)) {}

  Rng(std::uint64_t seed, std::uint64_t stream)
      : state_(mix64(mix64(seed ^ kGolden) + kGolden * (stream + 1))) {}

  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream)
      : state_(mix64(mix64(mix64(seed ^ kGolden) + kGolden * (stream + 1)) +
                     kGolden * (substream + 1))) {}

  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream,
      std::uint64_t counter)
      : state_(mix64(mix64(mix64(mix64(seed ^ kGolden) + kGolden * (stream + 1)) +
                           kGolden * (substream + 1)) +
                     kGolden * (counter + 1))) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // UniformRandomBitGenerator interface.
  std::uint64_t operator()() { return next_u64(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~0ULL; }

  // Uniform on [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1); safe as a log() argument.
  double next_unit_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Box-Muller, hand-rolled so sequences are identical across platforms.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(next_unit_open()));
    const double a = 2.0 * 3.14159265358979323846 * next_unit();
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Rademacher sign.
  double next_sign() { return (next_u64() & 1ULL) ? 1.0 : -1.0; }

  // Integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace summclust
