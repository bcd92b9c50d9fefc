#ifndef TWINDECOMP_RNG_HPP
#define TWINDECOMP_RNG_HPP

#include <cstdint>

namespace twindecomp {

// SplitMix64. Small, fast, and fully portable: outputs depend only on the
// seed, never on the standard library's distribution internals. Streams for
// parallel work derive from hashing (seed, stream index), which makes
// generated data independent of worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform integer in [lo, hi]; modulo bias is negligible for the small
  // ranges used here.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Two finalizer rounds: small (a, b) values must land on well-separated
  // states or streams derived from nearby seeds overlap.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    Rng first(a);
    Rng second(first.next_u64() ^ b);
    return second.next_u64();
  }

 private:
  std::uint64_t state_;
};

}  // namespace twindecomp

#endif  // TWINDECOMP_RNG_HPP
