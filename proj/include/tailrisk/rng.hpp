#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace tailrisk {

// SplitMix64 finalizer applied to (parent, stream); used to build the seed tree
// run seed -> task seed -> worker seed.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept;

/// Seeded random stream.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All real-valued variates are produced by transforms written here
/// (not by <random> distributions, which are implementation-defined), so a seed
/// reproduces the same stream with any conforming standard library.
///
/// An Rng is not shareable between threads mid-stream; use fork() to hand a
/// worker its own generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();

  // Standard normal by the Box-Muller transform; the second variate is cached.
  double normal();

  double exponential() { return -std::log(uniform()); }

  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

  // Independent generator for sub-task `stream`. Depends on the seed only,
  // never on how much of this stream has been consumed.
  Rng fork(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace tailrisk
